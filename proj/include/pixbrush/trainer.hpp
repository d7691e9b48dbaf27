#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pixbrush/config.hpp"
#include "pixbrush/fields.hpp"
#include "pixbrush/guidance.hpp"
#include "pixbrush/mesh.hpp"
#include "pixbrush/optimizer.hpp"
#include "pixbrush/rng.hpp"
#include "pixbrush/uv_inversion.hpp"

namespace pixbrush {

enum class Phase : int32_t { Warmup = 0, Joint = 1, Done = 2 };

// Per-step record. Gradient norms are as applied; normalized_loss divides
// out the schedule factor w(t) * sqrt(ab/(1-ab)), which under the toy
// backend turns the norm into the distance to the target, making loss
// curves comparable across randomly sampled timesteps.
struct StepMetrics {
  int32_t iteration = 0;
  int32_t phase = 0;
  int32_t timestep_loc = -1;
  int32_t timestep_img = -1;
  double loc_grad_norm = 0.0;
  double img_grad_norm = 0.0;
  double normalized_loss = 0.0;
  uint8_t skipped = 0;
};

// Complete optimization state. Everything here round-trips through
// checkpoints losslessly, so a resumed run continues bit-identically
// under the toy backend.
struct TrainState {
  int32_t iteration = 0;
  Phase phase = Phase::Warmup;
  std::string config_digest;
  FieldParams loc_params;
  FieldParams tex_params;
  AdamState loc_opt;
  AdamState tex_opt;
  Rng rng;
  std::vector<StepMetrics> history;
  int32_t consecutive_failures = 0;
};

// Versioned binary container with magic header "PXBC" and a trailer
// marker; load throws on bad magic, unknown version, or truncation.
// Writes are atomic (temp file + rename).
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// In-memory conditioning inputs; when set they take precedence over the
// config's file paths (tests drive the trainer without touching disk).
struct TrainInputs {
  std::optional<Image> reference_image;
  std::optional<Image> base_texture;
};

// Target overrides forwarded to a toy backend constructed by the trainer;
// ignored for external backends.
// Two-phase optimization: a localization-only warm-up, then joint
// optimization where the localization loss (scaled by
// loc_loss_weight_joint) and the mask-modulated image guidance on the
// blended texture render both contribute gradients. One camera is drawn
// per step; the mask pyramid is rebuilt every joint step from that
// step's own probability render.
class Trainer {
 public:
  // Fresh run: fields and optimizer state are initialized from the seed.
  Trainer(const TrainConfig& config, const Mesh& mesh,
          std::shared_ptr<GuidanceBackend> backend, TrainInputs inputs = {});

  // Resume: continues from a checkpointed state; the state's config
  // digest must match the given config.
  Trainer(const TrainConfig& config, const Mesh& mesh,
          std::shared_ptr<GuidanceBackend> backend, TrainInputs inputs,
          TrainState resumed);

  // One warm-up step: text-only guidance on the probability render;
  // texture parameters are untouched. Requires phase == Warmup.
  StepMetrics warmup_step();

  // One joint step; requires phase == Joint. With no_loc_loss the
  // localization term is dropped (the mask still updates through the
  // blend); with no_ca_mask the backend condition carries no pyramid.
  StepMetrics joint_step();

  // Runs all remaining steps. With a non-empty checkpoint_dir, saves
  // checkpoint_<iter>.bin every checkpoint_every iterations and
  // checkpoint_final.bin at the end. Throws after failure_budget
  // consecutive skipped steps.
  void run(const std::string& checkpoint_dir = "");

  // Extracts both texture-space maps at every covered texel using
  // running statistics.
  TextureMaps maps() const;

  const TrainState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  const SurfaceSampleSet& samples() const { return samples_; }
  const Mesh& mesh() const { return mesh_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const Image* base_texture() const {
    return base_texture_.has_value() ? &*base_texture_ : nullptr;
  }

 private:
  StepMetrics step(bool joint);

  TrainConfig config_;
  Mesh mesh_;
  std::shared_ptr<GuidanceBackend> backend_;
  NoiseSchedule schedule_;
  SurfaceSampleSet samples_;
  std::optional<Image> reference_image_;
  std::optional<Image> base_texture_;
  int warmup_target_ = 0;  // effective warm-up iterations
  TrainState state_;
};

}  // namespace pixbrush
