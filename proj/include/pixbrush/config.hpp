#pragma once

#include <cstdint>
#include <string>

#include "pixbrush/camera.hpp"
#include "pixbrush/fields.hpp"
#include "pixbrush/guidance.hpp"
#include "pixbrush/vec.hpp"

namespace pixbrush {

enum class BackendKind { Toy, External };
enum class OptimizerKind { Adam };

// Full run configuration. Serialized as flat `key = value` text; every
// field below maps to one key of the same name (base_color uses the
// three keys base_color_r/g/b). Unknown keys are rejected.
struct TrainConfig {
  // Phase lengths and resolutions.
  int warmup_iters = 1000;
  int joint_iters = 10000;
  int texture_resolution = 512;
  int render_resolution = 512;

  // Per-step view sampling (keys elevation_min .. fov_deg).
  ViewConfig view;

  // Conditioning.
  std::string prompt;
  std::string reference_image;  // PNG path; empty means text-only guidance
  double image_weight = 1.0;
  double mask_threshold = 0.5;

  // Optimization.
  double learning_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double loc_loss_weight_joint = 1.0;
  uint64_t seed = 0;

  // Ablations.
  bool no_warmup = false;
  bool no_ca_mask = false;
  bool no_loc_loss = false;

  // Guidance backend.
  BackendKind backend = BackendKind::Toy;
  std::string external_url = "http://127.0.0.1:8585";

  // Field architecture.
  int field_width = 256;
  int num_frequencies = 6;
  double frequency_scale = 1.0;
  EncodingMode encoding_mode = EncodingMode::AxisAligned;

  // Noise schedule and weighting.
  WeightKind weight_kind = WeightKind::Constant;
  int schedule_timesteps = 1000;
  double beta_lo = 1e-4;
  double beta_hi = 0.02;
  int timestep_min = 20;
  int timestep_max = 980;

  // Rendering.
  double background_value = 0.8;
  Vec3 base_color{0.5, 0.5, 0.5};
  bool base_shaded = false;
  std::string base_texture;  // optional existing texture PNG to edit over

  // Run management.
  int checkpoint_every = 500;
  int failure_budget = 50;
  bool export_16bit = false;
};

// Parses flat key/value text: one `key = value` per line, `#` comments,
// blank lines ignored. Throws std::runtime_error naming the offending
// line on unknown keys or malformed values.
TrainConfig parse_config_text(const std::string& text,
                              const std::string& origin);
TrainConfig load_config(const std::string& path);

// Applies one key/value pair (shared by the parser and CLI overrides).
void apply_config_entry(TrainConfig& config, const std::string& key,
                        const std::string& value, const std::string& origin);

// Range and consistency checks; throws on violation.
void validate_config(const TrainConfig& config);

// Canonical text form: every key in a fixed order with normalized value
// formatting. Equal configs produce identical text.
std::string canonical_config(const TrainConfig& config);

// 16-hex-digit digest of the canonical form; recorded in checkpoints,
// exported layers, and run manifests.
std::string config_digest(const TrainConfig& config);

}  // namespace pixbrush
