#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pixbrush/image.hpp"
#include "pixbrush/schedule.hpp"
#include "pixbrush/vec.hpp"

namespace pixbrush {

// Binary localization mask plus per-feature-layer downsampled versions.
// `full` matches the probability render's resolution; each level is the
// area-average of `full` re-thresholded at 0.5 with ties mapping to 1.
// All values are exactly 0.0 or 1.0.
struct MaskPyramid {
  Image full;                    // H x W x 1
  std::map<int, Image> levels;   // resolution -> res x res x 1
  double threshold = 0.5;        // binarization threshold used for `full`

  const Image& level(int resolution) const;  // throws when missing
};

// Guidance condition. Three legal variants:
//   text only            (prompt)
//   text + image         (prompt, reference_image)
//   text + image + mask  (prompt, reference_image, mask)
// A mask without a reference image is invalid.
struct Condition {
  std::string prompt;
  std::optional<Image> reference_image;  // H x W x 3 in [0,1]
  std::optional<MaskPyramid> mask;
  double image_weight = 1.0;             // w in the feature combination
};

enum class ConditionKind { Text, TextImage, TextImageMask };

// Classifies and validates a condition (throws on mask-without-image or
// negative image weight).
ConditionKind condition_kind(const Condition& cond);

// Result of one score-distillation evaluation.
struct GuidanceGradient {
  Image grad;                 // same shape as the rendered image
  int timestep = 0;
  double weight = 0.0;        // w(t) applied to the residual
  double grad_norm = 0.0;     // L2 norm over all entries
  double mask_coverage = 0.0; // fraction of ones in the full mask; 0 if none
};

// Noise-prediction backend. Implementations must be deterministic given
// (z_t, t, condition) and their own construction-time seed. The declared
// feature-layer resolutions drive which pyramid levels callers build;
// masked conditions are expected to carry every declared level.
class GuidanceBackend {
 public:
  virtual ~GuidanceBackend() = default;

  virtual Image predict_noise(const Image& z_t, int t,
                              const Condition& cond) = 0;
  virtual std::vector<int> feature_layer_resolutions() const = 0;
};

// Decoupled cross-attention combination: ca_text + w * ca_image,
// elementwise. Shapes must match.
Image combine_ca(const Image& ca_text, const Image& ca_image, double w);

// Mask-modulated combination: ca_text + w * ca_image * mask, with the
// 1-channel mask broadcast across feature channels. mask_level's spatial
// size must equal the feature maps'. Masked positions carry exactly
// ca_text; unmasked positions equal combine_ca.
Image masked_ca(const Image& ca_text, const Image& ca_image, double w,
                const Image& mask_level);

// Thresholds a probability render into the full mask (render >= threshold)
// and downsamples it to each requested resolution by area-averaging and
// re-thresholding at 0.5 (ties -> 1). Every resolution must divide the
// render's height and width.
MaskPyramid build_mask_pyramid(const Image& probability_render,
                               double threshold,
                               const std::vector<int>& level_resolutions);

// Deterministic flat color derived from the prompt text: FNV-1a of the
// bytes, low three bytes mapped to RGB in [0,1].
Vec3 prompt_color(const std::string& prompt);

// Target overrides for the toy backend. By default the text-only target
// is the prompt-hash flat color; tests that need a spatial localization
// target can supply loc_target (applied to 1-channel predictions only,
// so the 3-channel masked-target algebra keeps its documented form).
struct ToyTargets {
  std::optional<Image> loc_target;          // 1-channel spatial target
  std::optional<Vec3> flat_color_override;  // replaces the prompt color
};

// Closed-form stand-in for a diffusion model. Its noise prediction
//   eps_hat = (z_t - sqrt(ab_t) * target) / sqrt(1 - ab_t)
// makes the score-distillation gradient exactly
//   w(t) * sqrt(ab_t)/sqrt(1-ab_t) * (x - target),
// independent of the sampled noise. target depends on the condition:
//   text only      -> flat prompt color
//   text + image   -> reference image resized to the prediction size
//   text + image + mask -> M * I + (1 - M) * flat color, at full size
// For 1-channel predictions, colors and reference images collapse to
// their channel mean. Pure and reentrant.
class ToyBackend : public GuidanceBackend {
 public:
  explicit ToyBackend(NoiseSchedule schedule, ToyTargets targets = {});

  Image predict_noise(const Image& z_t, int t, const Condition& cond) override;
  std::vector<int> feature_layer_resolutions() const override;

  // The condition's target at the given shape; exposed for tests.
  Image target_image(const Condition& cond, int height, int width,
                     int channels) const;

 private:
  NoiseSchedule schedule_;
  ToyTargets targets_;
};

// Timestep weighting w(t): constant 1, or (1 - alpha_bar_t).
enum class WeightKind { Constant, OneMinusAlphaBar };

double timestep_weight(WeightKind kind, int t, const NoiseSchedule& schedule);

// Score-distillation gradient on a rendered image:
//   grad = w(t) * (backend.predict_noise(z_t, t, cond) - eps)
// with z_t = add_noise(x, t, eps). Throws on backend failure, shape
// mismatch, or a non-finite gradient (callers skip the step).
GuidanceGradient sds_grad(GuidanceBackend& backend, const Image& x,
                          const Condition& cond, int t, const Image& eps,
                          const NoiseSchedule& schedule, WeightKind weight_kind);

}  // namespace pixbrush
