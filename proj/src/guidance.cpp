#include "pixbrush/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "pixbrush/rng.hpp"

namespace pixbrush {

const Image& MaskPyramid::level(int resolution) const {
  auto it = levels.find(resolution);
  if (it == levels.end()) {
    throw std::invalid_argument("mask pyramid has no level at resolution " +
                                std::to_string(resolution));
  }
  return it->second;
}

ConditionKind condition_kind(const Condition& cond) {
  if (cond.image_weight < 0.0) {
    throw std::invalid_argument("image weight must be non-negative");
  }
  if (cond.mask.has_value() && !cond.reference_image.has_value()) {
    throw std::invalid_argument("masked condition requires a reference image");
  }
  if (cond.mask.has_value()) {
    return ConditionKind::TextImageMask;
  }
  if (cond.reference_image.has_value()) {
    return ConditionKind::TextImage;
  }
  return ConditionKind::Text;
}

Image combine_ca(const Image& ca_text, const Image& ca_image, double w) {
  if (ca_text.height != ca_image.height || ca_text.width != ca_image.width ||
      ca_text.channels != ca_image.channels) {
    throw std::invalid_argument("feature map shapes do not match");
  }
  Image out = ca_text;
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += w * ca_image.data[i];
  }
  return out;
}

Image masked_ca(const Image& ca_text, const Image& ca_image, double w,
                const Image& mask_level) {
  if (ca_text.height != ca_image.height || ca_text.width != ca_image.width ||
      ca_text.channels != ca_image.channels) {
    throw std::invalid_argument("feature map shapes do not match");
  }
  if (mask_level.height != ca_text.height ||
      mask_level.width != ca_text.width || mask_level.channels != 1) {
    throw std::invalid_argument(
        "mask resolution does not match feature resolution");
  }
  Image out = ca_text;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double m = mask_level.at(y, x, 0);
      for (int c = 0; c < out.channels; ++c) {
        out.at(y, x, c) += w * ca_image.at(y, x, c) * m;
      }
    }
  }
  return out;
}

MaskPyramid build_mask_pyramid(const Image& probability_render,
                               double threshold,
                               const std::vector<int>& level_resolutions) {
  if (probability_render.channels != 1) {
    throw std::invalid_argument("probability render must have one channel");
  }
  MaskPyramid pyramid;
  pyramid.threshold = threshold;
  pyramid.full = Image(probability_render.height, probability_render.width, 1);
  for (size_t i = 0; i < pyramid.full.data.size(); ++i) {
    pyramid.full.data[i] =
        probability_render.data[i] >= threshold ? 1.0 : 0.0;
  }

  for (int res : level_resolutions) {
    if (res <= 0 || pyramid.full.height % res != 0 ||
        pyramid.full.width % res != 0) {
      throw std::invalid_argument(
          "level resolution must divide the render resolution");
    }
    const int bh = pyramid.full.height / res;
    const int bw = pyramid.full.width / res;
    Image level(res, res, 1);
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < bh; ++dy) {
          for (int dx = 0; dx < bw; ++dx) {
            acc += pyramid.full.at(y * bh + dy, x * bw + dx, 0);
          }
        }
        const double avg = acc / (bh * bw);
        // Re-threshold at 0.5; the tie (exactly 0.5) maps to 1.
        level.at(y, x, 0) = avg >= 0.5 ? 1.0 : 0.0;
      }
    }
    pyramid.levels.emplace(res, std::move(level));
  }
  return pyramid;
}

Vec3 prompt_color(const std::string& prompt) {
  const uint64_t h = fnv1a64(prompt);
  return Vec3{static_cast<double>(h & 0xFF) / 255.0,
              static_cast<double>((h >> 8) & 0xFF) / 255.0,
              static_cast<double>((h >> 16) & 0xFF) / 255.0};
}

ToyBackend::ToyBackend(NoiseSchedule schedule, ToyTargets targets)
    : schedule_(std::move(schedule)), targets_(std::move(targets)) {}

std::vector<int> ToyBackend::feature_layer_resolutions() const {
  // Pixel-space stand-in; these only exercise the pyramid plumbing.
  return {8, 16, 32};
}

Image ToyBackend::target_image(const Condition& cond, int height, int width,
                               int channels) const {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("toy targets support 1 or 3 channels");
  }
  const ConditionKind kind = condition_kind(cond);

  const Vec3 color = targets_.flat_color_override.has_value()
                         ? *targets_.flat_color_override
                         : prompt_color(cond.prompt);
  const double flat[3] = {color.x, color.y, color.z};
  const double flat_mean = (flat[0] + flat[1] + flat[2]) / 3.0;

  if (kind == ConditionKind::Text) {
    Image target(height, width, channels);
    if (channels == 1 && targets_.loc_target.has_value()) {
      Image spatial = resize_bilinear(*targets_.loc_target, height, width);
      if (spatial.channels != 1) {
        throw std::invalid_argument("loc target must have one channel");
      }
      return spatial;
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < channels; ++c) {
          target.at(y, x, c) = channels == 1 ? flat_mean : flat[c];
        }
      }
    }
    return target;
  }

  // Reference image resized to the prediction size; 1-channel predictions
  // collapse it to the channel mean.
  Image ref = resize_bilinear(*cond.reference_image, height, width);
  Image target(height, width, channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (channels == 3) {
        for (int c = 0; c < 3; ++c) {
          target.at(y, x, c) = ref.at(y, x, c);
        }
      } else {
        target.at(y, x, 0) =
            (ref.at(y, x, 0) + ref.at(y, x, 1) + ref.at(y, x, 2)) / 3.0;
      }
    }
  }
  if (kind == ConditionKind::TextImage) {
    return target;
  }

  // Masked: M * I + (1 - M) * flat color at the full mask resolution.
  const Image& mask = cond.mask->full;
  if (mask.height != height || mask.width != width) {
    throw std::invalid_argument(
        "mask resolution does not match the prediction resolution");
  }
  for (int res : feature_layer_resolutions()) {
    // Keep the adapter contract honest: masked conditions must carry
    // every declared feature-layer level.
    cond.mask->level(res);
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double m = mask.at(y, x, 0);
      for (int c = 0; c < channels; ++c) {
        const double base = channels == 1 ? flat_mean : flat[c];
        target.at(y, x, c) = m * target.at(y, x, c) + (1.0 - m) * base;
      }
    }
  }
  return target;
}

Image ToyBackend::predict_noise(const Image& z_t, int t,
                                const Condition& cond) {
  const double ab = schedule_.alpha_bar(t);
  if (1.0 - ab < 1e-8) {
    // A backend refusal, not an API misuse: callers treat it as a skipped
    // optimization step rather than an abort.
    throw std::runtime_error(
        "timestep too close to the clean end of the schedule");
  }
  const Image target = target_image(cond, z_t.height, z_t.width, z_t.channels);
  const double s_signal = std::sqrt(ab);
  const double inv_s_noise = 1.0 / std::sqrt(1.0 - ab);
  Image eps_hat = z_t;
  for (size_t i = 0; i < eps_hat.data.size(); ++i) {
    eps_hat.data[i] = (z_t.data[i] - s_signal * target.data[i]) * inv_s_noise;
  }
  return eps_hat;
}

double timestep_weight(WeightKind kind, int t, const NoiseSchedule& schedule) {
  switch (kind) {
    case WeightKind::Constant:
      return 1.0;
    case WeightKind::OneMinusAlphaBar:
      return 1.0 - schedule.alpha_bar(t);
  }
  throw std::logic_error("unknown weight kind");
}

GuidanceGradient sds_grad(GuidanceBackend& backend, const Image& x,
                          const Condition& cond, int t, const Image& eps,
                          const NoiseSchedule& schedule,
                          WeightKind weight_kind) {
  const Image z_t = add_noise(x, t, eps, schedule);
  const Image eps_hat = backend.predict_noise(z_t, t, cond);
  if (eps_hat.height != x.height || eps_hat.width != x.width ||
      eps_hat.channels != x.channels) {
    throw std::runtime_error("backend returned a mismatched noise shape");
  }

  GuidanceGradient out;
  out.timestep = t;
  out.weight = timestep_weight(weight_kind, t, schedule);
  out.grad = Image(x.height, x.width, x.channels);
  double sq = 0.0;
  for (size_t i = 0; i < out.grad.data.size(); ++i) {
    const double g = out.weight * (eps_hat.data[i] - eps.data[i]);
    out.grad.data[i] = g;
    sq += g * g;
  }
  if (!std::isfinite(sq)) {
    throw std::runtime_error("non-finite guidance gradient");
  }
  out.grad_norm = std::sqrt(sq);
  if (cond.mask.has_value()) {
    const Image& full = cond.mask->full;
    double ones = 0.0;
    for (double v : full.data) {
      ones += v;
    }
    out.mask_coverage = ones / static_cast<double>(full.data.size());
  }
  return out;
}

}  // namespace pixbrush
