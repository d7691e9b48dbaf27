#pragma once

#include <vector>

#include "pixbrush/image.hpp"

namespace pixbrush {

// Forward-diffusion schedule. Timesteps are 1-based: t in [1, T], with
// alpha_bar(t) = prod_{s<=t} (1 - beta_s).
struct NoiseSchedule {
  int total_timesteps = 0;
  std::vector<double> betas;       // betas[t-1] for timestep t
  std::vector<double> alpha_bars;  // alpha_bars[t-1] for timestep t

  double alpha_bar(int t) const;   // throws when t is outside [1, T]
};

// Linear beta ramp from beta_lo (t=1) to beta_hi (t=T).
// Requires 0 < beta_lo <= beta_hi < 1 and T >= 1.
NoiseSchedule make_schedule(int total_timesteps, double beta_lo,
                            double beta_hi);

// z_t = sqrt(alpha_bar_t) * x + sqrt(1 - alpha_bar_t) * eps.
// eps must match x's shape; t must be in [1, T].
Image add_noise(const Image& x, int t, const Image& eps,
                const NoiseSchedule& schedule);

}  // namespace pixbrush
