#include "pixbrush/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace pixbrush {

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 1 || t > total_timesteps) {
    throw std::out_of_range("timestep outside [1, T]");
  }
  return alpha_bars[t - 1];
}

NoiseSchedule make_schedule(int total_timesteps, double beta_lo,
                            double beta_hi) {
  if (total_timesteps < 1) {
    throw std::invalid_argument("schedule needs at least one timestep");
  }
  if (!(beta_lo > 0.0) || !(beta_lo <= beta_hi) || !(beta_hi < 1.0)) {
    throw std::invalid_argument("betas must satisfy 0 < lo <= hi < 1");
  }
  NoiseSchedule schedule;
  schedule.total_timesteps = total_timesteps;
  schedule.betas.resize(total_timesteps);
  schedule.alpha_bars.resize(total_timesteps);
  double running = 1.0;
  for (int t = 1; t <= total_timesteps; ++t) {
    const double frac =
        total_timesteps == 1
            ? 0.0
            : static_cast<double>(t - 1) / (total_timesteps - 1);
    const double beta = beta_lo + (beta_hi - beta_lo) * frac;
    schedule.betas[t - 1] = beta;
    running *= 1.0 - beta;
    schedule.alpha_bars[t - 1] = running;
  }
  return schedule;
}

Image add_noise(const Image& x, int t, const Image& eps,
                const NoiseSchedule& schedule) {
  if (eps.height != x.height || eps.width != x.width ||
      eps.channels != x.channels) {
    throw std::invalid_argument("noise shape does not match signal shape");
  }
  const double ab = schedule.alpha_bar(t);
  const double s_signal = std::sqrt(ab);
  const double s_noise = std::sqrt(1.0 - ab);
  Image z = x;
  for (size_t i = 0; i < z.data.size(); ++i) {
    z.data[i] = s_signal * x.data[i] + s_noise * eps.data[i];
  }
  return z;
}

}  // namespace pixbrush
