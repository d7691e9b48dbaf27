#pragma once

#include <cstdint>
#include <vector>

namespace pixbrush {

// Adaptive moment estimation with bias correction. Moments are lazily
// sized on the first step so a default-constructed state is valid for
// any parameter vector.
struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  int64_t steps = 0;
};

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One in-place update: params -= lr * m_hat / (sqrt(v_hat) + eps).
// grad must match params in length.
void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grad, const AdamHyper& hyper);

}  // namespace pixbrush
