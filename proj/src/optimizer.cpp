#include "pixbrush/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace pixbrush {

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grad, const AdamHyper& hyper) {
  if (grad.size() != params.size()) {
    throw std::invalid_argument("gradient length does not match parameters");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
  state.steps += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.steps));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.steps));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

}  // namespace pixbrush
