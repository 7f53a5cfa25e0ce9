#include "cgt/optim.hpp"

#include <cmath>
#include <string>

#include "cgt/errors.hpp"

namespace cgt {

AdamState AdamState::init(const std::vector<Tensor>& params,
                          double beta1, double beta2, double epsilon) {
  AdamState state;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0);
    state.second_moment.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(state.first_moment.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw IncompleteGradientError("adam_step: parameter " + std::to_string(i) +
                                    " has no gradient buffer");
    }
    if (params[i].grad().size() != state.first_moment[i].size()) {
      throw ShapeError("adam_step: moment buffer " + std::to_string(i) +
                       " does not match parameter size");
    }
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data();
    const std::vector<double>& g = params[i].grad();
    std::vector<double>& m = state.first_moment[i];
    std::vector<double>& v = state.second_moment[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    params[i].zero_grad();
  }
}

}  // namespace cgt
