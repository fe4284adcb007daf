#include "ascore/numerics/adam.hpp"

#include <cmath>

#include "ascore/error.hpp"

namespace ascore::numerics {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.beta1 > 0.0 && config_.beta1 < 1.0) || !(config_.beta2 > 0.0 && config_.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in (0,1)");
  if (!(config_.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void Adam::step(ParameterSet& params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  const auto items = params.items();
  if (first_.empty()) {
    for (const auto& p : items) {
      first_.emplace_back(p.tensor.numel(), 0.0);
      second_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (first_.size() != items.size()) throw Error("Adam: parameter set changed between steps");
  for (const auto& p : items)
    if (!p.tensor.has_grad()) throw Error("Adam: missing gradient for parameter " + p.name);

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor tensor = items[i].tensor;
    if (first_[i].size() != tensor.numel())
      throw Error("Adam: moment buffer shape mismatch for " + items[i].name);
    auto value = tensor.mutable_data();
    const auto grad = tensor.grad();
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * grad[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace ascore::numerics
