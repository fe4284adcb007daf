#pragma once

#include <cstddef>
#include <vector>

#include "ascore/numerics/parameters.hpp"

namespace ascore::numerics {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created lazily on the first step and
// bound positionally to the parameter set passed to step().
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Updates every parameter in place from its accumulated gradient.
  // Throws if any parameter has no gradient or lr <= 0.
  void step(ParameterSet& params, double lr);

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace ascore::numerics
