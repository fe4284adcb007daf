#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ascore/numerics/tensor.hpp"

namespace ascore::numerics {

struct Parameter {
  std::string name;  // dotted path, e.g. "encoder.conv3.weight"
  Tensor tensor;
};

// Ordered collection of named trainable tensors. Names are unique.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor tensor);
  void append(const ParameterSet& other);

  const Parameter* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;

  std::span<const Parameter> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void zero_grad();

 private:
  std::vector<Parameter> items_;
};

std::size_t count_parameters(std::span<const Parameter> params);
inline std::size_t count_parameters(const ParameterSet& params) {
  return count_parameters(params.items());
}

// FNV-1a over names, shapes and raw values; used to assert parameters are untouched.
std::uint64_t parameter_hash(std::span<const Parameter> params);

// He-uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng);
Tensor uniform(Shape shape, double low, double high, std::mt19937_64& rng,
               bool requires_grad = false);

}  // namespace ascore::numerics
