#include "ascore/numerics/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ascore/error.hpp"

namespace ascore::numerics {

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) throw Error("duplicate parameter name: " + name);
  items_.push_back({std::move(name), std::move(tensor)});
  return items_.back().tensor;
}

void ParameterSet::append(const ParameterSet& other) {
  for (const auto& p : other.items()) add(p.name, p.tensor);
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = std::find_if(items_.begin(), items_.end(),
                         [&](const Parameter& p) { return p.name == name; });
  return it == items_.end() ? nullptr : &*it;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw Error("unknown parameter: " + name);
  return p->tensor;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

std::size_t count_parameters(std::span<const Parameter> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

std::uint64_t parameter_hash(std::span<const Parameter> params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* bytes, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    for (std::size_t d : p.tensor.shape()) mix(&d, sizeof d);
    const auto data = p.tensor.data();
    mix(data.data(), data.size_bytes());
  }
  return h;
}

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  return uniform(std::move(shape), -bound, bound, rng, true);
}

Tensor uniform(Shape shape, double low, double high, std::mt19937_64& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(low, high);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace ascore::numerics
