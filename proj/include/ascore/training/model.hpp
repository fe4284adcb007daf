#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "ascore/config.hpp"
#include "ascore/encoder/encoder.hpp"
#include "ascore/heads/heads.hpp"

namespace ascore::training {

enum class Mode { dense, sparse };

const char* mode_name(Mode mode);
Mode parse_mode(const std::string& text);

struct ModelConfig {
  encoder::EncoderConfig encoder = encoder::EncoderConfig::lite();
  // Hidden widths of Phi between D and the 3 outputs.
  std::vector<std::size_t> head_hidden = {512, 1024, 1024};
  Mode mode = Mode::dense;

  std::vector<std::size_t> head_widths() const;

  // Keys: variant (lite|big|tiny|custom), stages (8 numbers), extra_convs,
  // descriptor_dim, num_layers, num_heads, mlp_hidden_factor,
  // positional_encoding, head_hidden, mode. Unset keys keep the variant's
  // defaults.
  static ModelConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  static const std::set<std::string>& keys();
};

// Encoder and scene-coordinate head sharing one parameter set
// ("encoder.*" then "head.*").
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const encoder::Encoder& encoder() const { return encoder_; }
  const heads::MlpHead& head() const { return head_; }
  numerics::ParameterSet& parameters() { return params_; }
  const numerics::ParameterSet& parameters() const { return params_; }

  // Writes model.ascr and model.cfg into `dir` (created if missing).
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<Model> load(const std::filesystem::path& dir);

 private:
  ModelConfig config_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  encoder::Encoder encoder_;
  heads::MlpHead head_;
  numerics::ParameterSet params_;
};

}  // namespace ascore::training
