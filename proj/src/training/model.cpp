#include "ascore/training/model.hpp"

#include "ascore/error.hpp"
#include "ascore/numerics/checkpoint.hpp"

namespace ascore::training {

const char* mode_name(Mode mode) { return mode == Mode::dense ? "dense" : "sparse"; }

Mode parse_mode(const std::string& text) {
  if (text == "dense") return Mode::dense;
  if (text == "sparse") return Mode::sparse;
  throw ConfigError("unknown mode '" + text + "' (expected dense or sparse)");
}

std::vector<std::size_t> ModelConfig::head_widths() const {
  std::vector<std::size_t> w = {encoder.descriptor_dim};
  w.insert(w.end(), head_hidden.begin(), head_hidden.end());
  w.push_back(3);
  return w;
}

const std::set<std::string>& ModelConfig::keys() {
  static const std::set<std::string> k = {
      "variant",   "stages",           "extra_convs",         "descriptor_dim", "num_layers",
      "num_heads", "mlp_hidden_factor", "positional_encoding", "head_hidden",    "mode"};
  return k;
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg) {
  ModelConfig m;
  const std::string variant = cfg.get_string("variant", "lite");
  if (variant == "lite" || variant == "custom")
    m.encoder = encoder::EncoderConfig::lite();
  else if (variant == "big")
    m.encoder = encoder::EncoderConfig::big();
  else if (variant == "tiny")
    m.encoder = encoder::EncoderConfig::tiny();
  else
    throw ConfigError("unknown encoder variant '" + variant + "'");
  if (variant == "custom") m.encoder.variant = encoder::Variant::custom;

  auto& e = m.encoder;
  if (cfg.has("stages")) {
    const auto s = cfg.get_sizes("stages", {});
    if (s.size() != 8) throw ConfigError("stages needs 8 widths (two per stage)");
    e.stages = {{s[0], s[1]}, {s[2], s[3]}, {s[4], s[5]}, {s[6], s[7]}};
  }
  e.extra_convs = cfg.get_sizes("extra_convs", e.extra_convs);
  e.descriptor_dim = cfg.get_size("descriptor_dim", e.descriptor_dim);
  e.num_layers = cfg.get_size("num_layers", e.num_layers);
  e.num_heads = cfg.get_size("num_heads", e.num_heads);
  e.mlp_hidden_factor = cfg.get_size("mlp_hidden_factor", e.mlp_hidden_factor);
  e.positional_encoding = cfg.get_bool("positional_encoding", e.positional_encoding);
  m.head_hidden = cfg.get_sizes("head_hidden", m.head_hidden);
  m.mode = parse_mode(cfg.get_string("mode", "dense"));
  e.validate();
  return m;
}

KeyValueConfig ModelConfig::to_config() const {
  KeyValueConfig c;
  const char* variant = encoder.variant == encoder::Variant::lite  ? "lite"
                        : encoder.variant == encoder::Variant::big ? "big"
                                                                   : "custom";
  c.set("variant", variant);
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
  };
  std::vector<std::size_t> stages;
  for (const auto& s : encoder.stages) stages.insert(stages.end(), s.begin(), s.end());
  c.set("stages", join(stages));
  c.set("extra_convs", join(encoder.extra_convs));
  c.set("descriptor_dim", encoder.descriptor_dim);
  c.set("num_layers", encoder.num_layers);
  c.set("num_heads", encoder.num_heads);
  c.set("mlp_hidden_factor", encoder.mlp_hidden_factor);
  c.set("positional_encoding", encoder.positional_encoding);
  c.set("head_hidden", join(head_hidden));
  c.set("mode", mode_name(mode));
  return c;
}

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      rng_(seed),
      encoder_(config.encoder, rng_),
      head_(config.head_widths(), rng_, "head.") {
  params_.append(encoder_.parameters());
  params_.append(head_.parameters());
}

void Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  numerics::save_checkpoint(dir / "model.ascr", params_);
  KeyValueConfig c = config_.to_config();
  c.set("seed", static_cast<std::int64_t>(seed_));
  c.save(dir / "model.cfg");
}

std::unique_ptr<Model> Model::load(const std::filesystem::path& dir) {
  KeyValueConfig c = KeyValueConfig::load(dir / "model.cfg");
  auto known = ModelConfig::keys();
  known.insert("seed");
  c.require_known(known);
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
  auto model = std::make_unique<Model>(ModelConfig::from_config(c), seed);
  numerics::load_checkpoint(dir / "model.ascr", model->params_);
  return model;
}

}  // namespace ascore::training
