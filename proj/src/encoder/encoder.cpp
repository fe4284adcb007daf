#include "ascore/encoder/encoder.hpp"

#include <cmath>

#include "ascore/error.hpp"
#include "ascore/numerics/ops.hpp"

namespace ascore::encoder {

namespace ops = numerics;

namespace {

// U(-sqrt(3/fan_in), sqrt(3/fan_in)) for layers not followed by a ReLU.
Tensor lecun_uniform(numerics::Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  return numerics::uniform(std::move(shape), -bound, bound, rng, true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

// [D, rows, cols] -> [rows*cols, D], row-major over cells.
Tensor to_tokens(const Tensor& map) {
  const std::size_t d = map.dim(0);
  return ops::transpose(ops::reshape(map, {d, map.dim(1) * map.dim(2)}));
}

Tensor from_tokens(const Tensor& tokens, std::size_t rows, std::size_t cols) {
  return ops::reshape(ops::transpose(tokens), {tokens.dim(1), rows, cols});
}

}  // namespace

EncoderConfig EncoderConfig::lite() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::big() {
  EncoderConfig c;
  c.variant = Variant::big;
  c.extra_convs = {512, 512};
  c.descriptor_dim = 512;
  return c;
}

EncoderConfig EncoderConfig::tiny() {
  EncoderConfig c;
  c.variant = Variant::custom;
  c.stages = {{8, 8}, {16, 16}, {32, 32}, {64, 64}};
  c.descriptor_dim = 64;
  c.num_layers = 2;
  c.num_heads = 2;
  return c;
}

void EncoderConfig::validate() const {
  if (input_channels == 0) throw ConfigError("encoder: input_channels must be positive");
  if (stages.size() != 4) throw ConfigError("encoder: exactly four conv stages are required");
  for (const auto& s : stages)
    if (s[0] == 0 || s[1] == 0) throw ConfigError("encoder: stage widths must be positive");
  for (std::size_t c : extra_convs)
    if (c == 0) throw ConfigError("encoder: extra conv widths must be positive");
  if (descriptor_dim == 0) throw ConfigError("encoder: descriptor_dim must be positive");
  if (num_heads == 0 || descriptor_dim % num_heads != 0)
    throw ConfigError("encoder: descriptor_dim " + std::to_string(descriptor_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  if (num_layers == 0) throw ConfigError("encoder: num_layers must be at least 1");
  if (mlp_hidden_factor == 0) throw ConfigError("encoder: mlp_hidden_factor must be positive");
  if (positional_encoding && descriptor_dim % 4 != 0)
    throw ConfigError("encoder: positional encoding needs descriptor_dim divisible by 4");
}

FeatureExtractor::FeatureExtractor(const EncoderConfig& config, std::mt19937_64& rng,
                                   ParameterSet& params, const std::string& prefix)
    : input_channels_(config.input_channels) {
  config.validate();
  std::size_t in = config.input_channels;
  auto add_conv = [&](std::size_t out, std::size_t k, bool relu, bool pool) {
    const std::size_t idx = convs_.size();
    const std::size_t fan_in = in * k * k;
    Conv c;
    c.weight = params.add(prefix + "conv" + std::to_string(idx) + ".weight",
                          relu ? numerics::he_uniform({out, in, k, k}, fan_in, rng)
                               : lecun_uniform({out, in, k, k}, fan_in, rng));
    c.bias = params.add(prefix + "conv" + std::to_string(idx) + ".bias", zero_bias(out));
    c.padding = k / 2;
    c.relu = relu;
    c.pool_after = pool;
    convs_.push_back(std::move(c));
    in = out;
  };
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    add_conv(config.stages[s][0], 3, true, false);
    add_conv(config.stages[s][1], 3, true, s + 1 < config.stages.size());
  }
  for (std::size_t c : config.extra_convs) add_conv(c, 3, true, false);
  add_conv(config.descriptor_dim, 1, false, false);
}

DescriptorMap FeatureExtractor::operator()(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != input_channels_)
    throw ShapeError("extract_features: expected [" + std::to_string(input_channels_) +
                     ",H,W] image, got " + numerics::shape_string(image.shape()));
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  if (h % 8 != 0 || w % 8 != 0)
    throw ShapeError("extract_features: image size " + std::to_string(h) + "x" +
                     std::to_string(w) + " is not divisible by 8");
  // Centre pixel intensities around zero.
  Tensor x = ops::add_constant(image, Tensor::full(image.shape(), -0.5));
  for (const Conv& c : convs_) {
    x = ops::conv2d(x, c.weight, c.bias, 1, c.padding);
    if (c.relu) x = ops::relu(x);
    if (c.pool_after) x = ops::maxpool2x2(x);
  }
  return {x, h, w};
}

AttentionLayerParams AttentionLayerParams::create(std::size_t dim, std::size_t hidden,
                                                  std::mt19937_64& rng, ParameterSet& params,
                                                  const std::string& prefix) {
  AttentionLayerParams p;
  auto proj = [&](const std::string& name, std::size_t out, std::size_t in, bool relu,
                  Tensor& w, Tensor& b) {
    w = params.add(prefix + name + ".weight", relu ? numerics::he_uniform({out, in}, in, rng)
                                                  : lecun_uniform({out, in}, in, rng));
    b = params.add(prefix + name + ".bias", zero_bias(out));
  };
  proj("query", dim, dim, false, p.query_w, p.query_b);
  p.key_w = params.add(prefix + "key.weight", lecun_uniform({dim, dim}, dim, rng));
  proj("value", dim, dim, false, p.value_w, p.value_b);
  proj("out", dim, dim, false, p.out_w, p.out_b);
  proj("mlp1", hidden, 2 * dim, true, p.mlp1_w, p.mlp1_b);
  proj("mlp2", dim, hidden, false, p.mlp2_w, p.mlp2_b);
  return p;
}

Tensor multi_head_attention(const Tensor& states, const AttentionLayerParams& p,
                            std::size_t num_heads, std::vector<Tensor>* retained) {
  if (states.rank() != 2) throw ShapeError("multi_head_attention: states must be [N, D]");
  const std::size_t dim = states.dim(1);
  if (num_heads == 0 || dim % num_heads != 0)
    throw ConfigError("multi_head_attention: D not divisible by h");
  const std::size_t width = dim / num_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));

  const Tensor q = ops::linear(states, p.query_w, p.query_b);
  const Tensor k = ops::matmul_nt(states, p.key_w);
  const Tensor v = ops::linear(states, p.value_w, p.value_b);

  Tensor merged;
  for (std::size_t head = 0; head < num_heads; ++head) {
    const std::size_t start = head * width;
    const Tensor qh = num_heads == 1 ? q : ops::slice(q, 1, start, width);
    const Tensor kh = num_heads == 1 ? k : ops::slice(k, 1, start, width);
    const Tensor vh = num_heads == 1 ? v : ops::slice(v, 1, start, width);
    const Tensor scores = ops::softmax(ops::scale(ops::matmul_nt(qh, kh), scale), 1);
    if (retained != nullptr) retained->push_back(scores.detach());
    const Tensor out = ops::matmul(scores, vh);
    merged = head == 0 ? out : ops::concat(merged, out, 1);
  }
  return ops::linear(merged, p.out_w, p.out_b);
}

Tensor attention_layer(const Tensor& states, const AttentionLayerParams& p, std::size_t num_heads,
                       std::vector<Tensor>* retained) {
  if (states.rank() != 2 || states.dim(0) == 0)
    throw ShapeError("attention_layer: states must be [N, D] with N >= 1");
  const Tensor message = multi_head_attention(states, p, num_heads, retained);
  const Tensor hidden = ops::relu(ops::linear(ops::concat(states, message, 1), p.mlp1_w, p.mlp1_b));
  return ops::add(states, ops::linear(hidden, p.mlp2_w, p.mlp2_b));
}

Tensor positional_encoding(std::size_t rows, std::size_t cols, std::size_t dim) {
  if (dim % 4 != 0) throw ConfigError("positional_encoding: D must be divisible by 4");
  const std::size_t quarter = dim / 4;
  std::vector<double> data(rows * cols * dim);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double* row = &data[(r * cols + c) * dim];
      for (std::size_t i = 0; i < quarter; ++i) {
        const double freq =
            std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(quarter));
        row[i] = std::sin(static_cast<double>(r) * freq);
        row[quarter + i] = std::cos(static_cast<double>(r) * freq);
        row[2 * quarter + i] = std::sin(static_cast<double>(c) * freq);
        row[3 * quarter + i] = std::cos(static_cast<double>(c) * freq);
      }
    }
  return Tensor::from_data({rows * cols, dim}, std::move(data));
}

FeatureTransformer::FeatureTransformer(const EncoderConfig& config, std::mt19937_64& rng,
                                       ParameterSet& params, const std::string& prefix)
    : dim_(config.descriptor_dim),
      heads_(config.num_heads),
      positional_(config.positional_encoding) {
  config.validate();
  for (std::size_t l = 0; l < config.num_layers; ++l)
    layers_.push_back(AttentionLayerParams::create(dim_, config.mlp_hidden_factor * dim_, rng,
                                                   params, prefix + "attn" + std::to_string(l) + "."));
}

Tensor FeatureTransformer::transform_states(const Tensor& states,
                                            std::vector<std::vector<Tensor>>* retained) const {
  if (states.rank() != 2 || states.dim(1) != dim_)
    throw ShapeError("transform: expected [N, " + std::to_string(dim_) + "] states, got " +
                     numerics::shape_string(states.shape()));
  Tensor s = states;
  for (const auto& layer : layers_) {
    std::vector<Tensor>* keep = nullptr;
    if (retained != nullptr) keep = &retained->emplace_back();
    s = attention_layer(s, layer, heads_, keep);
  }
  return s;
}

AttentionFeatureMap FeatureTransformer::operator()(const DescriptorMap& map,
                                                   bool retain_attention) const {
  const Tensor& data = map.data;
  if (data.rank() != 3 || data.dim(0) != dim_)
    throw ShapeError("transform: descriptor map must be [" + std::to_string(dim_) + ",h,w], got " +
                     numerics::shape_string(data.shape()));
  const std::size_t rows = data.dim(1);
  const std::size_t cols = data.dim(2);
  Tensor tokens = to_tokens(data);
  if (positional_) tokens = ops::add_constant(tokens, positional_encoding(rows, cols, dim_));

  AttentionFeatureMap out;
  out.image_height = map.image_height;
  out.image_width = map.image_width;
  out.data = from_tokens(transform_states(tokens, retain_attention ? &out.attention : nullptr),
                         rows, cols);
  return out;
}

Encoder::Encoder(const EncoderConfig& config, std::mt19937_64& rng)
    : config_(config),
      extractor_(config, rng, params_, "encoder."),
      backbone_count_(numerics::count_parameters(params_)),
      transformer_(config, rng, params_, "encoder.") {}

}  // namespace ascore::encoder
