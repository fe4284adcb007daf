#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ascore/numerics/parameters.hpp"
#include "ascore/numerics/tensor.hpp"

namespace ascore::encoder {

using numerics::ParameterSet;
using numerics::Tensor;

enum class Variant { lite, big, custom };

struct EncoderConfig {
  Variant variant = Variant::lite;
  std::size_t input_channels = 3;
  // Four stages of two 3x3 convs; 2x2 max pooling after each of the first three.
  std::vector<std::array<std::size_t, 2>> stages = {{64, 64}, {64, 64}, {128, 128}, {256, 256}};
  // Extra 3x3 convs after the last stage (the big variant widens to 512 here).
  std::vector<std::size_t> extra_convs;
  std::size_t descriptor_dim = 256;  // D, width of the final 1x1 projection
  std::size_t num_layers = 5;        // L
  std::size_t num_heads = 4;         // h
  std::size_t mlp_hidden_factor = 2;  // update MLP is 2D -> factor*D -> D
  bool positional_encoding = true;

  static EncoderConfig lite();
  static EncoderConfig big();
  // Desk-scale config used for fast end-to-end runs (D=64, L=2, h=2).
  static EncoderConfig tiny();

  // Throws ConfigError (e.g. D not divisible by h, L == 0).
  void validate() const;
};

// H^C: [D, H/8, W/8] descriptor grid.
struct DescriptorMap {
  Tensor data;
  std::size_t image_height = 0;
  std::size_t image_width = 0;

  std::size_t grid_height() const { return data.dim(1); }
  std::size_t grid_width() const { return data.dim(2); }
};

// H^T: same shape as the descriptor map. `attention[l][h]` holds the
// row-stochastic [N_H, N_H] score matrix of head h in layer l when retained.
struct AttentionFeatureMap {
  Tensor data;
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::vector<std::vector<Tensor>> attention;

  std::size_t grid_height() const { return data.dim(1); }
  std::size_t grid_width() const { return data.dim(2); }
};

// Convolutional feature extractor F_c.
class FeatureExtractor {
 public:
  FeatureExtractor(const EncoderConfig& config, std::mt19937_64& rng, ParameterSet& params,
                   const std::string& prefix);

  // image [C,H,W] with H, W divisible by 8 and values in [0,1].
  DescriptorMap operator()(const Tensor& image) const;

 private:
  struct Conv {
    Tensor weight;
    Tensor bias;
    std::size_t padding = 0;
    bool relu = true;
    bool pool_after = false;
  };
  std::size_t input_channels_;
  std::vector<Conv> convs_;
};

// Parameters of one transformer layer.
struct AttentionLayerParams {
  Tensor query_w, query_b;
  // No key bias: it shifts each softmax row by a constant and never
  // receives gradient.
  Tensor key_w;
  Tensor value_w, value_b;  // message projection
  Tensor out_w, out_b;
  Tensor mlp1_w, mlp1_b;  // [hidden, 2D]
  Tensor mlp2_w, mlp2_b;  // [D, hidden]

  static AttentionLayerParams create(std::size_t dim, std::size_t hidden, std::mt19937_64& rng,
                                     ParameterSet& params, const std::string& prefix);
};

// Multi-head self-attention over states [N, D]: per head, scores
// softmax_n(q_k . k_n / sqrt(D/h)) weight the message vectors; heads are
// concatenated and projected back to D. When `retained` is non-null the
// detached score matrices are appended to it, one per head.
Tensor multi_head_attention(const Tensor& states, const AttentionLayerParams& p,
                            std::size_t num_heads, std::vector<Tensor>* retained = nullptr);

// s' = s + MLP([s | attention(s)])
Tensor attention_layer(const Tensor& states, const AttentionLayerParams& p, std::size_t num_heads,
                       std::vector<Tensor>* retained = nullptr);

// Fixed 2D sinusoidal code [rows*cols, D]; D must be divisible by 4.
Tensor positional_encoding(std::size_t rows, std::size_t cols, std::size_t dim);

// Feature transformer F_t.
class FeatureTransformer {
 public:
  FeatureTransformer(const EncoderConfig& config, std::mt19937_64& rng, ParameterSet& params,
                     const std::string& prefix);

  AttentionFeatureMap operator()(const DescriptorMap& map, bool retain_attention = false) const;

  // Token-level form used by tests: states [N, D] -> [N, D], no positional code.
  Tensor transform_states(const Tensor& states, std::vector<std::vector<Tensor>>* retained) const;

  const std::vector<AttentionLayerParams>& layers() const { return layers_; }

 private:
  std::size_t dim_;
  std::size_t heads_;
  bool positional_;
  std::vector<AttentionLayerParams> layers_;
};

// F_c followed by F_t. Parameters are registered under "encoder.".
class Encoder {
 public:
  Encoder(const EncoderConfig& config, std::mt19937_64& rng);

  DescriptorMap extract_features(const Tensor& image) const { return extractor_(image); }
  AttentionFeatureMap transform(const DescriptorMap& map, bool retain_attention = false) const {
    return transformer_(map, retain_attention);
  }
  AttentionFeatureMap operator()(const Tensor& image, bool retain_attention = false) const {
    return transform(extract_features(image), retain_attention);
  }

  const EncoderConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  // Parameters of F_c alone.
  std::size_t backbone_parameter_count() const { return backbone_count_; }

 private:
  EncoderConfig config_;
  ParameterSet params_;
  FeatureExtractor extractor_;
  std::size_t backbone_count_;
  FeatureTransformer transformer_;
};

}  // namespace ascore::encoder
