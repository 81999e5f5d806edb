#pragma once

#include <string>
#include <vector>

#include "surgant/checkpoint.hpp"
#include "surgant/ops.hpp"
#include "surgant/rng.hpp"
#include "surgant/tensor.hpp"

namespace surgant {

/// Multi-head cross-attention from text tokens onto video context.
/// Per head h: query[h] is (model_dim x head_dim), key[h]/value[h] are
/// (video_dim x head_dim); `output` maps the concatenated heads back to model_dim.
struct CrossAttnParams {
  std::vector<Tensor> query;
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor output;
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;
  std::size_t model_dim = 0;
  std::size_t video_dim = 0;

  static CrossAttnParams random(std::size_t model_dim, std::size_t video_dim, std::size_t n_heads, Rng& rng);
  void validate() const;
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

// g_i = sigmoid(W_g x_i + b_g); weight is (model_dim x model_dim).
struct GateParams {
  Tensor weight;
  Tensor bias;

  // Small uniform weight and zero bias: gates start half open.
  static GateParams random(std::size_t model_dim, Rng& rng, double weight_scale = 0.01);
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

// tanh(x W1^T + b1) W2^T + b2 with hidden width expansion * model_dim.
struct FfnParams {
  Tensor up_weight, up_bias;
  Tensor down_weight, down_bias;

  static FfnParams random(std::size_t model_dim, std::size_t expansion, Rng& rng);
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

struct FusionParams {
  CrossAttnParams attention;
  GateParams gate;
  LayerNormParams gate_norm;
  FfnParams ffn;
  LayerNormParams output_norm;

  static FusionParams random(std::size_t model_dim, std::size_t video_dim, std::size_t n_heads,
                             std::size_t ffn_expansion, Rng& rng);
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

enum class GateMode {
  kLearned,
  // Gates pinned to exactly 0: the text stream never sees the video.
  kClosed,
};

struct CrossAttention {
  Tensor attended;                    // A: [L x model_dim]
  std::vector<Tensor> head_weights;   // per head [L x T]
};

struct GatedFusion {
  Tensor gates;   // [L x model_dim]
  Tensor gated;   // gates * A
  Tensor fused;   // LayerNorm(X_t + gated)
};

struct FusionState {
  Tensor video_context;   // H_v [T x H]
  Tensor attn_weights;    // [n_heads x L x T], detached copy for inspection
  Tensor attended;        // A
  Tensor gates;
  Tensor gated;
  Tensor text_fused;      // H_t
  Tensor fused;           // Z
};

CrossAttention cross_attend(Graph& g, const CrossAttnParams& p, const Tensor& text, const Tensor& video_context);

GatedFusion gate_and_fuse(Graph& g, const GateParams& gate, const LayerNormParams& norm, const Tensor& text,
                          const Tensor& attended, GateMode mode = GateMode::kLearned);

Tensor feed_forward(Graph& g, const FfnParams& p, const Tensor& x);

FusionState fusion_block(Graph& g, const FusionParams& p, const Tensor& text, const Tensor& video_context,
                         GateMode mode = GateMode::kLearned);

}  // namespace surgant
