#include "surgant/gated_fusion.hpp"

#include <cmath>

#include "surgant/errors.hpp"

namespace surgant {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(data), true);
}

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

CrossAttnParams CrossAttnParams::random(std::size_t model_dim, std::size_t video_dim, std::size_t n_heads,
                                        Rng& rng) {
  if (n_heads == 0 || model_dim % n_heads != 0) {
    throw ConfigError("model dim " + std::to_string(model_dim) + " is not divisible into " +
                      std::to_string(n_heads) + " heads");
  }
  CrossAttnParams p;
  p.n_heads = n_heads;
  p.head_dim = model_dim / n_heads;
  p.model_dim = model_dim;
  p.video_dim = video_dim;
  for (std::size_t h = 0; h < n_heads; ++h) {
    p.query.push_back(uniform_tensor({model_dim, p.head_dim}, fan_in_bound(model_dim), rng));
    p.key.push_back(uniform_tensor({video_dim, p.head_dim}, fan_in_bound(video_dim), rng));
    p.value.push_back(uniform_tensor({video_dim, p.head_dim}, fan_in_bound(video_dim), rng));
  }
  p.output = uniform_tensor({model_dim, model_dim}, fan_in_bound(model_dim), rng);
  return p;
}

void CrossAttnParams::validate() const {
  if (head_dim == 0) throw ConfigError("cross-attention head dim d_k must be positive");
  if (n_heads == 0 || n_heads * head_dim != model_dim) {
    throw ConfigError("n_heads * d_k = " + std::to_string(n_heads * head_dim) + " differs from model dim " +
                      std::to_string(model_dim));
  }
  if (query.size() != n_heads || key.size() != n_heads || value.size() != n_heads) {
    throw ConfigError("cross-attention needs one Q/K/V projection per head");
  }
  for (std::size_t h = 0; h < n_heads; ++h) {
    if (query[h].shape() != Shape{model_dim, head_dim} || key[h].shape() != Shape{video_dim, head_dim} ||
        value[h].shape() != Shape{video_dim, head_dim}) {
      throw ConfigError("head " + std::to_string(h) + " projection shapes disagree with d_k = " +
                        std::to_string(head_dim));
    }
  }
  if (output.shape() != Shape{n_heads * head_dim, model_dim}) {
    throw ConfigError("output projection must be " + shape_to_string({n_heads * head_dim, model_dim}));
  }
}

std::vector<NamedTensor> CrossAttnParams::named(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::string head = prefix + ".head" + std::to_string(h);
    out.push_back({head + ".W_Q", query[h]});
    out.push_back({head + ".W_K", key[h]});
    out.push_back({head + ".W_V", value[h]});
  }
  out.push_back({prefix + ".W_O", output});
  return out;
}

GateParams GateParams::random(std::size_t model_dim, Rng& rng, double weight_scale) {
  return {uniform_tensor({model_dim, model_dim}, weight_scale, rng), Tensor::zeros({model_dim}, true)};
}

std::vector<NamedTensor> GateParams::named(const std::string& prefix) const {
  return {{prefix + ".W_g", weight}, {prefix + ".b_g", bias}};
}

FfnParams FfnParams::random(std::size_t model_dim, std::size_t expansion, Rng& rng) {
  const std::size_t hidden = expansion * model_dim;
  FfnParams p;
  p.up_weight = uniform_tensor({hidden, model_dim}, fan_in_bound(model_dim), rng);
  p.up_bias = Tensor::zeros({hidden}, true);
  p.down_weight = uniform_tensor({model_dim, hidden}, fan_in_bound(hidden), rng);
  p.down_bias = Tensor::zeros({model_dim}, true);
  return p;
}

std::vector<NamedTensor> FfnParams::named(const std::string& prefix) const {
  return {{prefix + ".W1", up_weight}, {prefix + ".b1", up_bias}, {prefix + ".W2", down_weight}, {prefix + ".b2", down_bias}};
}

FusionParams FusionParams::random(std::size_t model_dim, std::size_t video_dim, std::size_t n_heads,
                                  std::size_t ffn_expansion, Rng& rng) {
  FusionParams p;
  p.attention = CrossAttnParams::random(model_dim, video_dim, n_heads, rng);
  p.gate = GateParams::random(model_dim, rng);
  p.gate_norm = LayerNormParams::identity(model_dim);
  p.ffn = FfnParams::random(model_dim, ffn_expansion, rng);
  p.output_norm = LayerNormParams::identity(model_dim);
  return p;
}

std::vector<NamedTensor> FusionParams::named(const std::string& prefix) const {
  auto out = attention.named(prefix + ".attn");
  for (auto& nt : gate.named(prefix + ".gate")) out.push_back(nt);
  out.push_back({prefix + ".ln1.gain", gate_norm.gain});
  out.push_back({prefix + ".ln1.bias", gate_norm.bias});
  for (auto& nt : ffn.named(prefix + ".ffn")) out.push_back(nt);
  out.push_back({prefix + ".ln2.gain", output_norm.gain});
  out.push_back({prefix + ".ln2.bias", output_norm.bias});
  return out;
}

CrossAttention cross_attend(Graph& g, const CrossAttnParams& p, const Tensor& text, const Tensor& video_context) {
  p.validate();
  if (text.rank() != 2 || text.cols() != p.model_dim) {
    throw ShapeError("cross_attend: text " + shape_to_string(text.shape()) + " vs model dim " +
                     std::to_string(p.model_dim));
  }
  if (video_context.rank() != 2 || video_context.cols() != p.video_dim) {
    throw ShapeError("cross_attend: video context " + shape_to_string(video_context.shape()) + " vs video dim " +
                     std::to_string(p.video_dim));
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.head_dim));
  CrossAttention result;
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const Tensor q = matmul(g, text, p.query[h]);
    const Tensor k = matmul(g, video_context, p.key[h]);
    const Tensor v = matmul(g, video_context, p.value[h]);
    const Tensor weights = softmax_rows(g, scale(g, matmul_nt(g, q, k), inv_sqrt_dk));
    result.head_weights.push_back(weights);
    heads.push_back(matmul(g, weights, v));
  }
  const Tensor joined = p.n_heads == 1 ? heads.front() : concat_cols(g, heads);
  result.attended = matmul(g, joined, p.output);
  return result;
}

GatedFusion gate_and_fuse(Graph& g, const GateParams& gate, const LayerNormParams& norm, const Tensor& text,
                          const Tensor& attended, GateMode mode) {
  if (text.shape() != attended.shape()) {
    throw ShapeError("gate_and_fuse: text " + shape_to_string(text.shape()) + " vs attended " +
                     shape_to_string(attended.shape()));
  }
  GatedFusion out;
  if (mode == GateMode::kClosed) {
    out.gates = Tensor::zeros(text.shape());
  } else {
    out.gates = sigmoid(g, linear(g, text, gate.weight, &gate.bias));
  }
  out.gated = mul(g, out.gates, attended);
  out.fused = layernorm(g, add(g, text, out.gated), norm);
  return out;
}

Tensor feed_forward(Graph& g, const FfnParams& p, const Tensor& x) {
  return linear(g, tanh(g, linear(g, x, p.up_weight, &p.up_bias)), p.down_weight, &p.down_bias);
}

FusionState fusion_block(Graph& g, const FusionParams& p, const Tensor& text, const Tensor& video_context,
                         GateMode mode) {
  const CrossAttention attn = cross_attend(g, p.attention, text, video_context);
  const GatedFusion gated = gate_and_fuse(g, p.gate, p.gate_norm, text, attn.attended, mode);
  FusionState state;
  state.video_context = video_context;
  state.attended = attn.attended;
  state.gates = gated.gates;
  state.gated = gated.gated;
  state.text_fused = gated.fused;
  state.fused = layernorm(g, add(g, gated.fused, feed_forward(g, p.ffn, gated.fused)), p.output_norm);

  const std::size_t tokens = text.rows(), frames = video_context.rows();
  std::vector<double> weights;
  weights.reserve(p.attention.n_heads * tokens * frames);
  for (const Tensor& w : attn.head_weights) weights.insert(weights.end(), w.data().begin(), w.data().end());
  state.attn_weights = Tensor({p.attention.n_heads, tokens, frames}, std::move(weights));
  return state;
}

}  // namespace surgant
