#include "surgant/decoder_lm.hpp"

#include <cmath>

#include "surgant/errors.hpp"
#include "surgant/vocab.hpp"

namespace surgant {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(data), true);
}

}  // namespace

void DecoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kFirstWordId)) throw ConfigError("decoder vocabulary has no words");
  if (model_dim < 2 || n_heads == 0 || model_dim % n_heads != 0) {
    throw ConfigError("decoder model dim " + std::to_string(model_dim) + " must split evenly into " +
                      std::to_string(n_heads) + " heads");
  }
  if (n_layers == 0 || max_len < 2 || mlp_expansion == 0) throw ConfigError("decoder depth, length and expansion must be positive");
}

DecoderLm DecoderLm::random(const DecoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t dm = config.model_dim, hidden = config.mlp_expansion * dm;
  DecoderLm lm;
  lm.config_ = config;
  lm.token_embedding_ = uniform_tensor({config.vocab_size, dm}, 0.1, rng);
  lm.position_embedding_ = uniform_tensor({config.max_len, dm}, 0.02, rng);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    const std::string name = "block" + std::to_string(i);
    lm.blocks_.push_back({LayerNormParams::identity(dm), AdaptableLinear::random(name + ".c_attn", dm, 3 * dm, rng),
                          AdaptableLinear::random(name + ".attn.c_proj", dm, dm, rng), LayerNormParams::identity(dm),
                          AdaptableLinear::random(name + ".mlp.c_fc", dm, hidden, rng),
                          AdaptableLinear::random(name + ".mlp.c_proj", hidden, dm, rng)});
  }
  lm.final_norm_ = LayerNormParams::identity(dm);
  if (config.zero_head_init)
    for (double& v : lm.final_norm_.gain.mutable_data()) v = 0.0;
  return lm;
}

void DecoderLm::enable_lora(const LoraConfig& config, Rng& rng) {
  for (auto& b : blocks_) {
    b.c_attn.enable_lora(config, rng);
    b.attn_proj.enable_lora(config, rng);
    b.mlp_proj.enable_lora(config, rng);
  }
}

Tensor DecoderLm::embed_tokens(Graph& g, std::span<const int> ids) const {
  return embedding_lookup(g, token_embedding_, ids);
}

Tensor DecoderLm::forward(Graph& g, const Tensor& prefix, std::span<const int> ids, const ForwardContext& ctx) const {
  const std::size_t dm = config_.model_dim;
  const std::size_t prefix_len = prefix.defined() ? prefix.rows() : 0;
  if (prefix.defined() && prefix.cols() != dm) {
    throw ShapeError("decoder prefix " + shape_to_string(prefix.shape()) + " vs model dim " + std::to_string(dm));
  }
  if (ids.empty()) throw ShapeError("decoder needs at least one token position");
  const std::size_t total = prefix_len + ids.size();
  if (total > config_.max_len) {
    throw LengthError("sequence of " + std::to_string(total) + " positions exceeds max length " +
                      std::to_string(config_.max_len));
  }

  Tensor tokens = embed_tokens(g, ids);
  Tensor x = prefix_len ? concat_rows(g, std::vector<Tensor>{prefix, tokens}) : tokens;
  x = add(g, x, slice_rows(g, position_embedding_, 0, total));

  const std::size_t heads = config_.n_heads, dh = dm / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& b : blocks_) {
    const Tensor qkv = b.c_attn.forward(g, layernorm(g, x, b.ln1), ctx);
    std::vector<Tensor> outs;
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor q = slice_cols(g, qkv, h * dh, (h + 1) * dh);
      const Tensor k = slice_cols(g, qkv, dm + h * dh, dm + (h + 1) * dh);
      const Tensor v = slice_cols(g, qkv, 2 * dm + h * dh, 2 * dm + (h + 1) * dh);
      const Tensor w = causal_softmax_rows(g, scale(g, matmul_nt(g, q, k), inv_sqrt));
      outs.push_back(matmul(g, w, v));
    }
    const Tensor attn = heads == 1 ? outs.front() : concat_cols(g, outs);
    x = add(g, x, b.attn_proj.forward(g, attn, ctx));
    const Tensor hidden = tanh(g, b.mlp_fc.forward(g, layernorm(g, x, b.ln2), ctx));
    x = add(g, x, b.mlp_proj.forward(g, hidden, ctx));
  }
  const Tensor tail = prefix_len ? slice_rows(g, x, prefix_len, total) : x;
  return matmul_nt(g, layernorm(g, tail, final_norm_), token_embedding_);
}

int argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t n = logits.cols();
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (logits.at(row, j) > logits.at(row, best)) best = j;
  return static_cast<int>(best);
}

std::vector<int> DecoderLm::generate_greedy(const Tensor& prefix, std::size_t max_new, int stop) const {
  if (max_new == 0) throw ConfigError("max_new must be at least 1");
  const std::size_t prefix_len = prefix.defined() ? prefix.rows() : 0;
  std::vector<int> seq{kBosId};
  std::vector<int> out;
  while (out.size() < max_new && prefix_len + seq.size() <= config_.max_len) {
    Graph g(false);
    const Tensor logits = forward(g, prefix, seq, {});
    const int next = argmax_row(logits, logits.rows() - 1);
    out.push_back(next);
    if (next == stop) break;
    seq.push_back(next);
  }
  return out;
}

std::vector<NamedTensor> DecoderLm::named(const std::string& prefix) const {
  std::vector<NamedTensor> out{{prefix + ".tok_emb", token_embedding_}, {prefix + ".pos_emb", position_embedding_}};
  auto add_linear = [&](const AdaptableLinear& l) {
    for (auto nt : l.named()) {
      nt.name = prefix + "." + nt.name;
      out.push_back(std::move(nt));
    }
  };
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string name = prefix + ".block" + std::to_string(i);
    out.push_back({name + ".ln1.gain", b.ln1.gain});
    out.push_back({name + ".ln1.bias", b.ln1.bias});
    add_linear(b.c_attn);
    add_linear(b.attn_proj);
    out.push_back({name + ".ln2.gain", b.ln2.gain});
    out.push_back({name + ".ln2.bias", b.ln2.bias});
    add_linear(b.mlp_fc);
    add_linear(b.mlp_proj);
  }
  out.push_back({prefix + ".ln_f.gain", final_norm_.gain});
  out.push_back({prefix + ".ln_f.bias", final_norm_.bias});
  return out;
}

TeacherForcing teacher_forcing(std::span<const int> answer_ids) {
  TeacherForcing tf;
  tf.inputs.push_back(kBosId);
  tf.inputs.insert(tf.inputs.end(), answer_ids.begin(), answer_ids.end());
  tf.targets.assign(answer_ids.begin(), answer_ids.end());
  tf.targets.push_back(kEosId);
  return tf;
}

}  // namespace surgant
