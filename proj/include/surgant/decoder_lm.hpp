#pragma once

#include <span>
#include <vector>

#include "surgant/checkpoint.hpp"
#include "surgant/lora.hpp"
#include "surgant/ops.hpp"
#include "surgant/rng.hpp"
#include "surgant/tensor.hpp"
#include "surgant/vocab.hpp"

namespace surgant {

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t model_dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_len = 128;
  std::size_t mlp_expansion = 4;
  // Start the final norm gain at 0 so the tied head emits uniform logits.
  bool zero_head_init = true;

  void validate() const;
};

struct DecoderBlock {
  LayerNormParams ln1;
  AdaptableLinear c_attn;     // model_dim -> 3 * model_dim (q, k, v)
  AdaptableLinear attn_proj;  // model_dim -> model_dim
  LayerNormParams ln2;
  AdaptableLinear mlp_fc;     // model_dim -> expansion * model_dim, tanh
  AdaptableLinear mlp_proj;   // expansion * model_dim -> model_dim
};

/// Small pre-norm causal transformer whose output head reuses the token
/// embedding table. A conditioning prefix of model_dim vectors can be placed
/// before the token positions.
class DecoderLm {
 public:
  static DecoderLm random(const DecoderConfig& config, Rng& rng);

  const DecoderConfig& config() const { return config_; }
  const Tensor& token_embedding() const { return token_embedding_; }
  const Tensor& position_embedding() const { return position_embedding_; }
  std::vector<DecoderBlock>& blocks() { return blocks_; }
  const std::vector<DecoderBlock>& blocks() const { return blocks_; }
  const LayerNormParams& final_norm() const { return final_norm_; }

  // Wraps c_attn, attn_proj and mlp_proj of every block.
  void enable_lora(const LoraConfig& config, Rng& rng);

  Tensor embed_tokens(Graph& g, std::span<const int> ids) const;

  // Logits [ids.size() x vocab] for the token positions that follow `prefix`
  // (which may be undefined for an empty prefix). Throws LengthError when the
  // prefix plus tokens exceed max_len.
  Tensor forward(Graph& g, const Tensor& prefix, std::span<const int> ids, const ForwardContext& ctx) const;

  // Greedy continuation after BOS: argmax with lowest-id tie-break, stopping
  // after EOS (included in the result), max_new tokens, or the length limit.
  std::vector<int> generate_greedy(const Tensor& prefix, std::size_t max_new, int stop = kEosId) const;

  std::vector<NamedTensor> named(const std::string& prefix = "lm") const;

 private:
  DecoderConfig config_;
  Tensor token_embedding_;
  Tensor position_embedding_;
  std::vector<DecoderBlock> blocks_;
  LayerNormParams final_norm_;
};

// Input ids [BOS, answer...] and targets [answer..., EOS] for teacher forcing.
struct TeacherForcing {
  std::vector<int> inputs;
  std::vector<int> targets;
};
TeacherForcing teacher_forcing(std::span<const int> answer_ids);

// Index of the largest entry in row `row`, lowest index on ties.
int argmax_row(const Tensor& logits, std::size_t row);

}  // namespace surgant
