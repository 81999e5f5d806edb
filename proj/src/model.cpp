#include "surgant/model.hpp"

#include <cmath>

#include "surgant/errors.hpp"
#include "surgant/ops.hpp"

namespace surgant {

std::string video_encoder_name(VideoEncoder v) { return v == VideoEncoder::kBiGru ? "bigru" : "meanpool"; }

VideoEncoder parse_video_encoder(const std::string& name) {
  if (name == "bigru") return VideoEncoder::kBiGru;
  if (name == "meanpool") return VideoEncoder::kMeanPool;
  throw ConfigError("video encoder must be bigru or meanpool, got '" + name + "'");
}

std::string gate_mode_name(GateMode g) { return g == GateMode::kLearned ? "learned" : "closed"; }

GateMode parse_gate_mode(const std::string& name) {
  if (name == "learned") return GateMode::kLearned;
  if (name == "closed") return GateMode::kClosed;
  throw ConfigError("gate mode must be learned or closed, got '" + name + "'");
}

SurgAntModel SurgAntModel::create(const ModelConfig& config, Rng& rng) {
  SurgAntModel m;
  m.config_ = config;
  m.gru_ = BiGruParams::random(config.feature_dim, config.hidden_dim, rng, config.tied_gru);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.feature_dim));
  std::vector<double> w(config.hidden_dim * config.feature_dim);
  for (double& v : w) v = rng.uniform(-bound, bound);
  m.pool_weight_ = Tensor({config.hidden_dim, config.feature_dim}, std::move(w), true);
  m.pool_bias_ = Tensor::zeros({config.hidden_dim}, true);
  m.fusion_ = FusionParams::random(config.model_dim, config.hidden_dim, config.fusion_heads, config.ffn_expansion, rng);

  DecoderConfig dc;
  dc.vocab_size = config.vocab_size;
  dc.model_dim = config.model_dim;
  dc.n_layers = config.lm_layers;
  dc.n_heads = config.lm_heads;
  dc.max_len = config.max_len;
  m.lm_ = DecoderLm::random(dc, rng);
  if (config.use_lora) m.lm_.enable_lora(config.lora, rng);

  // Only the parameters of the active video path train.
  for (const auto& nt : config.video == VideoEncoder::kBiGru ? std::vector<NamedTensor>{{"", m.pool_weight_}, {"", m.pool_bias_}}
                                                             : m.gru_.named("gru")) {
    Tensor t = nt.tensor;
    t.set_requires_grad(false);
  }
  if (config.gate == GateMode::kClosed) {
    Tensor w_g = m.fusion_.gate.weight, b_g = m.fusion_.gate.bias;
    w_g.set_requires_grad(false);
    b_g.set_requires_grad(false);
  }
  return m;
}

Tensor SurgAntModel::encode_video(Graph& g, const Tensor& frames) const {
  if (frames.rank() != 2 || frames.cols() != config_.feature_dim) {
    throw ShapeError("frames " + shape_to_string(frames.shape()) + " vs feature dim " +
                     std::to_string(config_.feature_dim));
  }
  if (config_.video == VideoEncoder::kBiGru) return encode_bidirectional(g, gru_, frames);
  return linear(g, mean_rows(g, frames), pool_weight_, &pool_bias_);
}

FusionState SurgAntModel::fuse(Graph& g, std::span<const int> question, const Tensor& frames) const {
  if (question.empty()) throw InputError("empty question");
  const Tensor text = lm_.embed_tokens(g, question);
  return fusion_block(g, fusion_, text, encode_video(g, frames), config_.gate);
}

Tensor SurgAntModel::answer_logits(Graph& g, std::span<const int> question, const Tensor& frames,
                                   std::span<const int> inputs, const ForwardContext& ctx) const {
  const FusionState state = fuse(g, question, frames);
  return lm_.forward(g, state.fused, inputs, ctx);
}

Tensor SurgAntModel::loss(Graph& g, std::span<const int> question, const Tensor& frames, std::span<const int> answer,
                          const ForwardContext& ctx) const {
  const TeacherForcing tf = teacher_forcing(answer);
  return cross_entropy_with_logits(g, answer_logits(g, question, frames, tf.inputs, ctx), tf.targets);
}

std::vector<int> SurgAntModel::generate(std::span<const int> question, const Tensor& frames, std::size_t max_new) const {
  Graph g(false);
  const FusionState state = fuse(g, question, frames);
  return lm_.generate_greedy(state.fused, max_new);
}

std::vector<NamedTensor> SurgAntModel::named() const {
  std::vector<NamedTensor> out = gru_.named("gru");
  out.push_back({"pool.weight", pool_weight_});
  out.push_back({"pool.bias", pool_bias_});
  for (auto& nt : fusion_.named("fusion")) out.push_back(nt);
  for (auto& nt : lm_.named("lm")) out.push_back(nt);
  return out;
}

std::vector<Tensor> SurgAntModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto& nt : named()) out.push_back(nt.tensor);
  return out;
}

TokenHits teacher_forced_hits(const Tensor& logits, std::span<const int> targets) {
  if (logits.rows() != targets.size()) throw ShapeError("logit rows and targets differ");
  TokenHits h;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    ++h.total;
    h.hits += argmax_row(logits, r) == targets[r];
  }
  return h;
}

}  // namespace surgant
