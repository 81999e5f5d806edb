#pragma once

#include <span>
#include <string>
#include <vector>

#include "surgant/decoder_lm.hpp"
#include "surgant/gated_fusion.hpp"
#include "surgant/lora.hpp"
#include "surgant/temporal_encoder.hpp"

namespace surgant {

enum class VideoEncoder {
  kBiGru,
  // Ablation: frames averaged then projected; frame order is invisible.
  kMeanPool,
};

std::string video_encoder_name(VideoEncoder v);   // "bigru" | "meanpool"
VideoEncoder parse_video_encoder(const std::string& name);
std::string gate_mode_name(GateMode g);           // "learned" | "closed"
GateMode parse_gate_mode(const std::string& name);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 64;       // biGRU width H
  std::size_t model_dim = 64;
  std::size_t lm_layers = 2;
  std::size_t lm_heads = 4;
  std::size_t fusion_heads = 4;
  std::size_t ffn_expansion = 4;
  std::size_t max_len = 128;
  bool tied_gru = false;
  VideoEncoder video = VideoEncoder::kBiGru;
  GateMode gate = GateMode::kLearned;
  bool use_lora = true;
  LoraConfig lora;
};

/// Question tokens -> embeddings X^t; frames -> H^v; gated fusion -> Z; Z is
/// the prefix of a causal decoder that produces the answer.
class SurgAntModel {
 public:
  static SurgAntModel create(const ModelConfig& config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  BiGruParams& gru() { return gru_; }
  FusionParams& fusion() { return fusion_; }
  const FusionParams& fusion() const { return fusion_; }
  DecoderLm& lm() { return lm_; }
  const DecoderLm& lm() const { return lm_; }

  Tensor encode_video(Graph& g, const Tensor& frames) const;
  FusionState fuse(Graph& g, std::span<const int> question, const Tensor& frames) const;

  // Logits at the answer positions for teacher-forced inputs [BOS, answer...].
  Tensor answer_logits(Graph& g, std::span<const int> question, const Tensor& frames, std::span<const int> inputs,
                       const ForwardContext& ctx) const;
  // Mean cross-entropy over answer tokens plus EOS.
  Tensor loss(Graph& g, std::span<const int> question, const Tensor& frames, std::span<const int> answer,
              const ForwardContext& ctx) const;

  std::vector<int> generate(std::span<const int> question, const Tensor& frames, std::size_t max_new) const;

  std::vector<NamedTensor> named() const;
  std::vector<Tensor> parameters() const;

 private:
  ModelConfig config_;
  BiGruParams gru_;
  Tensor pool_weight_;   // H x D, mean-pool projection
  Tensor pool_bias_;
  FusionParams fusion_;
  DecoderLm lm_;
};

struct TokenHits {
  std::size_t hits = 0;
  std::size_t total = 0;
};
TokenHits teacher_forced_hits(const Tensor& logits, std::span<const int> targets);

}  // namespace surgant
