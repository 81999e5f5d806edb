#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "surgant/model.hpp"

namespace surgant {

struct TrainConfig {
  std::uint64_t seed = 7;
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double learning_rate = 2e-5;
  std::size_t max_steps = 0;        // 0: no cap beyond epochs
  std::size_t k = 8;

  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t model_dim = 64;
  std::size_t lm_layers = 2;
  std::size_t lm_heads = 4;
  std::size_t fusion_heads = 4;
  std::size_t ffn_expansion = 4;
  std::size_t max_len = 128;
  VideoEncoder video = VideoEncoder::kBiGru;
  GateMode gate = GateMode::kLearned;

  bool use_lora = true;
  std::size_t lora_rank = 8;
  double lora_alpha = 16.0;
  double lora_dropout = 0.1;

  std::string train_jsonl;
  std::string test_jsonl;
  std::string annotations;
  std::string templates;            // empty: bundled asset
  std::string checkpoint = "surgant.antf";
  std::string loss_csv = "loss.csv";
  std::size_t eval_items = 0;       // 0: the whole test file
  std::size_t max_new = 16;

  // Throws ConfigError naming the first bad field.
  void validate() const;
  ModelConfig model_config(std::size_t vocab_size) const;

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  // Flat key=value lines; '#' starts a comment line. Unknown keys throw.
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::string& path);
  // Every key, in a fixed order, readable by parse().
  std::string serialize() const;
  void save(const std::string& path) const;
};

}  // namespace surgant
