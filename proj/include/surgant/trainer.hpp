#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "surgant/config.hpp"
#include "surgant/dataset.hpp"
#include "surgant/metrics.hpp"
#include "surgant/model.hpp"
#include "surgant/vocab.hpp"

namespace surgant {

// Frame features for QA items, found by (video, t_end).
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::vector<VideoAnnotations> videos);
  static FeatureStore load(const std::string& annotation_dir);

  // Rows t_end-k+1 .. t_end. Throws IndexError when the video or any frame
  // of the window is missing.
  Tensor clip(const std::string& video, std::int64_t t_end, std::size_t k) const;
  Tensor clip(const QAItem& item) const { return clip(item.video, item.t_end, item.k); }
  std::size_t feature_dim() const;
  const std::vector<VideoAnnotations>& videos() const { return videos_; }

 private:
  std::vector<VideoAnnotations> videos_;
  std::map<std::string, std::size_t> index_;
};

// Flat binary per-frame features: u64 T, u64 D, then T*D f64, little-endian.
void write_feature_file(const std::string& path, const Tensor& features);
Tensor read_feature_file(const std::string& path);

// Words of the training split, every template, and every class name, so
// test answers in the same label space never hit UNK.
Vocab build_training_vocab(std::span<const QAItem> train, const TemplateSet& templates);

struct EncodedItem {
  std::vector<int> question;
  std::vector<int> answer;
  Tensor frames;
  std::string tag;   // video@t_end/category, for diagnostics
};
std::vector<EncodedItem> encode_items(std::span<const QAItem> items, const Vocab& vocab, const FeatureStore& store);

struct TrainOptions {
  std::uint64_t seed = 7;
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double learning_rate = 2e-5;
  std::size_t max_steps = 0;
  std::string loss_csv;                                 // empty: not written
  std::function<void(std::size_t epoch)> on_epoch_end;  // e.g. checkpointing
};
TrainOptions train_options(const TrainConfig& config);

struct TrainResult {
  std::size_t steps = 0;
  std::vector<double> step_losses;   // batch mean per optimizer step
  double first_loss = 0.0;           // loss of the very first example, before any update
};

// Adam on the model's trainable tensors, gradients averaged over each batch.
// Throws NumericError listing the batch when a loss is not finite.
TrainResult train_model(SurgAntModel& model, std::span<const EncodedItem> items, const TrainOptions& options);

struct EvalOutput {
  std::vector<std::string> predictions;
  MetricReport report;
  TokenHits tokens;   // teacher-forced answer tokens including EOS

  double token_accuracy() const {
    return tokens.total ? static_cast<double>(tokens.hits) / static_cast<double>(tokens.total) : 0.0;
  }
};
EvalOutput evaluate_model(const SurgAntModel& model, const Vocab& vocab, std::span<const QAItem> items,
                          const FeatureStore& store, std::size_t max_new);

// n items at evenly spaced positions (all of them when n == 0 or n >= size).
std::vector<QAItem> evenly_spaced(std::span<const QAItem> items, std::size_t n);

// Writes <path> (ANTF1), <path>.vocab and <path>.config.
void save_model(const std::string& path, const SurgAntModel& model, const Vocab& vocab, const TrainConfig& config);

struct LoadedModel {
  TrainConfig config;
  Vocab vocab;
  SurgAntModel model;
};
LoadedModel load_model(const std::string& path);

// Predictions as JSONL: the gold record with "answer" replaced by the prediction.
void write_predictions(const std::string& path, std::span<const QAItem> gold, std::span<const std::string> predictions);

}  // namespace surgant
