#include "surgant/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "surgant/checkpoint.hpp"
#include "surgant/errors.hpp"
#include "surgant/optim.hpp"
#include "surgant/rng.hpp"

namespace surgant {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError(path + ": truncated feature file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

FeatureStore::FeatureStore(std::vector<VideoAnnotations> videos) : videos_(std::move(videos)) {
  for (std::size_t i = 0; i < videos_.size(); ++i) index_[videos_[i].video] = i;
}

FeatureStore FeatureStore::load(const std::string& annotation_dir) {
  return FeatureStore(read_annotation_dir(annotation_dir));
}

Tensor FeatureStore::clip(const std::string& video, std::int64_t t_end, std::size_t k) const {
  const auto it = index_.find(video);
  if (it == index_.end()) throw IndexError("no features for video '" + video + "'");
  const VideoAnnotations& v = videos_[it->second];
  const auto pos = std::lower_bound(v.frames.begin(), v.frames.end(), t_end,
                                    [](const FrameAnnotation& f, std::int64_t t) { return f.frame < t; });
  if (pos == v.frames.end() || pos->frame != t_end) {
    throw IndexError(video + ": no frame " + std::to_string(t_end));
  }
  const std::size_t end_row = static_cast<std::size_t>(pos - v.frames.begin());
  if (end_row + 1 < k || v.frames[end_row + 1 - k].frame != t_end - static_cast<std::int64_t>(k) + 1) {
    throw IndexError(video + ": window of " + std::to_string(k) + " frames ending at " + std::to_string(t_end) +
                     " is not contiguous");
  }
  return clip_features(v, VideoClip{video, t_end, k, end_row});
}

std::size_t FeatureStore::feature_dim() const {
  if (videos_.empty()) throw ConfigError("feature store is empty");
  return videos_.front().features.cols();
}

void write_feature_file(const std::string& path, const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("feature file needs a 2-D tensor, got " + shape_to_string(features.shape()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  put_u64(out, features.rows());
  put_u64(out, features.cols());
  for (double v : features.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
  }
  if (!out) throw InputError("failed writing " + path);
}

Tensor read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  const std::uint64_t t = get_u64(in, path);
  const std::uint64_t d = get_u64(in, path);
  if (t == 0 || d == 0 || t > (1u << 24) || d > (1u << 16)) throw FormatError(path + ": implausible header");
  std::vector<double> data(t * d);
  for (double& v : data) {
    const std::uint64_t bits = get_u64(in, path);
    std::memcpy(&v, &bits, 8);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return Tensor({t, d}, std::move(data));
}

Vocab build_training_vocab(std::span<const QAItem> train, const TemplateSet& templates) {
  std::vector<std::string> corpus;
  for (const auto& item : train) {
    corpus.push_back(item.question);
    corpus.push_back(item.answer);
  }
  for (const auto& t : templates.templates) {
    corpus.push_back(t.question);
    corpus.push_back(t.render(""));
  }
  for (const auto* classes : {&phase_classes(), &step_classes(), &instrument_classes()})
    for (const auto& c : *classes) corpus.push_back(c);
  return Vocab::build(corpus);
}

std::vector<EncodedItem> encode_items(std::span<const QAItem> items, const Vocab& vocab, const FeatureStore& store) {
  std::vector<EncodedItem> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    out.push_back({vocab.encode(item.question), vocab.encode(item.answer), store.clip(item),
                   item.video + "@" + std::to_string(item.t_end) + "/" + category_name(item.category)});
  }
  return out;
}

TrainOptions train_options(const TrainConfig& config) {
  TrainOptions o;
  o.seed = config.seed;
  o.epochs = config.epochs;
  o.batch_size = config.batch_size;
  o.learning_rate = config.learning_rate;
  o.max_steps = config.max_steps;
  o.loss_csv = config.loss_csv;
  return o;
}

TrainResult train_model(SurgAntModel& model, std::span<const EncodedItem> items, const TrainOptions& options) {
  if (items.empty()) throw InputError("no training items");
  if (options.batch_size == 0 || options.epochs == 0) throw ConfigError("batch_size and epochs must be positive");
  AdamConfig ac;
  ac.lr = options.learning_rate;
  Adam adam(model.parameters(), ac);

  std::ofstream csv;
  if (!options.loss_csv.empty()) {
    csv.open(options.loss_csv, std::ios::binary);
    if (!csv) throw InputError("cannot write " + options.loss_csv);
    csv << "step,epoch,loss,lr\n";
  }

  TrainResult result;
  std::vector<std::size_t> order(items.size());
  std::uint64_t example_counter = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(splitmix64(options.seed) ^ (epoch + 1));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      if (options.max_steps && result.steps >= options.max_steps) break;
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      double batch_loss = 0.0;
      for (std::size_t j = begin; j < end; ++j) {
        const EncodedItem& ex = items[order[j]];
        Graph g;
        const ForwardContext ctx{true, splitmix64(options.seed + 0x5bd1e995ULL * ++example_counter)};
        auto fail = [&](const std::string& what) {
          std::string ids;
          for (std::size_t b = begin; b < end; ++b) ids += (ids.empty() ? "" : ", ") + items[order[b]].tag;
          throw NumericError(what + " at step " + std::to_string(result.steps) + " in batch [" + ids + "]");
        };
        Tensor loss;
        try {
          loss = model.loss(g, ex.question, ex.frames, ex.answer, ctx);
        } catch (const NumericError& e) {
          fail(e.what());
        }
        const double value = loss.item();
        if (!std::isfinite(value)) fail("non-finite loss");
        if (result.steps == 0 && j == begin) result.first_loss = value;
        batch_loss += value;
        g.backward(loss);
      }
      const double n = static_cast<double>(end - begin);
      adam.step(1.0 / n);
      batch_loss /= n;
      result.step_losses.push_back(batch_loss);
      if (csv.is_open()) {
        csv << result.steps << ',' << epoch << ',' << fmt(batch_loss) << ',' << fmt(options.learning_rate) << '\n';
      }
      ++result.steps;
    }
    if (options.on_epoch_end) options.on_epoch_end(epoch);
    if (options.max_steps && result.steps >= options.max_steps) break;
  }
  return result;
}

EvalOutput evaluate_model(const SurgAntModel& model, const Vocab& vocab, std::span<const QAItem> items,
                          const FeatureStore& store, std::size_t max_new) {
  EvalOutput out;
  out.predictions.reserve(items.size());
  for (const auto& item : items) {
    const std::vector<int> question = vocab.encode(item.question);
    const Tensor frames = store.clip(item);
    out.predictions.push_back(vocab.decode(model.generate(question, frames, max_new)));

    const TeacherForcing tf = teacher_forcing(vocab.encode(item.answer));
    Graph g(false);
    const Tensor logits = model.answer_logits(g, question, frames, tf.inputs, ForwardContext{});
    const TokenHits h = teacher_forced_hits(logits, tf.targets);
    out.tokens.hits += h.hits;
    out.tokens.total += h.total;
  }
  out.report = evaluate(out.predictions, items);
  return out;
}

std::vector<QAItem> evenly_spaced(std::span<const QAItem> items, std::size_t n) {
  if (n == 0 || n >= items.size()) return {items.begin(), items.end()};
  std::vector<QAItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items[i * items.size() / n]);
  return out;
}

void save_model(const std::string& path, const SurgAntModel& model, const Vocab& vocab, const TrainConfig& config) {
  save_checkpoint(path, model.named());
  vocab.save(path + ".vocab");
  config.save(path + ".config");
}

LoadedModel load_model(const std::string& path) {
  TrainConfig config = TrainConfig::load(path + ".config");
  config.validate();
  Vocab vocab = Vocab::load(path + ".vocab");
  Rng rng(config.seed);
  SurgAntModel model = SurgAntModel::create(config.model_config(vocab.size()), rng);
  assign_from_checkpoint(model.named(), load_checkpoint(path));
  return {std::move(config), std::move(vocab), std::move(model)};
}

void write_predictions(const std::string& path, std::span<const QAItem> gold, std::span<const std::string> predictions) {
  if (gold.size() != predictions.size()) throw InputError("prediction and gold counts differ");
  std::vector<QAItem> records(gold.begin(), gold.end());
  for (std::size_t i = 0; i < records.size(); ++i) records[i].answer = predictions[i];
  write_jsonl(path, records);
}

}  // namespace surgant
