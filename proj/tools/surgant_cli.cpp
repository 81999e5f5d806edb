#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "surgant/diagnostics.hpp"
#include "surgant/errors.hpp"
#include "surgant/experiment.hpp"
#include "surgant/synth.hpp"
#include "surgant/trainer.hpp"

using namespace surgant;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// qa.jsonl -> qa.train.jsonl
std::string with_suffix(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + suffix + p.extension().string())).string();
}

int run_synthesize(const std::string& out_dir, const SynthConfig& config) {
  std::filesystem::create_directories(out_dir);
  for (const auto& v : synth_annotations(config)) write_video(out_dir, v);
  std::cout << "wrote " << config.videos << " videos to " << out_dir << "\n";
  return 0;
}

int run_build_dataset(const std::string& annotations, const std::string& templates_path, std::size_t k,
                      const std::string& out, const std::string& test_videos, const std::string& stats_path) {
  const auto videos = read_annotation_dir(annotations);
  const TemplateSet templates = TemplateSet::load(templates_path.empty() ? default_templates_path() : templates_path);
  const Dataset ds = build_dataset(videos, templates, k);
  std::vector<std::string> ids;
  for (const auto& v : videos) ids.push_back(v.video);
  const Split split = split_by_video(ds.items, split_csv(test_videos), ids);
  write_jsonl(out, ds.items);
  write_jsonl(with_suffix(out, "train"), split.train);
  write_jsonl(with_suffix(out, "test"), split.test);
  const DatasetStats stats = compute_stats(ds, split);
  if (!stats_path.empty()) write_text(stats_path, stats.to_json());
  std::cout << ds.items.size() << " items from " << ds.clips.size() << " clips (" << split.train.size() << " train, "
            << split.test.size() << " test); time share " << stats.time_fraction() << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  TrainConfig config = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
  for (const auto& o : overrides) config.apply_override(o);
  config.validate();
  if (config.train_jsonl.empty() || config.annotations.empty()) {
    throw ConfigError("train_jsonl and annotations must be set");
  }
  const std::vector<QAItem> train = read_jsonl(config.train_jsonl);
  for (const auto& item : train)
    if (item.k != config.k) throw ConfigError("dataset clip length " + std::to_string(item.k) + " != k " + std::to_string(config.k));
  const FeatureStore store = FeatureStore::load(config.annotations);
  if (store.feature_dim() != config.feature_dim) {
    throw ConfigError("features have " + std::to_string(store.feature_dim()) + " dims, config says " +
                      std::to_string(config.feature_dim));
  }
  const TemplateSet templates = TemplateSet::load(config.templates.empty() ? default_templates_path() : config.templates);
  const Vocab vocab = build_training_vocab(train, templates);

  Rng rng(config.seed);
  SurgAntModel model = SurgAntModel::create(config.model_config(vocab.size()), rng);
  TrainOptions options = train_options(config);
  options.on_epoch_end = [&](std::size_t epoch) {
    save_model(config.checkpoint, model, vocab, config);
    std::cout << "epoch " << epoch << ": checkpoint " << config.checkpoint << "\n";
  };
  const TrainResult result = train_model(model, encode_items(train, vocab, store), options);
  std::cout << result.steps << " steps; first loss " << result.first_loss << ", last batch loss "
            << result.step_losses.back() << "\n";

  if (!config.test_jsonl.empty()) {
    const std::vector<QAItem> test = evenly_spaced(read_jsonl(config.test_jsonl), config.eval_items);
    const EvalOutput eval = evaluate_model(model, vocab, test, store, config.max_new);
    write_predictions(config.checkpoint + ".pred.jsonl", test, eval.predictions);
    write_jsonl(config.checkpoint + ".gold.jsonl", test);
    write_text(config.checkpoint + ".report.json", eval.report.to_json());
    std::cout << eval.report.to_table() << "answer-token accuracy " << eval.token_accuracy() * 100.0 << "%\n";
  }
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& gold_path, const std::string& report_path) {
  const auto pred = read_jsonl(pred_path);
  const auto gold = read_jsonl(gold_path);
  if (pred.size() != gold.size()) {
    throw InputError("prediction file has " + std::to_string(pred.size()) + " records, gold has " +
                     std::to_string(gold.size()));
  }
  std::vector<std::string> answers;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].video != gold[i].video || pred[i].t_end != gold[i].t_end || pred[i].category != gold[i].category ||
        pred[i].question != gold[i].question) {
      throw InputError("record " + std::to_string(i + 1) + " does not match its gold counterpart");
    }
    answers.push_back(pred[i].answer);
  }
  const MetricReport report = evaluate(answers, gold);
  if (!report_path.empty()) write_text(report_path, report.to_json());
  std::cout << report.to_table();
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& question, const std::string& clip_path,
                std::size_t max_new, const std::string& dump_path) {
  const LoadedModel loaded = load_model(checkpoint);
  const Tensor frames = read_feature_file(clip_path);
  const std::vector<int> q = loaded.vocab.encode(question);
  std::cout << loaded.vocab.decode(loaded.model.generate(q, frames, max_new)) << "\n";
  if (!dump_path.empty()) {
    Graph g(false);
    const FusionState s = loaded.model.fuse(g, q, frames);
    nlohmann::ordered_json j;
    j["question_tokens"] = nlohmann::ordered_json::array();
    for (int id : q) j["question_tokens"].push_back(loaded.vocab.word(id));
    const std::size_t heads = s.attn_weights.dim(0), rows = s.attn_weights.dim(1), cols = s.attn_weights.dim(2);
    nlohmann::ordered_json attn = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h < heads; ++h) {
      nlohmann::ordered_json head = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row(cols);
        for (std::size_t c = 0; c < cols; ++c) row[c] = s.attn_weights[(h * rows + r) * cols + c];
        head.push_back(row);
      }
      attn.push_back(head);
    }
    j["attention"] = attn;
    nlohmann::ordered_json gates = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < s.gates.rows(); ++r) {
      double lo = s.gates.at(r, 0), hi = lo, sum = 0.0;
      for (std::size_t c = 0; c < s.gates.cols(); ++c) {
        const double v = s.gates.at(r, c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      gates.push_back({{"min", lo}, {"mean", sum / static_cast<double>(s.gates.cols())}, {"max", hi}});
    }
    j["gate_stats"] = gates;
    write_text(dump_path, j.dump(2));
  }
  return 0;
}

int run_export_clip(const std::string& annotations, const std::string& video, std::int64_t t_end, std::size_t k,
                    const std::string& out) {
  const FeatureStore store(std::vector<VideoAnnotations>{read_video(annotations, video)});
  write_feature_file(out, store.clip(video, t_end, k));
  return 0;
}

int run_gradcheck(std::uint64_t seed, const std::string& report_path) {
  const auto results = run_gradcheck(standard_grad_blocks(seed), seed);
  std::cout << gradcheck_table(results);
  if (!report_path.empty()) write_text(report_path, gradcheck_json(results));
  for (const auto& r : results)
    if (!r.pass) return 1;
  return 0;
}

int run_experiment(const ExperimentConfig& config, const std::string& report_path) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentReport report = run_synthetic_experiment(config, [&](const std::string& line) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", secs, line.c_str());
  });
  if (!report_path.empty()) write_text(report_path, report.to_json());
  int status = 0;
  for (const auto& c : experiment_checks(report)) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
    if (!c.pass) status = 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anticipation video QA: dataset tools, training, evaluation and checks"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out, synth_mode = "workflow";
  auto* synth_cmd = app.add_subcommand("synthesize", "Write synthetic annotation CSV and feature files");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--videos", synth.videos, "Number of videos");
  synth_cmd->add_option("--minutes", synth.minutes, "Minutes per video");
  synth_cmd->add_option("--feature-dim", synth.feature_dim, "Feature channels per frame");
  synth_cmd->add_option("--mode", synth_mode, "workflow or alternating")->check(CLI::IsMember({"workflow", "alternating"}));

  std::string annotations, templates, out, test_videos = "02,06,12,13,24", stats;
  std::size_t k = 8;
  auto* build_cmd = app.add_subcommand("build-dataset", "Clips and templated QA pairs as JSONL, split by video");
  build_cmd->add_option("--annotations", annotations, "Annotation directory")->required();
  build_cmd->add_option("--templates", templates, "Template file (default: bundled)");
  build_cmd->add_option("--k", k, "Clip length in frames");
  build_cmd->add_option("--out", out, "All items; <stem>.train/.test siblings are written too")->required();
  build_cmd->add_option("--test-videos", test_videos, "Comma separated test video ids");
  build_cmd->add_option("--stats", stats, "Statistics JSON");

  std::string config_path;
  std::vector<std::string> overrides;
  auto* train_cmd = app.add_subcommand("train", "Train and checkpoint each epoch");
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--set", overrides, "Override, key=value (repeatable)");

  std::string pred, gold, report;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold JSONL");
  eval_cmd->add_option("--pred", pred, "Predictions JSONL")->required();
  eval_cmd->add_option("--gold", gold, "Gold JSONL")->required();
  eval_cmd->add_option("--report", report, "Report JSON");

  std::string checkpoint, question, clip, dump;
  std::size_t max_new = 16;
  auto* predict_cmd = app.add_subcommand("predict", "Answer one question about one clip");
  predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  predict_cmd->add_option("--question", question, "Question text")->required();
  predict_cmd->add_option("--clip", clip, "Flat binary clip features")->required();
  predict_cmd->add_option("--max-new", max_new, "Token budget")->check(CLI::PositiveNumber);
  predict_cmd->add_option("--dump-fusion", dump, "Attention and gate statistics JSON");

  std::string video;
  std::int64_t t_end = 0;
  auto* export_cmd = app.add_subcommand("export-clip", "Write one clip's features as a flat binary file");
  export_cmd->add_option("--annotations", annotations, "Annotation directory")->required();
  export_cmd->add_option("--video", video, "Video id")->required();
  export_cmd->add_option("--t-end", t_end, "Last frame index")->required();
  export_cmd->add_option("--k", k, "Clip length");
  export_cmd->add_option("--out", out, "Output file")->required();

  std::uint64_t seed = 7;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter block");
  grad_cmd->add_option("--seed", seed, "Seed");
  grad_cmd->add_option("--report", report, "Report JSON");

  ExperimentConfig exp;
  bool no_sweep = false;
  auto* exp_cmd = app.add_subcommand("synthetic-experiment", "Full model vs ablations on synthetic data");
  exp_cmd->add_option("--seed", exp.seed, "Seed");
  exp_cmd->add_option("--steps", exp.steps, "Optimizer steps per workflow variant");
  exp_cmd->add_option("--probe-steps", exp.order_probe_steps, "Optimizer steps per order-probe variant");
  exp_cmd->add_option("--sweep-steps", exp.sweep_steps, "Optimizer steps for K = 16, 32");
  exp_cmd->add_option("--lr", exp.learning_rate, "Learning rate");
  exp_cmd->add_option("--eval-items", exp.eval_items, "Test items per report");
  exp_cmd->add_flag("--no-sweep", no_sweep, "Skip the frame-budget sweep");
  exp_cmd->add_option("--loss-dir", exp.loss_dir, "Directory for per-run loss CSVs");
  exp_cmd->add_option("--report", report, "Report JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      synth.mode = synth_mode == "workflow" ? SynthMode::kWorkflow : SynthMode::kAlternating;
      return run_synthesize(synth_out, synth);
    }
    if (*build_cmd) return run_build_dataset(annotations, templates, k, out, test_videos, stats);
    if (*train_cmd) return run_train(config_path, overrides);
    if (*eval_cmd) return run_eval(pred, gold, report);
    if (*predict_cmd) return run_predict(checkpoint, question, clip, max_new, dump);
    if (*export_cmd) return run_export_clip(annotations, video, t_end, k, out);
    if (*grad_cmd) return run_gradcheck(seed, report);
    if (*exp_cmd) {
      exp.run_sweep = !no_sweep;
      if (!exp.loss_dir.empty()) std::filesystem::create_directories(exp.loss_dir);
      return run_experiment(exp, report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
