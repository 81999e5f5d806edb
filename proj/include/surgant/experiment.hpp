#pragma once

#include <functional>
#include <string>
#include <vector>

#include "surgant/synth.hpp"
#include "surgant/trainer.hpp"

namespace surgant {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::size_t videos = 10;
  double minutes = 30.0;
  std::vector<std::string> test_videos = {"02", "06"};
  std::size_t steps = 2000;           // optimizer-step budget per workflow variant
  std::size_t order_probe_steps = 600;
  std::size_t sweep_steps = 2000;     // K = 16 and 32; K = 8 reuses the full run
  std::size_t batch_size = 8;
  double learning_rate = 3e-3;
  std::size_t eval_items = 420;       // evenly spaced test items per report
  std::vector<std::size_t> sweep_k = {8, 16, 32};
  bool run_sweep = true;
  std::string loss_dir;               // when set, one loss CSV per run
};

struct VariantResult {
  std::string name;
  VideoEncoder video = VideoEncoder::kBiGru;
  GateMode gate = GateMode::kLearned;
  std::size_t k = 8;
  std::size_t train_items = 0;
  TrainResult train;
  EvalOutput eval;
};

struct ExperimentReport {
  std::vector<VariantResult> workflow;      // full, gate-closed, mean-pool
  std::vector<VariantResult> order_probe;   // full, mean-pool on alternating data
  std::vector<VariantResult> sweep;         // one per K
  // Gate-closed model: fused prefix and answers unchanged after replacing the
  // clip features, on five test clips.
  bool closed_gate_invariant = false;

  const VariantResult* find(const std::vector<VariantResult>& runs, const std::string& name) const;
  std::string to_json() const;
};

using ExperimentLog = std::function<void(const std::string&)>;

ExperimentReport run_synthetic_experiment(const ExperimentConfig& config, const ExperimentLog& log = {});

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline constexpr double kMinTokenAccuracy = 0.95;
inline constexpr double kMinPhaseAccuracy = 0.90;
inline constexpr double kMinClosedGateMargin = 0.20;

// Thresholds on a finished report; the sweep checks are skipped when it did not run.
std::vector<Check> experiment_checks(const ExperimentReport& report);

// Pieces reused by the CLI and tests.
struct PreparedData {
  FeatureStore store;
  Vocab vocab;
  std::vector<QAItem> train;
  std::vector<QAItem> test;
};
PreparedData prepare_synthetic(const SynthConfig& synth, const TemplateSet& templates, std::size_t k,
                               const std::vector<std::string>& test_videos);
TemplateSet order_probe_templates();

VariantResult run_variant(const std::string& name, const PreparedData& data, const ModelConfig& model_config,
                          const TrainOptions& options, std::size_t eval_items, std::size_t max_new,
                          SurgAntModel* trained = nullptr);

}  // namespace surgant
