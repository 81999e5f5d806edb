// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "metric_oracles.hpp"
#include "surgant/diagnostics.hpp"
#include "surgant/experiment.hpp"
#include "surgant/lora.hpp"
#include "surgant/ops.hpp"
#include "surgant/temporal_encoder.hpp"

using namespace surgant;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kExactTol = 1e-12;
constexpr double kMetricTol = 1e-9;
constexpr double kExperimentMinutes = 30.0;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& note) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok: " : "FAILED: ") + note);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor({r, c}, std::move(v));
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor reverse_rows(const Tensor& x) {
  const std::size_t t = x.rows(), d = x.cols();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < d; ++c) out[(t - 1 - r) * d + c] = x.at(r, c);
  return Tensor({t, d}, std::move(out));
}

// Row-wise layer norm with unit gain and zero bias, written out directly.
std::vector<double> layernorm_oracle(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) mean += x.at(r, c);
    mean /= static_cast<double>(x.cols());
    double var = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
    var /= static_cast<double>(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) out[r * x.cols() + c] = (x.at(r, c) - mean) / std::sqrt(var + kLayerNormEps);
  }
  return out;
}

void randomize(const std::vector<NamedTensor>& params, Rng& rng, double bound) {
  for (const auto& nt : params) {
    Tensor t = nt.tensor;
    for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  }
}

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck(standard_grad_blocks(7), 7, kGradTol);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::set<std::string> names;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_relative_error);
    names.insert(r.name);
    o.require(r.pass, r.name + " max rel err " + num(r.max_relative_error));
  }
  for (const char* block : {"gru.forward", "gru.backward", "attn.W_Q", "attn.W_K", "attn.W_V", "attn.W_O",
                            "gate.W_g/b_g", "ffn", "layernorm", "lora.A/B", "lm"})
    o.require(names.count(block) == 1, std::string("block listed: ") + block);
  o.require(secs < kGradSeconds, "runtime " + num(secs) + " s");
  o.notes.insert(o.notes.begin(), std::to_string(results.size()) + " blocks, worst " + num(worst) + ", " + num(secs) + " s");
  return o;
}

Outcome equation_fidelity() {
  Outcome o;
  Rng rng(11);

  // Closed gate through the whole model: fused prefix and answers.
  ModelConfig mc;
  mc.vocab_size = 30;
  mc.feature_dim = 8;
  mc.hidden_dim = 16;
  mc.model_dim = 16;
  mc.lm_layers = 1;
  mc.lm_heads = 2;
  mc.fusion_heads = 2;
  SurgAntModel model = SurgAntModel::create(mc, rng);
  randomize(model.named(), rng, 1.0);
  for (double& v : model.fusion().gate.weight.mutable_data()) v = rng.uniform(-0.01, 0.01);
  for (double& v : model.fusion().gate.bias.mutable_data()) v = -100.0;
  bool z_same = true, answers_same = true;
  std::size_t distinct_answers = 0;
  std::set<std::vector<int>> seen;
  for (int q = 0; q < 5; ++q) {
    std::vector<int> question(3 + rng.below(5));
    for (int& id : question) id = 4 + static_cast<int>(rng.below(26));
    const Tensor ref = random_matrix(rng, 8, 8);
    Graph g(false);
    const Tensor z0 = model.fuse(g, question, ref).fused;
    const auto a0 = model.generate(question, ref, 8);
    seen.insert(a0);
    for (int clip = 0; clip < 5; ++clip) {
      const Tensor other = random_matrix(rng, 8, 8, -4.0, 4.0);
      z_same = z_same && same_bits(z0, model.fuse(g, question, other).fused);
      answers_same = answers_same && model.generate(question, other, 8) == a0;
    }
  }
  distinct_answers = seen.size();
  o.require(z_same, "b_g = -100: Z bitwise invariant over 5 questions x 5 clips");
  o.require(answers_same && distinct_answers > 1, "b_g = -100: generated answers bitwise invariant (" +
                                                      std::to_string(distinct_answers) + " distinct answers across questions)");

  // Open gate: LayerNorm(X + A).
  const std::size_t L = 5, DM = 12;
  GateParams gate = GateParams::random(DM, rng);
  const LayerNormParams norm = LayerNormParams::identity(DM);
  double worst_open = 0.0;
  bool half_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_matrix(rng, L, DM, -2.0, 2.0);
    const Tensor a = random_matrix(rng, L, DM, -2.0, 2.0);
    for (double& v : gate.bias.mutable_data()) v = 100.0;
    Graph g(false);
    const GatedFusion open = gate_and_fuse(g, gate, norm, x, a, GateMode::kLearned);
    std::vector<double> sum(x.numel());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = x[i] + a[i];
    const auto expect = layernorm_oracle(Tensor({L, DM}, sum));
    for (std::size_t i = 0; i < expect.size(); ++i) worst_open = std::max(worst_open, std::abs(open.fused[i] - expect[i]));

    GateParams zero = gate;
    zero.weight = Tensor::zeros({DM, DM});
    zero.bias = Tensor::zeros({DM});
    const GatedFusion half = gate_and_fuse(g, zero, norm, x, a, GateMode::kLearned);
    for (std::size_t i = 0; i < a.numel(); ++i) half_exact = half_exact && half.gated[i] == 0.5 * a[i];
  }
  o.require(worst_open <= kExactTol, "b_g = +100: |fused - LN(X + A)| max " + num(worst_open));
  o.require(half_exact, "W_g = 0, b_g = 0: gated == 0.5 * A exactly on 20 draws");
  return o;
}

Outcome temporal_symmetry() {
  Outcome o;
  Rng rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 1 + rng.below(12);
    const std::size_t d = 1 + rng.below(6), h = 1 + rng.below(6);
    const BiGruParams p = BiGruParams::random(d, h, rng, true);
    const Tensor x = random_matrix(rng, t, d, -2.0, 2.0);
    Graph g(false);
    worst = std::max(worst, max_diff(reverse_rows(encode_bidirectional(g, p, x)),
                                     encode_bidirectional(g, p, reverse_rows(x))));
  }
  o.require(worst <= kExactTol, "100 sequences, T in 1..12, max |diff| " + num(worst));
  return o;
}

Outcome lora_contract() {
  Outcome o;
  Rng rng(13);
  DecoderConfig dc;
  dc.vocab_size = 40;
  dc.zero_head_init = false;
  DecoderLm lm = DecoderLm::random(dc, rng);
  const Tensor prefix = random_matrix(rng, 4, dc.model_dim);
  const std::vector<int> ids = {1, 7, 9, 12, 30};
  Graph g(false);
  const Tensor before = lm.forward(g, prefix, ids, ForwardContext{});
  lm.enable_lora(LoraConfig{}, rng);
  o.require(same_bits(before, lm.forward(g, prefix, ids, ForwardContext{})), "init: eval logits bit-identical");
  o.require(same_bits(before, lm.forward(g, prefix, ids, ForwardContext{true, 5})),
            "init: training-mode logits bit-identical");

  std::size_t layers = 0;
  bool counts_ok = true;
  for (const auto& block : lm.blocks()) {
    for (const AdaptableLinear* layer : {&block.c_attn, &block.attn_proj, &block.mlp_proj}) {
      if (!layer->lora) continue;
      ++layers;
      const auto& ad = *layer->lora;
      counts_ok = counts_ok && ad.rank == 8 && ad.scale() == 2.0 &&
                  ad.trainable_count() == 8 * (layer->in_features() + layer->weight.dim(0));
    }
  }
  o.require(layers > 0 && counts_ok,
            std::to_string(layers) + " wrapped layers, each r = 8, alpha/r = 2, trainable = r(in + out)");

  // Train a full model briefly, then inspect every wrapped layer.
  SynthConfig s;
  s.videos = 3;
  s.minutes = 3.0;
  const PreparedData data = prepare_synthetic(s, TemplateSet::builtin(), 8, {"03"});
  ModelConfig mc;
  mc.vocab_size = data.vocab.size();
  SurgAntModel model = SurgAntModel::create(mc, rng);
  std::vector<std::pair<Tensor, Tensor>> frozen;
  for (const auto& nt : model.lm().named("lm"))
    if (!nt.tensor.requires_grad()) frozen.emplace_back(nt.tensor, nt.tensor.clone());
  TrainOptions opt;
  opt.learning_rate = 3e-3;
  opt.max_steps = 40;
  train_model(model, encode_items(data.train, data.vocab, data.store), opt);
  bool base_same = !frozen.empty();
  for (const auto& [now, was] : frozen) base_same = base_same && same_bits(now, was);
  o.require(base_same, std::to_string(frozen.size()) + " frozen LM tensors bit-identical after 40 steps");

  double worst_merge = 0.0;
  bool adapters_moved = false;
  for (const auto& block : model.lm().blocks()) {
    for (const AdaptableLinear* layer : {&block.c_attn, &block.attn_proj, &block.mlp_proj}) {
      const Tensor x = random_matrix(rng, 6, layer->in_features());
      Graph g2(false);
      const Tensor adapted = layer->forward(g2, x, ForwardContext{});
      const Tensor merged = linear(g2, x, layer->lora->merge(), &layer->bias);
      worst_merge = std::max(worst_merge, max_diff(adapted, merged));
      for (double v : layer->lora->up.data()) adapters_moved = adapters_moved || v != 0.0;
    }
  }
  o.require(adapters_moved, "adapters trained (B no longer zero)");
  o.require(worst_merge <= kExactTol, "merged weights vs adapted forward max |diff| " + num(worst_merge));
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(14);
  double worst = 0.0;
  std::size_t non_monotone = 0;
  const int corpora = 200;
  for (int trial = 0; trial < corpora; ++trial) {
    const auto corpus = oracle::random_corpus(rng);
    double prev = 2.0;
    bool monotone = true;
    for (int n = 1; n <= 4; ++n) {
      const double b = bleu(corpus.candidates, corpus.references, n);
      worst = std::max(worst, std::abs(b - oracle::bleu(corpus.candidates, corpus.references, n)));
      monotone = monotone && b <= prev;
      prev = b;
    }
    non_monotone += !monotone;
    double rouge_sum = 0.0, meteor_sum = 0.0;
    for (std::size_t i = 0; i < corpus.candidates.size(); ++i) {
      rouge_sum += oracle::rouge_l(corpus.candidates[i], corpus.references[i]);
      meteor_sum += oracle::meteor(corpus.candidates[i], corpus.references[i]);
    }
    const double n = static_cast<double>(corpus.candidates.size());
    worst = std::max(worst, std::abs(rouge_l_corpus(corpus.candidates, corpus.references) - rouge_sum / n));
    worst = std::max(worst, std::abs(meteor_corpus(corpus.candidates, corpus.references) - meteor_sum / n));
  }
  o.require(worst <= kMetricTol, "BLEU-1..4, ROUGE-L, METEOR vs brute-force oracles on 200 corpora, max |diff| " + num(worst));

  // METEOR of an identical pair is 1 - 0.5 / m^3 (one chunk, m matches), which
  // clears 0.99 from m = 4 tokens on; shorter pairs are checked against that form.
  bool identity_ok = true, meteor_long_ok = true, meteor_form_ok = true;
  double meteor_min_long = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto corpus = oracle::random_corpus(rng);
    std::size_t longest = 0;
    for (const auto& c : corpus.candidates) longest = std::max(longest, c.size());
    for (int n = 1; n <= 4; ++n) {
      // An order with no n-grams anywhere in the corpus has nothing to match.
      if (static_cast<std::size_t>(n) <= longest)
        identity_ok = identity_ok && std::abs(bleu(corpus.candidates, corpus.candidates, n) - 1.0) < kMetricTol;
    }
    identity_ok = identity_ok && std::abs(rouge_l_corpus(corpus.candidates, corpus.candidates) - 1.0) < kMetricTol;
    for (const auto& c : corpus.candidates) {
      const double m = static_cast<double>(c.size());
      const double score = meteor(c, c);
      meteor_form_ok = meteor_form_ok && std::abs(score - (1.0 - 0.5 / (m * m * m))) < kMetricTol;
      if (c.size() >= 4) {
        meteor_long_ok = meteor_long_ok && score >= 0.99;
        meteor_min_long = std::min(meteor_min_long, score);
      }
    }
  }
  o.require(identity_ok, "identity corpora: BLEU-1..4 = ROUGE-L = 1");
  o.require(meteor_long_ok, "identity pairs of >= 4 tokens: METEOR >= 0.99 (min " + num(meteor_min_long) + ")");
  o.require(meteor_form_ok, "identity pairs of any length: METEOR = 1 - 0.5/m^3 (0.5 at m = 1)");
  o.require(non_monotone == 0, "BLEU-n non-increasing in n: violated on " + std::to_string(non_monotone) + " of " +
                                   std::to_string(corpora) + " corpora");
  return o;
}

Outcome dataset_fidelity() {
  Outcome o;
  Rng rng(15);
  bool counts_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(80), k = 1 + rng.below(12);
    VideoAnnotations v;
    v.video = "01";
    std::int64_t index = 0;
    for (std::size_t i = 0; i < n; ++i) {
      FrameAnnotation f;
      index += rng.uniform() < 0.04 ? 3 : 1;
      f.frame = index;
      f.valid = rng.uniform() >= 0.1;
      v.frames.push_back(f);
    }
    v.features = Tensor::zeros({n, 1});
    std::size_t expected = 0;
    for (std::int64_t t = 0; t <= index; ++t) {
      bool ok = true;
      for (std::int64_t f = t - static_cast<std::int64_t>(k) + 1; f <= t && ok; ++f) {
        bool found = false;
        for (const auto& fr : v.frames)
          if (fr.frame == f) found = fr.valid;
        ok = found;
      }
      expected += ok;
    }
    counts_ok = counts_ok && build_clips(v, k).size() == expected;
  }
  o.require(counts_ok, "clip counts equal the brute-force window enumerator on 100 random validity masks");

  SynthConfig s;
  s.videos = 6;
  s.minutes = 10.0;
  const auto videos = synth_annotations(s);
  std::vector<std::string> ids;
  for (const auto& v : videos) ids.push_back(v.video);
  const Dataset ds = build_dataset(videos, TemplateSet::builtin(), 8);
  const Split split = split_by_video(ds.items, {"02", "05"}, ids);
  std::set<std::string> train_videos, test_videos;
  for (const auto& i : split.train) train_videos.insert(i.video);
  for (const auto& i : split.test) test_videos.insert(i.video);
  bool disjoint = true;
  for (const auto& v : test_videos) disjoint = disjoint && !train_videos.count(v);
  o.require(disjoint && split.train.size() + split.test.size() == ds.items.size(),
            "split is a partition with no shared video");

  const DatasetStats st = compute_stats(ds, split);
  std::size_t cat_sum = 0, scope_sum = 0;
  for (auto c : st.per_category) cat_sum += c;
  for (auto c : st.per_scope) scope_sum += c;
  o.require(cat_sum == st.total && scope_sum == st.per_category[3] && st.train + st.test == st.total,
            "category and scope counts sum to the totals");
  const double share = st.time_fraction();
  o.require(share > 0.40 && share < 0.46, "time-question share " + num(share * 100.0) + "%");
  return o;
}

struct ExperimentOutcome {
  Outcome experiment;
  Outcome sweep;
};

ExperimentOutcome synthetic_experiment() {
  ExperimentOutcome out;
  const ExperimentConfig config;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport report = run_synthetic_experiment(config, [&](const std::string& line) {
    std::fprintf(stderr, "  [%6.1fs] %s\n", seconds_since(t0), line.c_str());
  });
  const double minutes = seconds_since(t0) / 60.0;
  for (const auto& c : experiment_checks(report)) {
    Outcome& target = c.name.find("sweep") != std::string::npos ? out.sweep : out.experiment;
    target.require(c.pass, c.name + (c.detail.empty() ? "" : " (" + c.detail + ")"));
  }
  out.experiment.require(minutes < kExperimentMinutes, "runtime " + num(minutes) + " min including the sweep");
  return out;
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" SURGANT_CLI "' " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "surgant_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> commands = {
      "synthesize --out ann --videos 3 --minutes 4 --seed 5",
      "build-dataset --annotations ann --k 8 --out qa.jsonl --test-videos 03 --stats stats.json",
      "train --set train_jsonl=qa.train.jsonl --set test_jsonl=qa.test.jsonl --set annotations=ann "
      "--set max_steps=12 --set learning_rate=0.003 --set eval_items=25 --set checkpoint=model.antf",
      "eval --pred model.antf.pred.jsonl --gold model.antf.gold.jsonl --report eval.json",
      "export-clip --annotations ann --video 03 --t-end 60 --k 8 --out clip.bin",
      "predict --checkpoint model.antf --question 'What is the next surgical phase?' --clip clip.bin "
      "--dump-fusion fusion.json",
      "synthetic-experiment --steps 8 --probe-steps 8 --no-sweep --eval-items 12 --report exp.json",
  };
  for (const char* run : {"a", "b"}) {
    fs::create_directories(root / run);
    for (const auto& c : commands) {
      const int status = run_cli(root / run, c);
      // The shortened experiment misses its accuracy bars by design; only the bytes matter here.
      if (c.rfind("synthetic-experiment", 0) != 0) o.require(status == 0, std::string(run) + ": " + c.substr(0, c.find(' ')));
    }
  }
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    ++files;
    if (!fs::exists(root / "b" / rel) || slurp(entry.path()) != slurp(root / "b" / rel)) {
      ++differing;
      o.notes.push_back("differs: " + rel.string());
    }
  }
  o.require(files >= 15 && differing == 0, std::to_string(files) + " output files compared, " + std::to_string(differing) +
                                               " differ (annotations, JSONL, stats, checkpoint, loss CSV, reports)");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by name; default is all of them.
  const std::set<std::string> only(argv + 1, argv + argc);
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  ExperimentOutcome experiment;
  bool experiment_ran = false;
  auto run_experiment_once = [&] {
    if (!experiment_ran) experiment = synthetic_experiment();
    experiment_ran = true;
  };
  const std::vector<Criterion> criteria = {
      {"gradient-integrity", gradient_integrity},
      {"equation-fidelity", equation_fidelity},
      {"temporal-symmetry", temporal_symmetry},
      {"lora-contract", lora_contract},
      {"metric-oracles", metric_oracles},
      {"dataset-fidelity", dataset_fidelity},
      {"synthetic-experiment", [&] { run_experiment_once(); return experiment.experiment; }},
      {"frame-budget-sweep", [&] { run_experiment_once(); return experiment.sweep; }},
      {"determinism", determinism},
  };
  int failures = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    ++ran;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.name, seconds_since(t0));
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failures, ran);
  return failures == 0 ? 0 : 1;
}
