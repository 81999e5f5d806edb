#include <cmath>
#include <set>

#include "doctest.h"
#include "surgant/diagnostics.hpp"
#include "surgant/errors.hpp"
#include "surgant/model.hpp"
#include "surgant/ops.hpp"
#include "test_support.hpp"

using namespace surgant;
using surgant::testing::bitwise_equal;
using surgant::testing::max_abs_diff;
using surgant::testing::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.feature_dim = 6;
  c.hidden_dim = 8;
  c.model_dim = 8;
  c.lm_layers = 1;
  c.lm_heads = 2;
  c.fusion_heads = 2;
  c.ffn_expansion = 2;
  c.max_len = 32;
  return c;
}

void randomize_all(SurgAntModel& m, Rng& rng, double bound) {
  for (const auto& nt : m.named()) {
    Tensor t = nt.tensor;
    for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  }
}

}  // namespace

TEST_CASE("model: untrained head gives loss ln|V| for any question and clip") {
  Rng rng(3);
  const ModelConfig c = small_config();
  SurgAntModel m = SurgAntModel::create(c, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor frames = random_tensor(rng, {4, c.feature_dim}, -2, 2, false);
    const std::vector<int> q = {4, 5, static_cast<int>(6 + trial)};
    const std::vector<int> a = {7, 8, 9};
    Graph g;
    const double loss = m.loss(g, q, frames, a, ForwardContext{true, 5}).item();
    CHECK(std::abs(loss - std::log(20.0)) < 1e-6);
  }
}

TEST_CASE("model: closed gate makes fused prefix and answers independent of the clip") {
  Rng rng(4);
  for (GateMode mode : {GateMode::kClosed, GateMode::kLearned}) {
    ModelConfig c = small_config();
    c.gate = mode;
    SurgAntModel m = SurgAntModel::create(c, rng);
    randomize_all(m, rng, 0.5);
    if (mode == GateMode::kLearned) {
      // b_g = -100 saturates the sigmoid to exactly 0 in double precision.
      for (double& v : m.fusion().gate.bias.mutable_data()) v = -100.0;
      for (double& v : m.fusion().gate.weight.mutable_data()) v = 0.0;
    }
    const std::vector<int> q = {4, 9, 11, 5};
    const Tensor reference = random_tensor(rng, {8, c.feature_dim}, -1, 1, false);
    Graph g(false);
    const Tensor z0 = m.fuse(g, q, reference).fused;
    const auto answer0 = m.generate(q, reference, 6);
    for (int clip = 0; clip < 5; ++clip) {
      const Tensor other = random_tensor(rng, {8, c.feature_dim}, -5, 5, false);
      CHECK(bitwise_equal(z0, m.fuse(g, q, other).fused));
      CHECK(m.generate(q, other, 6) == answer0);
    }
  }
}

TEST_CASE("model: open gate lets the clip change the fused prefix") {
  Rng rng(5);
  SurgAntModel m = SurgAntModel::create(small_config(), rng);
  randomize_all(m, rng, 0.5);
  const std::vector<int> q = {4, 9};
  Graph g(false);
  const Tensor a = m.fuse(g, q, random_tensor(rng, {8, 6}, -1, 1, false)).fused;
  const Tensor b = m.fuse(g, q, random_tensor(rng, {8, 6}, -1, 1, false)).fused;
  CHECK(max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("model: mean-pool encoder ignores frame order, biGRU does not") {
  Rng rng(6);
  for (VideoEncoder enc : {VideoEncoder::kMeanPool, VideoEncoder::kBiGru}) {
    ModelConfig c = small_config();
    c.video = enc;
    SurgAntModel m = SurgAntModel::create(c, rng);
    randomize_all(m, rng, 0.5);
    const Tensor frames = random_tensor(rng, {6, c.feature_dim}, -1, 1, false);
    std::vector<double> rev(frames.numel());
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t d = 0; d < c.feature_dim; ++d) rev[t * c.feature_dim + d] = frames.at(5 - t, d);
    const Tensor reversed({6, c.feature_dim}, rev);
    const std::vector<int> q = {4, 5, 6};
    Graph g(false);
    const double diff = max_abs_diff(m.fuse(g, q, frames).fused, m.fuse(g, q, reversed).fused);
    if (enc == VideoEncoder::kMeanPool) {
      CHECK(diff < 1e-12);
    } else {
      CHECK(diff > 1e-6);
    }
  }
}

TEST_CASE("model: only the active video path and open gate train") {
  Rng rng(7);
  auto trainable = [](const SurgAntModel& m) {
    std::set<std::string> names;
    for (const auto& nt : m.named())
      if (nt.tensor.requires_grad()) names.insert(nt.name);
    return names;
  };
  ModelConfig c = small_config();
  const auto full = trainable(SurgAntModel::create(c, rng));
  CHECK(full.count("gru.fwd.W_z"));
  CHECK_FALSE(full.count("pool.weight"));
  CHECK(full.count("fusion.gate.W_g"));
  CHECK(full.count("lm.block0.c_attn.lora.A"));
  CHECK_FALSE(full.count("lm.block0.c_attn.weight"));

  c.video = VideoEncoder::kMeanPool;
  c.gate = GateMode::kClosed;
  const auto ablated = trainable(SurgAntModel::create(c, rng));
  CHECK(ablated.count("pool.weight"));
  CHECK_FALSE(ablated.count("gru.fwd.W_z"));
  CHECK_FALSE(ablated.count("fusion.gate.W_g"));
  CHECK_FALSE(ablated.count("fusion.gate.b_g"));
}

TEST_CASE("model: parameter names are unique") {
  Rng rng(8);
  const SurgAntModel m = SurgAntModel::create(small_config(), rng);
  std::set<std::string> seen;
  for (const auto& nt : m.named()) CHECK(seen.insert(nt.name).second);
}

TEST_CASE("model: input validation") {
  Rng rng(9);
  const SurgAntModel m = SurgAntModel::create(small_config(), rng);
  Graph g(false);
  CHECK_THROWS_AS(m.fuse(g, std::vector<int>{4}, random_tensor(rng, {4, 5}, -1, 1, false)), ShapeError);
  CHECK_THROWS_AS(m.fuse(g, std::vector<int>{}, random_tensor(rng, {4, 6}, -1, 1, false)), InputError);
  CHECK_THROWS_AS(parse_video_encoder("lstm"), ConfigError);
  CHECK_THROWS_AS(parse_gate_mode("open"), ConfigError);
}

TEST_CASE("teacher_forced_hits skips ignored targets") {
  const Tensor logits = Tensor::matrix(3, 3, {0, 1, 0, 2, 0, 0, 0, 0, 5});
  const std::vector<int> targets = {1, 1, kIgnoreIndex};
  const TokenHits h = teacher_forced_hits(logits, targets);
  CHECK(h.total == 2);
  CHECK(h.hits == 1);
}

TEST_CASE("gradcheck: every standard block passes and at least nine are listed") {
  const auto results = run_gradcheck(standard_grad_blocks(7), 7);
  CHECK(results.size() >= 9);
  std::set<std::string> names;
  for (const auto& r : results) {
    names.insert(r.name);
    CHECK_MESSAGE(r.pass, r.name << " max rel err " << r.max_relative_error);
  }
  for (const char* expected : {"gru.forward", "gru.backward", "attn.W_Q", "attn.W_K", "attn.W_V", "attn.W_O",
                               "gate.W_g/b_g", "ffn", "layernorm", "lora.A/B", "lm"})
    CHECK(names.count(expected));
}

TEST_CASE("gradcheck: a corrupted backward is reported as failing") {
  Rng rng(10);
  Tensor w = random_tensor(rng, {3, 3});
  // y = 2w on the forward pass, but the backward claims dy/dw = 3.
  auto broken = [w](Graph& g) {
    std::vector<double> out(w.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * w[i];
    Tensor y = g.record(w.shape(), std::move(out), {&w});
    if (y.requires_grad()) {
      g.set_backward([w](const Tensor& o) {
        auto gw = grad_sink(w);
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += 3.0 * o.grad()[i];
      });
    }
    return y;
  };
  std::vector<GradBlock> blocks = standard_grad_blocks(7);
  blocks.push_back({"broken", broken, {w}});
  const auto results = run_gradcheck(blocks, 7);
  CHECK_FALSE(results.back().pass);
  CHECK(results.back().max_relative_error > 0.3);
  for (std::size_t i = 0; i + 1 < results.size(); ++i) CHECK(results[i].pass);
  CHECK(gradcheck_table(results).find("broken") != std::string::npos);
}
