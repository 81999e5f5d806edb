#include <cmath>

#include "doctest.h"
#include "grad_harness.hpp"
#include "surgant/errors.hpp"
#include "surgant/lora.hpp"
#include "surgant/ops.hpp"
#include "surgant/optim.hpp"

using namespace surgant;
using surgant::testing::bitwise_equal;
using surgant::testing::max_abs_diff;
using surgant::testing::random_tensor;
using surgant::testing::worst_gradient_error;

namespace {

void randomize(Tensor t, Rng& rng, double bound) {
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
}

Tensor toy_loss(Graph& g, const AdaptableLinear& layer, const Tensor& x, const Tensor& target,
                const ForwardContext& ctx) {
  Tensor y = layer.forward(g, x, ctx);
  Tensor diff = sub(g, y, target);
  return sum(g, mul(g, diff, diff));
}

}  // namespace

TEST_CASE("wrap: fresh adapter leaves the layer output bit-identical") {
  Rng rng(1);
  auto layer = AdaptableLinear::random("proj", 12, 10, rng);
  randomize(layer.bias, rng, 0.5);
  Tensor x = random_tensor(rng, {5, 12}, -2, 2, false);
  Graph g(false);
  const Tensor before = layer.forward(g, x, {});
  layer.enable_lora({}, rng);
  CHECK(bitwise_equal(before, layer.forward(g, x, {})));
  CHECK(bitwise_equal(before, layer.forward(g, x, {true, 99})));
  for (double v : layer.lora->up.data()) CHECK(v == 0.0);
  CHECK_FALSE(layer.weight.requires_grad());
  CHECK_FALSE(layer.bias.requires_grad());
}

TEST_CASE("wrap: default hyperparameters give scale 2") {
  LoraConfig config;
  CHECK(config.rank == 8);
  CHECK(config.alpha == 16.0);
  CHECK(config.dropout == 0.1);
  CHECK(config.scale() == 2.0);
  Rng rng(2);
  auto adapter = wrap("w", Tensor::zeros({16, 16}, true), config, rng);
  CHECK(adapter.scale() == 2.0);
  CHECK(adapter.down.shape() == Shape{8, 16});
  CHECK(adapter.up.shape() == Shape{16, 8});
}

TEST_CASE("wrap: rank bounds") {
  Rng rng(3);
  CHECK_THROWS_AS(wrap("w", Tensor::zeros({6, 4}), {5, 16, 0.1}, rng), ConfigError);
  CHECK_THROWS_AS(wrap("w", Tensor::zeros({6, 4}), {0, 16, 0.1}, rng), ConfigError);
  CHECK_THROWS_AS(wrap("w", Tensor::zeros({6, 4}), {2, 16, 1.0}, rng), ConfigError);
  CHECK_NOTHROW(wrap("w", Tensor::zeros({6, 4}), {4, 16, 0.1}, rng));
  auto layer = AdaptableLinear::random("l", 4, 4, rng);
  layer.enable_lora({2, 4, 0.0}, rng);
  CHECK_THROWS_AS(layer.enable_lora({2, 4, 0.0}, rng), ConfigError);
}

TEST_CASE("wrap: one step only moves the adapter") {
  Rng rng(4);
  auto layer = AdaptableLinear::random("proj", 9, 9, rng);
  layer.enable_lora({}, rng);
  Tensor x = random_tensor(rng, {3, 9}, -1, 1, false);
  Tensor target = random_tensor(rng, {3, 9}, -1, 1, false);
  Graph g;
  g.backward(toy_loss(g, layer, x, target, {true, 7}));
  CHECK_FALSE(layer.weight.has_grad());
  CHECK_FALSE(layer.bias.has_grad());
  REQUIRE(layer.lora->up.has_grad());
  REQUIRE(layer.lora->down.has_grad());
  double up_norm = 0.0;
  for (double v : layer.lora->up.grad()) up_norm += std::abs(v);
  CHECK(up_norm > 0.0);
  // B = 0 blocks the signal into A on the very first step.
  for (double v : layer.lora->down.grad()) CHECK(v == 0.0);
}

TEST_CASE("merge: zero B reproduces the base weight exactly") {
  Rng rng(5);
  Tensor w = random_tensor(rng, {6, 5});
  auto adapter = wrap("w", w, {3, 16, 0.1}, rng);
  CHECK(bitwise_equal(adapter.merge(), w));
}

TEST_CASE("merge: rank-1 hand oracle") {
  Rng rng(6);
  auto adapter = wrap("w", Tensor::matrix(1, 1, {1.0}), {1, 2, 0.0}, rng);
  adapter.up.mutable_data()[0] = 2.0;
  adapter.down.mutable_data()[0] = 3.0;
  CHECK(adapter.scale() == 2.0);
  CHECK(adapter.merge().item() == 13.0);
}

TEST_CASE("merge: merged forward matches adapted forward") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 8 + rng.below(8), out = 8 + rng.below(8);
    auto layer = AdaptableLinear::random("l", in, out, rng);
    randomize(layer.bias, rng, 1.0);
    layer.enable_lora({}, rng);
    randomize(layer.lora->up, rng, 0.3);
    Tensor x = random_tensor(rng, {4, in}, -2, 2, false);
    Graph g(false);
    const Tensor adapted = layer.forward(g, x, {});
    const Tensor merged = linear(g, x, layer.lora->merge(), &layer.bias);
    CHECK(max_abs_diff(adapted, merged) < 1e-12);
  }
}

TEST_CASE("lora: trainable parameter count is r * (in + out)") {
  Rng rng(8);
  const std::size_t shapes[][2] = {{64, 192}, {64, 64}, {256, 64}, {16, 48}};
  for (const auto& s : shapes) {
    auto layer = AdaptableLinear::random("l", s[0], s[1], rng);
    layer.enable_lora({}, rng);
    std::vector<Tensor> params;
    for (const auto& nt : layer.named()) params.push_back(nt.tensor);
    CHECK(count_trainable(params) == 8 * (s[0] + s[1]));
    CHECK(count_trainable(params) < s[0] * s[1]);
    CHECK(layer.lora->trainable_count() == 8 * (s[0] + s[1]));
  }
}

TEST_CASE("lora: 100 optimizer steps leave the base bit-identical") {
  Rng rng(9);
  auto layer = AdaptableLinear::random("proj", 10, 12, rng);
  randomize(layer.bias, rng, 0.5);
  layer.enable_lora({}, rng);
  const Tensor weight0 = layer.weight.clone(), bias0 = layer.bias.clone();
  Tensor x = random_tensor(rng, {6, 10}, -1, 1, false);
  Tensor target = random_tensor(rng, {6, 12}, -1, 1, false);
  std::vector<Tensor> params;
  for (const auto& nt : layer.named()) params.push_back(nt.tensor);
  Adam adam(params, {.lr = 1e-2});
  CHECK(adam.params().size() == 2);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 100; ++step) {
    Graph g;
    Tensor loss = toy_loss(g, layer, x, target, {true, static_cast<std::uint64_t>(step)});
    (step == 0 ? first : last) = loss.item();
    g.backward(loss);
    adam.step();
  }
  CHECK(bitwise_equal(layer.weight, weight0));
  CHECK(bitwise_equal(layer.bias, bias0));
  CHECK(last < first);
}

TEST_CASE("lora: dropout is train-only and seeded per site") {
  Rng rng(10);
  auto layer = AdaptableLinear::random("proj", 8, 8, rng);
  layer.enable_lora({4, 8, 0.5}, rng);
  randomize(layer.lora->up, rng, 1.0);
  Tensor x = random_tensor(rng, {3, 8}, -1, 1, false);
  Graph g(false);
  const Tensor eval = layer.forward(g, x, {false, 1});
  CHECK(bitwise_equal(eval, layer.forward(g, x, {false, 2})));
  const Tensor train1 = layer.forward(g, x, {true, 1});
  CHECK(bitwise_equal(train1, layer.forward(g, x, {true, 1})));
  CHECK_FALSE(bitwise_equal(train1, eval));
  CHECK_FALSE(bitwise_equal(train1, layer.forward(g, x, {true, 2})));
  CHECK(ForwardContext{true, 1}.site_seed("a") != ForwardContext{true, 1}.site_seed("b"));
}

TEST_CASE("lora: gradcheck of both adapter factors") {
  Rng rng(11);
  auto layer = AdaptableLinear::random("proj", 6, 5, rng);
  layer.enable_lora({3, 6, 0.0}, rng);
  randomize(layer.lora->up, rng, 0.5);
  Tensor x = random_tensor(rng, {4, 6});
  const double err = worst_gradient_error([&](Graph& g) { return layer.forward(g, x, {}); },
                                          {layer.lora->down, layer.lora->up, x}, rng);
  CHECK(err < 1e-4);
}

TEST_CASE("lora: checkpoint names") {
  Rng rng(12);
  auto layer = AdaptableLinear::random("block0.c_attn", 4, 12, rng);
  layer.enable_lora({2, 4, 0.1}, rng);
  auto named = layer.named();
  REQUIRE(named.size() == 4);
  CHECK(named[2].name == "block0.c_attn.lora.A");
  CHECK(named[3].name == "block0.c_attn.lora.B");
}
