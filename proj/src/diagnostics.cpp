#include "surgant/diagnostics.hpp"

#include <cstdio>
#include <memory>

#include "json.hpp"
#include "surgant/decoder_lm.hpp"
#include "surgant/gated_fusion.hpp"
#include "surgant/gradcheck.hpp"
#include "surgant/lora.hpp"
#include "surgant/model.hpp"
#include "surgant/ops.hpp"
#include "surgant/rng.hpp"
#include "surgant/temporal_encoder.hpp"

namespace surgant {
namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor({r, c}, std::move(v));
}

std::vector<Tensor> tensors_of(const std::vector<NamedTensor>& named) {
  std::vector<Tensor> out;
  for (const auto& nt : named)
    if (nt.tensor.requires_grad()) out.push_back(nt.tensor);
  return out;
}

// Nudges every entry so no block sits at a degenerate point such as B = 0.
void jitter(std::vector<Tensor> params, Rng& rng, double scale) {
  for (Tensor& t : params)
    for (double& v : t.mutable_data()) v += rng.uniform(-scale, scale);
}

}  // namespace

std::vector<GradBlock> standard_grad_blocks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradBlock> blocks;
  constexpr std::size_t D = 3, H = 4, T = 4, L = 3, DM = 4;

  auto gru = std::make_shared<BiGruParams>(BiGruParams::random(D, H, rng));
  const Tensor frames = random_matrix(rng, T, D);
  auto encode = [gru, frames](Graph& g) { return encode_bidirectional(g, *gru, frames); };
  blocks.push_back({"gru.forward", encode, tensors_of(gru->forward.named("f"))});
  blocks.push_back({"gru.backward", encode, tensors_of(gru->backward.named("b"))});

  auto fusion = std::make_shared<FusionParams>(FusionParams::random(DM, H, 2, 2, rng));
  jitter(tensors_of(fusion->named("x")), rng, 0.3);
  const Tensor text = random_matrix(rng, L, DM);
  const Tensor video = random_matrix(rng, T, H);
  auto fuse = [fusion, text, video](Graph& g) { return fusion_block(g, *fusion, text, video, GateMode::kLearned).fused; };
  const CrossAttnParams& attn = fusion->attention;
  blocks.push_back({"attn.W_Q", fuse, attn.query});
  blocks.push_back({"attn.W_K", fuse, attn.key});
  blocks.push_back({"attn.W_V", fuse, attn.value});
  blocks.push_back({"attn.W_O", fuse, {attn.output}});
  blocks.push_back({"gate.W_g/b_g", fuse, {fusion->gate.weight, fusion->gate.bias}});
  blocks.push_back({"ffn", fuse, {fusion->ffn.up_weight, fusion->ffn.up_bias, fusion->ffn.down_weight, fusion->ffn.down_bias}});
  blocks.push_back({"layernorm", fuse,
                    {fusion->gate_norm.gain, fusion->gate_norm.bias, fusion->output_norm.gain, fusion->output_norm.bias}});

  auto layer = std::make_shared<AdaptableLinear>(AdaptableLinear::random("probe", 5, 4, rng));
  LoraConfig lc;
  lc.rank = 2;
  lc.alpha = 4.0;
  lc.dropout = 0.25;
  layer->enable_lora(lc, rng);
  jitter({layer->lora->up}, rng, 0.5);
  const Tensor x = random_matrix(rng, 3, 5);
  blocks.push_back({"lora.A/B",
                    [layer, x](Graph& g) { return layer->forward(g, x, ForwardContext{true, 11}); },
                    {layer->lora->down, layer->lora->up}});

  DecoderConfig dc;
  dc.vocab_size = 7;
  dc.model_dim = DM;
  dc.n_layers = 1;
  dc.n_heads = 2;
  dc.max_len = 8;
  auto lm = std::make_shared<DecoderLm>(DecoderLm::random(dc, rng));
  lm->enable_lora(lc, rng);
  jitter(tensors_of(lm->named("lm")), rng, 0.2);
  const Tensor prefix = random_matrix(rng, 2, DM);
  const std::vector<int> ids = {1, 4, 5};
  blocks.push_back({"lm", [lm, prefix, ids](Graph& g) { return lm->forward(g, prefix, ids, ForwardContext{}); },
                    tensors_of(lm->named("lm"))});

  ModelConfig mc;
  mc.vocab_size = 7;
  mc.feature_dim = D;
  mc.hidden_dim = H;
  mc.model_dim = DM;
  mc.lm_layers = 1;
  mc.lm_heads = 2;
  mc.fusion_heads = 2;
  mc.ffn_expansion = 2;
  mc.max_len = 12;
  mc.lora = lc;
  auto model = std::make_shared<SurgAntModel>(SurgAntModel::create(mc, rng));
  jitter(tensors_of(model->named()), rng, 0.2);
  const std::vector<int> question = {4, 5, 6};
  const std::vector<int> answer = {5, 4};
  blocks.push_back({"model.loss",
                    [model, frames, question, answer](Graph& g) {
                      return model->loss(g, question, frames, answer, ForwardContext{true, 3});
                    },
                    tensors_of(model->named())});
  return blocks;
}

std::vector<GradBlockResult> run_gradcheck(const std::vector<GradBlock>& blocks, std::uint64_t seed, double tolerance) {
  Rng rng(seed ^ 0x9badc0deULL);
  std::vector<GradBlockResult> results;
  for (const GradBlock& block : blocks) {
    Tensor probe;
    {
      Graph g(false);
      const Tensor out = block.forward(g);
      std::vector<double> w(out.numel());
      for (double& v : w) v = rng.uniform(-1.0, 1.0);
      probe = Tensor(out.shape(), std::move(w));
    }
    for (Tensor t : block.params) t.clear_grad();
    {
      Graph g;
      g.backward(weighted_sum(g, block.forward(g), probe));
    }
    auto objective = [&] {
      Graph g(false);
      return weighted_sum(g, block.forward(g), probe).item();
    };
    GradBlockResult r;
    r.name = block.name;
    for (const Tensor& t : block.params) {
      std::vector<double> analytic(t.numel(), 0.0);
      if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
      const GradientComparison c = compare_with_finite_differences(objective, t, analytic);
      r.max_relative_error = std::max(r.max_relative_error, c.max_relative_error);
      r.entries += c.entries;
    }
    r.pass = r.entries > 0 && r.max_relative_error < tolerance;
    results.push_back(r);
  }
  return results;
}

std::string gradcheck_table(const std::vector<GradBlockResult>& results) {
  std::string out = "block            entries  max_rel_err  status\n";
  char line[128];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-16s %7zu  %11.3e  %s\n", r.name.c_str(), r.entries, r.max_relative_error,
                  r.pass ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

std::string gradcheck_json(const std::vector<GradBlockResult>& results) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["block"] = r.name;
    j["entries"] = r.entries;
    j["max_relative_error"] = r.max_relative_error;
    j["pass"] = r.pass;
    a.push_back(j);
  }
  return a.dump(2);
}

}  // namespace surgant
