#include "surgant/lora.hpp"

#include <algorithm>
#include <cmath>

#include "surgant/errors.hpp"
#include "surgant/ops.hpp"

namespace surgant {

namespace {

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t ForwardContext::site_seed(const std::string& site) const { return splitmix64(seed ^ fnv1a(site)); }

Tensor LoraAdapter::merge() const {
  const std::size_t out = base.dim(0), in = base.dim(1);
  std::vector<double> merged(base.data().begin(), base.data().end());
  std::vector<double> delta(out * in, 0.0);
  kernels::gemm_nn(out, rank, in, up.data().data(), down.data().data(), delta.data());
  const double s = scale();
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i] += s * delta[i];
  return Tensor({out, in}, std::move(merged));
}

LoraAdapter wrap(const std::string& layer, Tensor weight, const LoraConfig& config, Rng& rng) {
  if (weight.rank() != 2) throw ShapeError(layer + ": LoRA needs a 2-D weight, got " + shape_to_string(weight.shape()));
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  if (config.rank == 0 || config.rank > std::min(in, out)) {
    throw ConfigError(layer + ": LoRA rank " + std::to_string(config.rank) + " must lie in [1, " +
                      std::to_string(std::min(in, out)) + "]");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw ConfigError(layer + ": LoRA dropout must lie in [0,1)");
  }
  weight.set_requires_grad(false);
  weight.clear_grad();

  LoraAdapter a;
  a.base = weight;
  a.rank = config.rank;
  a.alpha = config.alpha;
  a.dropout = config.dropout;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> down(config.rank * in);
  for (double& v : down) v = rng.uniform(-bound, bound);
  a.down = Tensor({config.rank, in}, std::move(down), true);
  a.up = Tensor::zeros({out, config.rank}, true);
  return a;
}

AdaptableLinear AdaptableLinear::random(std::string name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(out * in);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return {std::move(name), Tensor({out, in}, std::move(w), true), Tensor::zeros({out}, true), std::nullopt};
}

void AdaptableLinear::enable_lora(const LoraConfig& config, Rng& rng) {
  if (lora) throw ConfigError(name + " already carries a LoRA adapter");
  lora = wrap(name, weight, config, rng);
  bias.set_requires_grad(false);
  bias.clear_grad();
}

Tensor AdaptableLinear::forward(Graph& g, const Tensor& x, const ForwardContext& ctx) const {
  Tensor y = linear(g, x, weight, &bias);
  if (!lora) return y;
  const Tensor dropped = dropout(g, x, lora->dropout, ctx.site_seed(name), ctx.training);
  const Tensor low = matmul_nt(g, matmul_nt(g, dropped, lora->down), lora->up);
  return add(g, y, scale(g, low, lora->scale()));
}

std::vector<NamedTensor> AdaptableLinear::named() const {
  std::vector<NamedTensor> out{{name + ".weight", weight}, {name + ".bias", bias}};
  if (lora) {
    out.push_back({name + ".lora.A", lora->down});
    out.push_back({name + ".lora.B", lora->up});
  }
  return out;
}

}  // namespace surgant
