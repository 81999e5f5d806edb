#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surgant/checkpoint.hpp"
#include "surgant/rng.hpp"
#include "surgant/tensor.hpp"

namespace surgant {

struct LoraConfig {
  std::size_t rank = 8;
  double alpha = 16.0;
  double dropout = 0.1;

  double scale() const { return alpha / static_cast<double>(rank); }
};

// Training flag plus the seed that dropout sites derive their masks from.
struct ForwardContext {
  bool training = false;
  std::uint64_t seed = 0;

  // Distinct, reproducible seed for a named dropout site.
  std::uint64_t site_seed(const std::string& site) const;
};

/// Low-rank update (alpha/r) * B * A on top of a frozen base weight (out x in).
struct LoraAdapter {
  Tensor base;   // shared with the wrapped layer, never trained
  Tensor down;   // A: r x in
  Tensor up;     // B: out x r, zero at creation
  std::size_t rank = 0;
  double alpha = 0.0;
  double dropout = 0.0;

  double scale() const { return alpha / static_cast<double>(rank); }
  std::size_t trainable_count() const { return down.numel() + up.numel(); }

  // W + (alpha/r) * B * A as a fresh tensor.
  Tensor merge() const;
};

// Freezes `weight` and attaches an adapter. Throws ConfigError when
// r is 0 or exceeds min(in, out).
LoraAdapter wrap(const std::string& layer, Tensor weight, const LoraConfig& config, Rng& rng);

/// Affine layer y = x W^T + b that may carry a LoRA adapter.
struct AdaptableLinear {
  std::string name;
  Tensor weight;   // out x in
  Tensor bias;     // out
  std::optional<LoraAdapter> lora;

  static AdaptableLinear random(std::string name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  // Wraps the weight and also freezes the bias, so only A and B train.
  void enable_lora(const LoraConfig& config, Rng& rng);

  Tensor forward(Graph& g, const Tensor& x, const ForwardContext& ctx) const;

  // weight/bias plus, when wrapped, `<name>.lora.A` and `<name>.lora.B`.
  std::vector<NamedTensor> named() const;
};

}  // namespace surgant
