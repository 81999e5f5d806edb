#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surgant/tensor.hpp"

namespace surgant {

// Population-variance layer norm epsilon used everywhere unless overridden.
inline constexpr double kLayerNormEps = 1e-5;

// Target id excluded from the cross-entropy mean.
inline constexpr int kIgnoreIndex = -1;

// Raw row-major kernels, exposed for reuse by inference-only code paths.
namespace kernels {
// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c);
}  // namespace kernels

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
// a * b^T, the natural form for row-vector inputs against (out x in) weights.
Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b);
Tensor transpose(Graph& g, const Tensor& a);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
// x[rows x n] + bias[n] broadcast over rows.
Tensor add_row(Graph& g, const Tensor& x, const Tensor& bias);
Tensor scale(Graph& g, const Tensor& x, double factor);

Tensor sigmoid(Graph& g, const Tensor& x);
Tensor tanh(Graph& g, const Tensor& x);

Tensor softmax_rows(Graph& g, const Tensor& x);
// Row i keeps columns j <= i + offset; the rest get probability exactly 0.
Tensor causal_softmax_rows(Graph& g, const Tensor& x, std::size_t offset = 0);

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
  // gain = 1, bias = 0, both trainable.
  static LayerNormParams identity(std::size_t dim);
};

// Normalizes each row over the last dimension; biased variance.
Tensor layernorm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps = kLayerNormEps);
Tensor layernorm(Graph& g, const Tensor& x, const LayerNormParams& params);

// Survivors are scaled by 1/(1-p); the mask is a pure function of (p, seed, index).
std::vector<double> dropout_mask(std::size_t n, double p, std::uint64_t seed);
// Identity (no op recorded) when !training or p == 0.
Tensor dropout(Graph& g, const Tensor& x, double p, std::uint64_t seed, bool training);

Tensor embedding_lookup(Graph& g, const Tensor& table, std::span<const int> ids);

// Mean negative log-likelihood over positions whose target != kIgnoreIndex.
Tensor cross_entropy_with_logits(Graph& g, const Tensor& logits, std::span<const int> targets);

Tensor concat_rows(Graph& g, std::span<const Tensor> parts);
Tensor concat_cols(Graph& g, std::span<const Tensor> parts);
Tensor slice_rows(Graph& g, const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(Graph& g, const Tensor& x, std::size_t begin, std::size_t end);
Tensor mean_rows(Graph& g, const Tensor& x);

Tensor sum(Graph& g, const Tensor& x);
// sum(x * weights) with constant weights; the usual random-projection probe loss.
Tensor weighted_sum(Graph& g, const Tensor& x, const Tensor& weights);

// x * W^T (+ b), W stored (out x in).
Tensor linear(Graph& g, const Tensor& x, const Tensor& weight, const Tensor* bias = nullptr);

}  // namespace surgant
