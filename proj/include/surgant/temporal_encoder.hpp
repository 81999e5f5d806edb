#pragma once

#include <span>
#include <string>
#include <vector>

#include "surgant/checkpoint.hpp"
#include "surgant/rng.hpp"
#include "surgant/tensor.hpp"

namespace surgant {

/// One GRU cell. Input-to-hidden weights are (H x D), hidden-to-hidden (H x H):
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   c = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * c
struct GruCellParams {
  Tensor input_update, hidden_update, bias_update;
  Tensor input_reset, hidden_reset, bias_reset;
  Tensor input_candidate, hidden_candidate, bias_candidate;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static GruCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  // Uniform(-1/sqrt(H), 1/sqrt(H)) for every block.
  static GruCellParams random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  void validate() const;
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

struct BiGruParams {
  GruCellParams forward;
  GruCellParams backward;
  // When set, the backward direction reuses the forward cell.
  bool tied = false;

  static BiGruParams random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, bool tied = false);
  const GruCellParams& backward_cell() const { return tied ? forward : backward; }
  std::size_t hidden_dim() const { return forward.hidden_dim; }
  std::vector<NamedTensor> named(const std::string& prefix) const;
};

// x_t and h_prev are single rows: [1 x D] and [1 x H].
Tensor gru_step(Graph& g, const GruCellParams& cell, const Tensor& x_t, const Tensor& h_prev);

// Row t of the result is forward_state(t) + backward_state(t); both directions
// start from zero hidden state and the backward pass consumes frames T..1.
Tensor encode_bidirectional(Graph& g, const BiGruParams& params, const Tensor& frames);

// Stacks per-frame feature vectors into a [T x D] matrix. Throws InputError on
// an empty sequence and ShapeError on ragged frames.
Tensor stack_frames(std::span<const std::vector<double>> frames);

}  // namespace surgant
