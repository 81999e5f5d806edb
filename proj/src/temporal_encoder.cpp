#include "surgant/temporal_encoder.hpp"

#include <cmath>

#include "surgant/errors.hpp"
#include "surgant/ops.hpp"

namespace surgant {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(data), true);
}

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (!t.defined() || t.shape() != shape) {
    throw ShapeError(std::string("GRU ") + what + " must be " + shape_to_string(shape) + ", got " +
                     (t.defined() ? shape_to_string(t.shape()) : std::string("undefined")));
  }
}

}  // namespace

GruCellParams GruCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  const std::size_t d = input_dim, h = hidden_dim;
  GruCellParams p;
  p.input_dim = d;
  p.hidden_dim = h;
  p.input_update = Tensor::zeros({h, d}, true);
  p.hidden_update = Tensor::zeros({h, h}, true);
  p.bias_update = Tensor::zeros({h}, true);
  p.input_reset = Tensor::zeros({h, d}, true);
  p.hidden_reset = Tensor::zeros({h, h}, true);
  p.bias_reset = Tensor::zeros({h}, true);
  p.input_candidate = Tensor::zeros({h, d}, true);
  p.hidden_candidate = Tensor::zeros({h, h}, true);
  p.bias_candidate = Tensor::zeros({h}, true);
  return p;
}

GruCellParams GruCellParams::random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  const std::size_t d = input_dim, h = hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  GruCellParams p;
  p.input_dim = d;
  p.hidden_dim = h;
  p.input_update = uniform_tensor({h, d}, bound, rng);
  p.hidden_update = uniform_tensor({h, h}, bound, rng);
  p.bias_update = uniform_tensor({h}, bound, rng);
  p.input_reset = uniform_tensor({h, d}, bound, rng);
  p.hidden_reset = uniform_tensor({h, h}, bound, rng);
  p.bias_reset = uniform_tensor({h}, bound, rng);
  p.input_candidate = uniform_tensor({h, d}, bound, rng);
  p.hidden_candidate = uniform_tensor({h, h}, bound, rng);
  p.bias_candidate = uniform_tensor({h}, bound, rng);
  return p;
}

void GruCellParams::validate() const {
  const std::size_t d = input_dim, h = hidden_dim;
  if (d == 0 || h == 0) throw ShapeError("GRU dimensions must be positive");
  expect_shape(input_update, {h, d}, "W_z");
  expect_shape(input_reset, {h, d}, "W_r");
  expect_shape(input_candidate, {h, d}, "W_h");
  expect_shape(hidden_update, {h, h}, "U_z");
  expect_shape(hidden_reset, {h, h}, "U_r");
  expect_shape(hidden_candidate, {h, h}, "U_h");
  expect_shape(bias_update, {h}, "b_z");
  expect_shape(bias_reset, {h}, "b_r");
  expect_shape(bias_candidate, {h}, "b_h");
}

std::vector<NamedTensor> GruCellParams::named(const std::string& prefix) const {
  return {
      {prefix + ".W_z", input_update},     {prefix + ".U_z", hidden_update},    {prefix + ".b_z", bias_update},
      {prefix + ".W_r", input_reset},      {prefix + ".U_r", hidden_reset},     {prefix + ".b_r", bias_reset},
      {prefix + ".W_h", input_candidate},  {prefix + ".U_h", hidden_candidate}, {prefix + ".b_h", bias_candidate},
  };
}

BiGruParams BiGruParams::random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, bool tied) {
  BiGruParams p;
  p.forward = GruCellParams::random(input_dim, hidden_dim, rng);
  if (!tied) p.backward = GruCellParams::random(input_dim, hidden_dim, rng);
  p.tied = tied;
  return p;
}

std::vector<NamedTensor> BiGruParams::named(const std::string& prefix) const {
  auto out = forward.named(prefix + ".fwd");
  if (!tied) {
    auto bwd = backward.named(prefix + ".bwd");
    out.insert(out.end(), bwd.begin(), bwd.end());
  }
  return out;
}

Tensor gru_step(Graph& g, const GruCellParams& cell, const Tensor& x_t, const Tensor& h_prev) {
  if (x_t.rows() != 1 || x_t.cols() != cell.input_dim) {
    throw ShapeError("gru_step: input " + shape_to_string(x_t.shape()) + " does not match cell input dim " +
                     std::to_string(cell.input_dim));
  }
  if (h_prev.rows() != 1 || h_prev.cols() != cell.hidden_dim) {
    throw ShapeError("gru_step: hidden state " + shape_to_string(h_prev.shape()) + " does not match hidden dim " +
                     std::to_string(cell.hidden_dim));
  }
  const Tensor update = sigmoid(
      g, add(g, linear(g, x_t, cell.input_update, &cell.bias_update), matmul_nt(g, h_prev, cell.hidden_update)));
  const Tensor reset = sigmoid(
      g, add(g, linear(g, x_t, cell.input_reset, &cell.bias_reset), matmul_nt(g, h_prev, cell.hidden_reset)));
  const Tensor candidate =
      tanh(g, add(g, linear(g, x_t, cell.input_candidate, &cell.bias_candidate),
                  matmul_nt(g, mul(g, reset, h_prev), cell.hidden_candidate)));
  const Tensor keep = sub(g, Tensor::filled({1, cell.hidden_dim}, 1.0), update);
  return add(g, mul(g, keep, h_prev), mul(g, update, candidate));
}

Tensor encode_bidirectional(Graph& g, const BiGruParams& params, const Tensor& frames) {
  const GruCellParams& fwd = params.forward;
  const GruCellParams& bwd = params.backward_cell();
  fwd.validate();
  bwd.validate();
  if (fwd.hidden_dim != bwd.hidden_dim || fwd.input_dim != bwd.input_dim) {
    throw ShapeError("biGRU directions must share input and hidden dims");
  }
  if (frames.rank() != 2 || frames.cols() != fwd.input_dim) {
    throw ShapeError("encode_bidirectional: frames " + shape_to_string(frames.shape()) +
                     " do not match input dim " + std::to_string(fwd.input_dim));
  }
  const std::size_t steps = frames.rows();
  std::vector<Tensor> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t] = slice_rows(g, frames, t, t + 1);

  std::vector<Tensor> forward_states(steps), backward_states(steps);
  Tensor h = Tensor::zeros({1, fwd.hidden_dim});
  for (std::size_t t = 0; t < steps; ++t) h = forward_states[t] = gru_step(g, fwd, inputs[t], h);
  h = Tensor::zeros({1, bwd.hidden_dim});
  for (std::size_t t = steps; t-- > 0;) h = backward_states[t] = gru_step(g, bwd, inputs[t], h);

  std::vector<Tensor> rows(steps);
  for (std::size_t t = 0; t < steps; ++t) rows[t] = add(g, forward_states[t], backward_states[t]);
  return concat_rows(g, rows);
}

Tensor stack_frames(std::span<const std::vector<double>> frames) {
  if (frames.empty()) throw InputError("frame sequence is empty (T = 0)");
  const std::size_t d = frames.front().size();
  std::vector<double> data;
  data.reserve(frames.size() * d);
  for (const auto& f : frames) {
    if (f.size() != d) throw ShapeError("ragged frame features: " + std::to_string(f.size()) + " vs " + std::to_string(d));
    data.insert(data.end(), f.begin(), f.end());
  }
  return Tensor::matrix(frames.size(), d, std::move(data));
}

}  // namespace surgant
