#pragma once

#include <functional>
#include <string>
#include <vector>

#include "surgant/tensor.hpp"

namespace surgant {

inline constexpr double kGradcheckTolerance = 1e-4;

// One parameter block: a forward pass over current parameter values and the
// tensors whose gradients are checked.
struct GradBlock {
  std::string name;
  std::function<Tensor(Graph&)> forward;
  std::vector<Tensor> params;
};

struct GradBlockResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t entries = 0;
  bool pass = false;
};

// Every trainable block of the model at tiny dimensions, deterministic in seed.
std::vector<GradBlock> standard_grad_blocks(std::uint64_t seed);

// Random-projection objective, one backward pass, central differences per entry.
std::vector<GradBlockResult> run_gradcheck(const std::vector<GradBlock>& blocks, std::uint64_t seed,
                                           double tolerance = kGradcheckTolerance);

std::string gradcheck_table(const std::vector<GradBlockResult>& results);
std::string gradcheck_json(const std::vector<GradBlockResult>& results);

}  // namespace surgant
