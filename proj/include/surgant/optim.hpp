#pragma once

#include <vector>

#include "surgant/tensor.hpp"

namespace surgant {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over the tensors that require grad at construction time; frozen
/// tensors are dropped and never touched.
class Adam {
 public:
  Adam(const std::vector<Tensor>& params, AdamConfig config);

  // Applies one update using each parameter's grad scaled by `grad_scale`
  // (e.g. 1/batch for accumulated sums), then clears the grads.
  void step(double grad_scale = 1.0);

  std::size_t steps() const { return steps_; }
  const std::vector<Tensor>& params() const { return params_; }
  AdamConfig& config() { return config_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig config_;
  std::size_t steps_ = 0;
};

// Total element count of tensors that require grad.
std::size_t count_trainable(const std::vector<Tensor>& params);

}  // namespace surgant
