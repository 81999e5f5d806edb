#include "surgant/optim.hpp"

#include <cmath>

namespace surgant {

Adam::Adam(const std::vector<Tensor>& params, AdamConfig config) : config_(config) {
  for (const Tensor& p : params) {
    if (!p.requires_grad()) continue;
    params_.push_back(p);
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correct1 = 1.0 - std::pow(config_.beta1, t);
  const double correct2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    auto w = p.mutable_data();
    const auto grad = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = grad[i] * grad_scale;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= config_.lr * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + config_.eps);
    }
    p.clear_grad();
  }
}

std::size_t count_trainable(const std::vector<Tensor>& params) {
  std::size_t n = 0;
  for (const Tensor& p : params)
    if (p.requires_grad()) n += p.numel();
  return n;
}

}  // namespace surgant
