#pragma once

#include <functional>
#include <vector>

#include "surgant/gradcheck.hpp"
#include "surgant/ops.hpp"
#include "test_support.hpp"

namespace surgant::testing {

// Builds an output tensor from the current parameter values on the given graph.
using Forward = std::function<Tensor(Graph&)>;

// Random-projection loss, backward once, then central differences for every
// listed tensor. Returns the worst relative error.
inline double worst_gradient_error(const Forward& forward, const std::vector<Tensor>& wrt, Rng& rng) {
  Tensor probe;
  {
    Graph g(false);
    probe = random_tensor(rng, forward(g).shape(), -1.0, 1.0, false);
  }
  for (Tensor t : wrt) t.clear_grad();
  {
    Graph g;
    g.backward(weighted_sum(g, forward(g), probe));
  }
  auto objective = [&] {
    Graph g(false);
    return weighted_sum(g, forward(g), probe).item();
  };
  double worst = 0.0;
  for (const Tensor& t : wrt) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    worst = std::max(worst, compare_with_finite_differences(objective, t, analytic).max_relative_error);
  }
  return worst;
}

}  // namespace surgant::testing
