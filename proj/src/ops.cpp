#include "surgant/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "surgant/errors.hpp"
#include "surgant/rng.hpp"

namespace surgant {

namespace kernels {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace kernels

namespace {

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " + shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

// Applies an elementwise map whose derivative is expressible from the output.
template <typename Fwd, typename DerivFromOut>
Tensor unary(Graph& g, const Tensor& x, Fwd fwd, DerivFromOut deriv) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xd[i]);
  Tensor y = g.record(x.shape(), std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, deriv](const Tensor& o) {
      if (!x.requires_grad()) return;
      auto gx = grad_sink(x);
      const auto go = o.grad();
      const auto od = o.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * deriv(od[i]);
    });
  }
  return y;
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  Tensor y = g.record({m, n}, std::move(out), {&a, &b});
  if (y.requires_grad()) {
    g.set_backward([a, b, m, k, n](const Tensor& o) {
      const double* go = o.grad().data();
      if (a.requires_grad()) kernels::gemm_nt(m, n, k, go, b.data().data(), grad_sink(a).data());
      if (b.requires_grad()) kernels::gemm_tn(m, k, n, a.data().data(), go, grad_sink(b).data());
    });
  }
  return y;
}

Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw ShapeError("matmul_nt: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nt(m, k, n, a.data().data(), b.data().data(), out.data());
  Tensor y = g.record({m, n}, std::move(out), {&a, &b});
  if (y.requires_grad()) {
    g.set_backward([a, b, m, k, n](const Tensor& o) {
      const double* go = o.grad().data();
      // dA = G * B, dB = G^T * A
      if (a.requires_grad()) kernels::gemm_nn(m, n, k, go, b.data().data(), grad_sink(a).data());
      if (b.requires_grad()) kernels::gemm_tn(m, n, k, go, a.data().data(), grad_sink(b).data());
    });
  }
  return y;
}

Tensor transpose(Graph& g, const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto ad = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  Tensor y = g.record({n, m}, std::move(out), {&a});
  if (y.requires_grad()) {
    g.set_backward([a, m, n](const Tensor& o) {
      auto ga = grad_sink(a);
      const auto go = o.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
    });
  }
  return y;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor y = g.record(a.shape(), std::move(out), {&a, &b});
  if (y.requires_grad()) {
    g.set_backward([a, b](const Tensor& o) {
      const auto go = o.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = grad_sink(*t);
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += go[i];
      }
    });
  }
  return y;
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor y = g.record(a.shape(), std::move(out), {&a, &b});
  if (y.requires_grad()) {
    g.set_backward([a, b](const Tensor& o) {
      const auto go = o.grad();
      if (a.requires_grad()) {
        auto ga = grad_sink(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
      }
      if (b.requires_grad()) {
        auto gb = grad_sink(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return y;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor y = g.record(a.shape(), std::move(out), {&a, &b});
  if (y.requires_grad()) {
    g.set_backward([a, b](const Tensor& o) {
      const auto go = o.grad();
      if (a.requires_grad()) {
        auto ga = grad_sink(a);
        const auto bd = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bd[i];
      }
      if (b.requires_grad()) {
        auto gb = grad_sink(b);
        const auto ad = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * ad[i];
      }
    });
  }
  return y;
}

Tensor add_row(Graph& g, const Tensor& x, const Tensor& bias) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (bias.numel() != n) {
    throw ShapeError("add_row: bias " + shape_to_string(bias.shape()) + " does not match row width of " +
                     shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bd[j];
  Tensor y = g.record(x.shape(), std::move(out), {&x, &bias});
  if (y.requires_grad()) {
    g.set_backward([x, bias, rows, n](const Tensor& o) {
      const auto go = o.grad();
      if (x.requires_grad()) {
        auto gx = grad_sink(x);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
      }
      if (bias.requires_grad()) {
        auto gb = grad_sink(bias);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < n; ++j) gb[j] += go[r * n + j];
      }
    });
  }
  return y;
}

Tensor scale(Graph& g, const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
  Tensor y = g.record(x.shape(), std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, factor](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return y;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  return unary(
      g, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double s) { return s * (1.0 - s); });
}

Tensor tanh(Graph& g, const Tensor& x) {
  return unary(
      g, x, [](double v) { return std::tanh(v); }, [](double t) { return 1.0 - t * t; });
}

namespace {

Tensor softmax_impl(Graph& g, const Tensor& x, bool causal, std::size_t offset) {
  const std::size_t rows = x.rows(), n = x.cols();
  const auto xd = x.data();
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double* o = out.data() + r * n;
    const std::size_t width = causal ? std::min(n, r + offset + 1) : n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < width; ++j) {
      if (std::isnan(in[j])) throw NumericError("softmax_rows: NaN input at row " + std::to_string(r));
      mx = std::max(mx, in[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  Tensor y = g.record(x.shape(), std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, rows, n](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      const auto od = o.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += go[r * n + j] * od[r * n + j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += od[r * n + j] * (go[r * n + j] - dot);
      }
    });
  }
  return y;
}

}  // namespace

Tensor softmax_rows(Graph& g, const Tensor& x) { return softmax_impl(g, x, false, 0); }

Tensor causal_softmax_rows(Graph& g, const Tensor& x, std::size_t offset) {
  return softmax_impl(g, x, true, offset);
}

Tensor layernorm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (d < 2) throw ShapeError("layernorm needs a normalized dimension >= 2, got " + shape_to_string(x.shape()));
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layernorm: gain " + shape_to_string(gain.shape()) + " / bias " +
                     shape_to_string(bias.shape()) + " do not match " + shape_to_string(x.shape()));
  }
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[r] = istd;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mean) * istd;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gd[j] + bd[j];
    }
  }
  Tensor y = g.record(x.shape(), std::move(out), {&x, &gain, &bias});
  if (y.requires_grad()) {
    g.set_backward([x, gain, bias, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor& o) {
      const auto go = o.grad();
      const auto gd = gain.data();
      if (gain.requires_grad()) {
        auto gg = grad_sink(gain);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gg[j] += go[r * d + j] * xhat[r * d + j];
      }
      if (bias.requires_grad()) {
        auto gb = grad_sink(bias);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) gb[j] += go[r * d + j];
      }
      if (x.requires_grad()) {
        auto gx = grad_sink(x);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = go[r * d + j] * gd[j];
            mean_dh += dh;
            mean_dh_h += dh * xhat[r * d + j];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = go[r * d + j] * gd[j];
            gx[r * d + j] += inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_h);
          }
        }
      }
    });
  }
  return y;
}

LayerNormParams LayerNormParams::identity(std::size_t dim) {
  return {Tensor::filled({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

Tensor layernorm(Graph& g, const Tensor& x, const LayerNormParams& params) {
  return layernorm(g, x, params.gain, params.bias);
}

std::vector<double> dropout_mask(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0,1), got " + std::to_string(p));
  std::vector<double> mask(n);
  const double keep_scale = 1.0 / (1.0 - p);
  const std::uint64_t base = splitmix64(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = bits_to_unit(splitmix64(base ^ (0x632be59bd9b4e019ULL * (i + 1))));
    mask[i] = u >= p ? keep_scale : 0.0;
  }
  return mask;
}

Tensor dropout(Graph& g, const Tensor& x, double p, std::uint64_t seed, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  std::vector<double> mask = dropout_mask(x.numel(), p, seed);
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * mask[i];
  Tensor y = g.record(x.shape(), std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, mask = std::move(mask)](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
    });
  }
  return y;
}

Tensor embedding_lookup(Graph& g, const Tensor& table, std::span<const int> ids) {
  require_rank2(table, "embedding_lookup");
  if (ids.empty()) throw ShapeError("embedding_lookup needs at least one id");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  const auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab));
    }
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Tensor y = g.record({ids.size(), d}, std::move(out), {&table});
  if (y.requires_grad()) {
    g.set_backward([table, d, ids = std::vector<int>(ids.begin(), ids.end())](const Tensor& o) {
      auto gt = grad_sink(table);
      const auto go = o.grad();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        double* dst = gt.data() + static_cast<std::size_t>(ids[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += go[i * d + j];
      }
    });
  }
  return y;
}

Tensor cross_entropy_with_logits(Graph& g, const Tensor& logits, std::span<const int> targets) {
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     shape_to_string(logits.shape()));
  }
  const auto ld = logits.data();
  std::vector<double> probs(logits.numel(), 0.0);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t == kIgnoreIndex) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("label " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
    }
    const double* row = ld.data() + r * vocab;
    double mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[r * vocab + j] = std::exp(row[j] - mx);
      z += probs[r * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[r * vocab + j] /= z;
    total += std::log(z) + mx - row[t];
    ++counted;
  }
  if (counted == 0) throw InputError("cross_entropy: every target is ignored");
  const double inv = 1.0 / static_cast<double>(counted);
  Tensor y = g.record({1}, {total * inv}, {&logits});
  if (y.requires_grad()) {
    g.set_backward([logits, rows, vocab, inv, probs = std::move(probs),
                    targets = std::vector<int>(targets.begin(), targets.end())](const Tensor& o) {
      auto gl = grad_sink(logits);
      const double go = o.grad()[0] * inv;
      for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] == kIgnoreIndex) continue;
        for (std::size_t j = 0; j < vocab; ++j) gl[r * vocab + j] += go * probs[r * vocab + j];
        gl[r * vocab + static_cast<std::size_t>(targets[r])] -= go;
      }
    });
  }
  return y;
}

Tensor concat_rows(Graph& g, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) {
      throw ShapeError("concat_rows: width mismatch " + shape_to_string(parts[0].shape()) + " vs " +
                       shape_to_string(p.shape()));
    }
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor y = g.record({rows, n}, std::move(out), parts);
  if (y.requires_grad()) {
    g.set_backward([parts = std::vector<Tensor>(parts.begin(), parts.end())](const Tensor& o) {
      const auto go = o.grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad()) {
          auto gp = grad_sink(p);
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += go[offset + i];
        }
        offset += p.numel();
      }
    });
  }
  return y;
}

Tensor concat_cols(Graph& g, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: height mismatch " + shape_to_string(parts[0].shape()) + " vs " +
                       shape_to_string(p.shape()));
    }
    n += p.cols();
  }
  std::vector<double> out(rows * n);
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    const auto pd = p.data();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(pd.data() + r * w, w, out.data() + r * n + col);
    col += w;
  }
  Tensor y = g.record({rows, n}, std::move(out), parts);
  if (y.requires_grad()) {
    g.set_backward([parts = std::vector<Tensor>(parts.begin(), parts.end()), rows, n](const Tensor& o) {
      const auto go = o.grad();
      std::size_t col = 0;
      for (const Tensor& p : parts) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto gp = grad_sink(p);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += go[r * n + col + j];
        }
        col += w;
      }
    });
  }
  return y;
}

Tensor slice_rows(Graph& g, const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (begin >= end || end > rows) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                     shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          x.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  Tensor y = g.record({end - begin, n}, std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, begin, n](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[begin * n + i] += go[i];
    });
  }
  return y;
}

Tensor slice_cols(Graph& g, const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                     shape_to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(rows * w);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xd.data() + r * n + begin, w, out.data() + r * w);
  Tensor y = g.record({rows, w}, std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, begin, rows, n, w](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) gx[r * n + begin + j] += go[r * w + j];
    });
  }
  return y;
}

Tensor mean_rows(Graph& g, const Tensor& x) {
  const std::size_t rows = x.rows(), n = x.cols();
  std::vector<double> out(n, 0.0);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[j] += xd[r * n + j];
  const double inv = 1.0 / static_cast<double>(rows);
  for (double& v : out) v *= inv;
  Tensor y = g.record({1, n}, std::move(out), {&x});
  if (y.requires_grad()) {
    g.set_backward([x, rows, n, inv](const Tensor& o) {
      auto gx = grad_sink(x);
      const auto go = o.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += go[j] * inv;
    });
  }
  return y;
}

Tensor sum(Graph& g, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor y = g.record({1}, {total}, {&x});
  if (y.requires_grad()) {
    g.set_backward([x](const Tensor& o) {
      auto gx = grad_sink(x);
      const double go = o.grad()[0];
      for (double& v : gx) v += go;
    });
  }
  return y;
}

Tensor weighted_sum(Graph& g, const Tensor& x, const Tensor& weights) {
  if (weights.numel() != x.numel()) {
    throw ShapeError("weighted_sum: weights " + shape_to_string(weights.shape()) + " vs " +
                     shape_to_string(x.shape()));
  }
  double total = 0.0;
  const auto xd = x.data(), wd = weights.data();
  for (std::size_t i = 0; i < xd.size(); ++i) total += xd[i] * wd[i];
  Tensor y = g.record({1}, {total}, {&x});
  if (y.requires_grad()) {
    g.set_backward([x, weights](const Tensor& o) {
      auto gx = grad_sink(x);
      const double go = o.grad()[0];
      const auto wd = weights.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go * wd[i];
    });
  }
  return y;
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& weight, const Tensor* bias) {
  Tensor y = matmul_nt(g, x, weight);
  return bias ? add_row(g, y, *bias) : y;
}

}  // namespace surgant
