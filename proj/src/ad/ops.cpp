#include "driftlab/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "driftlab/errors.hpp"

namespace driftlab::ad {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_finite(const char* op, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// Row-wise log-softmax of a [rows x cols] buffer, max-shifted.
void log_softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    double mx = *std::max_element(x, x + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(x[c] - mx);
    double lse = mx + std::log(acc);
    for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - lse;
  }
}

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    double mx = *std::max_element(x, x + cols);
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      acc += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= acc;
  }
}

// dz = y * (g - <g, y>) per row, accumulated into dx with factor.
void softmax_vjp_rows(const double* y, const double* g, double* dx, std::size_t rows,
                      std::size_t cols, double factor) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = g + r * cols;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
    double* dr = dx + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dr[c] += factor * yr[c] * (gr[c] - dot);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = pc + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        if (av == 0.0) continue;  // one-hot inputs are mostly zeros
        const double* bp = pb + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  }
  if (should_record({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b, out, m, k, n]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        // dA = dC * B^T
        double* ga = a.grad_buffer().data();
        const double* pb = b.data().data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double* bp = pb + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        // dB = A^T * dC
        double* gb = b.grad_buffer().data();
        const double* pa = a.data().data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* gi = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            double* bp = gb + p * n;
            for (std::size_t j = 0; j < n; ++j) bp[j] += av * gi[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = a.detach();
  {
    auto o = out.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += pb[i];
  }
  if (should_record({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.detach();
  {
    auto o = out.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= pb[i];
  }
  if (should_record({&a, &b})) {
    Tape::active()->record(out, {a, b}, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        auto pb = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * pb[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        auto pa = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * pa[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = x.detach();
  for (double& v : out.data()) v *= factor;
  if (should_record({&x})) {
    Tape::active()->record(out, {x}, [x, out, factor]() mutable {
      auto g = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = x.detach();
  for (double& v : out.data()) v = std::tanh(v);
  if (should_record({&x})) {
    Tape::active()->record(out, {x}, [x, out]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.rows();
  Tensor out = x.detach();
  {
    double* o = out.data().data();
    const double* b = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < n; ++c) o[r * n + c] += b[c];
    }
  }
  if (should_record({&x, &bias})) {
    Tape::active()->record(out, {x, bias}, [x, bias, out, rows, n]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
      }
    });
  }
  return out;
}

Tensor broadcast_rows(const Tensor& row, std::size_t count) {
  const std::size_t n = row.numel();
  if (row.rows() != 1) {
    throw DimensionError("broadcast_rows: expected a single row, got " + shape_str(row.shape()));
  }
  Tensor out = Tensor::zeros({count, n});
  {
    double* o = out.data().data();
    const double* src = row.data().data();
    for (std::size_t r = 0; r < count; ++r) std::copy(src, src + n, o + r * n);
  }
  if (should_record({&row})) {
    Tape::active()->record(out, {row}, [row, out, count, n]() mutable {
      auto g = out.grad();
      auto gr = row.grad_buffer();
      for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < n; ++c) gr[c] += g[r * n + c];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (should_record({&x})) {
    Tape::active()->record(out, {x}, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& v : x.grad_buffer()) v += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor softmax(const Tensor& logits) {
  require_finite("softmax", logits.data());
  const std::size_t cols = logits.cols(), rows = logits.rows();
  Tensor out = Tensor::zeros(logits.shape());
  softmax_rows(logits.data().data(), out.data().data(), rows, cols);
  if (should_record({&logits})) {
    Tape::active()->record(out, {logits}, [logits, out, rows, cols]() mutable {
      softmax_vjp_rows(out.data().data(), out.grad().data(), logits.grad_buffer().data(), rows,
                       cols, 1.0);
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& logits) {
  require_finite("log_softmax", logits.data());
  const std::size_t cols = logits.cols(), rows = logits.rows();
  Tensor out = Tensor::zeros(logits.shape());
  log_softmax_rows(logits.data().data(), out.data().data(), rows, cols);
  if (should_record({&logits})) {
    Tape::active()->record(out, {logits}, [logits, out, rows, cols]() mutable {
      // dx = g - softmax * sum(g)
      const double* y = out.data().data();
      const double* g = out.grad().data();
      double* gx = logits.grad_buffer().data();
      for (std::size_t r = 0; r < rows; ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c) {
          gx[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * gs;
        }
      }
    });
  }
  return out;
}

Tensor attention(const Tensor& query, const std::vector<Tensor>& keys) {
  if (keys.empty()) throw DimensionError("attention: no keys");
  if (query.rank() != 2) throw DimensionError("attention: query must be rank 2");
  for (const Tensor& k : keys) require_same_shape("attention", query, k);
  const std::size_t rows = query.rows(), d = query.cols(), n = keys.size();
  const double* q = query.data().data();

  // weights[b * n + j]
  std::vector<double> weights(rows * n);
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      const double* k = keys[j].data().data() + b * d;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += q[b * d + c] * k[c];
      weights[b * n + j] = acc;
    }
  }
  require_finite("attention", weights);
  softmax_rows(weights.data(), weights.data(), rows, n);

  Tensor out = Tensor::zeros({rows, d});
  double* o = out.data().data();
  for (std::size_t j = 0; j < n; ++j) {
    const double* k = keys[j].data().data();
    for (std::size_t b = 0; b < rows; ++b) {
      const double w = weights[b * n + j];
      for (std::size_t c = 0; c < d; ++c) o[b * d + c] += w * k[b * d + c];
    }
  }

  std::vector<Tensor> inputs = keys;
  inputs.push_back(query);
  if (should_record(inputs)) {
    Tape::active()->record(
        out, inputs, [query, keys, out, rows, d, n, weights = std::move(weights)]() mutable {
          const double* g = out.grad().data();
          const double* qv = query.data().data();
          // dscore[b * n + j] = w_bj (g_b . k_jb - sum_i w_bi g_b . k_ib)
          std::vector<double> dscore(rows * n);
          for (std::size_t b = 0; b < rows; ++b) {
            double mix = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double* k = keys[j].data().data() + b * d;
              double acc = 0.0;
              for (std::size_t c = 0; c < d; ++c) acc += g[b * d + c] * k[c];
              dscore[b * n + j] = acc;
              mix += weights[b * n + j] * acc;
            }
            for (std::size_t j = 0; j < n; ++j) {
              dscore[b * n + j] = weights[b * n + j] * (dscore[b * n + j] - mix);
            }
          }
          if (query.requires_grad()) {
            double* gq = query.grad_buffer().data();
            for (std::size_t j = 0; j < n; ++j) {
              const double* k = keys[j].data().data();
              for (std::size_t b = 0; b < rows; ++b) {
                const double ds = dscore[b * n + j];
                for (std::size_t c = 0; c < d; ++c) gq[b * d + c] += ds * k[b * d + c];
              }
            }
          }
          for (std::size_t j = 0; j < n; ++j) {
            if (!keys[j].requires_grad()) continue;
            double* gk = keys[j].grad_buffer().data();
            for (std::size_t b = 0; b < rows; ++b) {
              const double w = weights[b * n + j], ds = dscore[b * n + j];
              for (std::size_t c = 0; c < d; ++c) {
                gk[b * d + c] += w * g[b * d + c] + ds * qv[b * d + c];
              }
            }
          }
        });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_finite("cross_entropy", logits.data());
  const std::size_t cols = logits.cols(), rows = logits.rows();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                       std::to_string(cols) + ")");
    }
  }
  std::vector<double> logp(rows * cols);
  log_softmax_rows(logits.data().data(), logp.data(), rows, cols);
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) acc -= logp[r * cols + static_cast<std::size_t>(targets[r])];
  Tensor out = Tensor::scalar(acc / static_cast<double>(rows));
  if (should_record({&logits})) {
    std::vector<int> tg(targets.begin(), targets.end());
    Tape::active()->record(
        out, {logits}, [logits, out, rows, cols, logp = std::move(logp), tg = std::move(tg)]() mutable {
          const double g = out.grad()[0] / static_cast<double>(rows);
          double* gx = logits.grad_buffer().data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              double p = std::exp(logp[r * cols + c]);
              if (static_cast<int>(c) == tg[r]) p -= 1.0;
              gx[r * cols + c] += g * p;
            }
          }
        });
  }
  return out;
}

std::vector<double> sample_gumbel(Rng& rng, std::size_t n) {
  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  std::vector<double> g(n);
  for (double& v : g) {
    double u = std::clamp(rng.uniform(), kLo, kHi);
    v = -std::log(-std::log(u));
  }
  return g;
}

Tensor gumbel_softmax_st(const Tensor& logits, double tau, std::span<const double> noise) {
  if (!(tau > 0.0)) throw ParameterError("gumbel_softmax_st: tau must be positive");
  require_finite("gumbel_softmax_st", logits.data());
  if (noise.size() != logits.numel()) {
    throw DimensionError("gumbel_softmax_st: " + std::to_string(noise.size()) +
                         " noise values for logits " + shape_str(logits.shape()));
  }
  const std::size_t cols = logits.cols(), rows = logits.rows();
  std::vector<double> z(rows * cols);
  {
    auto x = logits.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (x[i] + noise[i]) / tau;
  }
  std::vector<double> soft(rows * cols);
  softmax_rows(z.data(), soft.data(), rows, cols);

  Tensor out = Tensor::zeros(logits.shape());
  {
    double* o = out.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* sr = soft.data() + r * cols;
      auto best = static_cast<std::size_t>(std::max_element(sr, sr + cols) - sr);
      o[r * cols + best] = 1.0;
    }
  }
  if (should_record({&logits})) {
    Tape::active()->record(out, {logits}, [logits, out, rows, cols, tau, soft = std::move(soft)]() mutable {
      softmax_vjp_rows(soft.data(), out.grad().data(), logits.grad_buffer().data(), rows, cols,
                       1.0 / tau);
    });
  }
  return out;
}

Tensor gumbel_softmax_st(const Tensor& logits, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw ParameterError("gumbel_softmax_st: tau must be positive");
  auto noise = sample_gumbel(rng, logits.numel());
  return gumbel_softmax_st(logits, tau, noise);
}

std::vector<int> argmax_rows(const Tensor& x) {
  const std::size_t cols = x.cols(), rows = x.rows();
  std::vector<int> ids(rows);
  const double* d = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = d + r * cols;
    ids[r] = static_cast<int>(std::max_element(row, row + cols) - row);
  }
  return ids;
}

}  // namespace driftlab::ad
