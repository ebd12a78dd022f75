#include "driftlab/ad/grad_tools.hpp"

#include <algorithm>
#include <cmath>

#include "driftlab/errors.hpp"

namespace driftlab::ad {

double grad_cosine(std::span<const double> g1, std::span<const double> g2) {
  if (g1.size() != g2.size()) {
    throw DimensionError("grad_cosine: lengths " + std::to_string(g1.size()) + " and " +
                         std::to_string(g2.size()));
  }
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    dot += g1[i] * g2[i];
    n1 += g1[i] * g1[i];
    n2 += g2[i] * g2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) throw UndefinedCosineError("grad_cosine: zero-norm gradient");
  return std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0);
}

GradcheckResult gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                          Rng& rng, std::size_t probes, double h) {
  if (params.empty()) throw ParameterError("gradcheck: no parameters");
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : params) {
    offsets.push_back(total);
    total += p.numel();
  }

  GradcheckResult result;
  NoGradGuard no_grad;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    std::size_t flat = rng.uniform_index(total);
    auto which = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    std::size_t idx = flat - offsets[which];
    Tensor& p = params[which];
    double analytic = p.has_grad() ? p.grad()[idx] : 0.0;

    double saved = p.data()[idx];
    p.data()[idx] = saved + h;
    double up = loss_fn().item();
    p.data()[idx] = saved - h;
    double down = loss_fn().item();
    p.data()[idx] = saved;

    double numeric = (up - down) / (2.0 * h);
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
    ++result.probes;
  }
  return result;
}

}  // namespace driftlab::ad
