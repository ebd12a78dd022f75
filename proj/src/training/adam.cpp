#include "driftlab/training/adam.hpp"

#include <cmath>

#include "driftlab/errors.hpp"

namespace driftlab::training {

Adam::Adam(const agents::ParamStore& params, AdamConfig config) : config_(config) {
  if (!(config.lr > 0.0) || !(config.eps > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
      config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw ParameterError("Adam: invalid hyperparameters");
  }
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void Adam::step(agents::ParamStore& params) {
  if (params.size() != m_.size()) throw ContractError("Adam::step: parameter layout changed");
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double corr1 = 1.0 - std::pow(b1, t);
  const double corr2 = 1.0 - std::pow(b2, t);
  auto entries = params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Tensor& p = entries[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    if (g.size() != m.size()) throw ContractError("Adam::step: parameter shape changed");
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      w[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace driftlab::training
