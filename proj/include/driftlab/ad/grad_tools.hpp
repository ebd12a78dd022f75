#pragma once

#include <functional>
#include <span>
#include <vector>

#include "driftlab/ad/rng.hpp"
#include "driftlab/ad/tensor.hpp"

namespace driftlab::ad {

// dot(g1, g2) / (|g1| |g2|), clamped to [-1, 1]. Throws UndefinedCosineError
// when either vector has zero norm.
double grad_cosine(std::span<const double> g1, std::span<const double> g2);

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

// Compares the tape gradient of `loss_fn` w.r.t. `params` against central
// differences at `probes` coordinates drawn uniformly over all parameter
// entries. loss_fn must be deterministic. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
GradcheckResult gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                          Rng& rng, std::size_t probes = 20, double h = 1e-5);

}  // namespace driftlab::ad
