#pragma once

#include <vector>

namespace driftlab::metrics {

// Corpus BLEU in [0, 100] with one reference per hypothesis.
//
// Clipped n-gram matches and candidate n-gram counts are summed over the
// corpus for n = 1..N, N = min(4, shortest hypothesis length) (at least 1).
// For n >= 2 a zero match count is smoothed to (0 + 1) / (count + 1); a zero
// unigram precision gives 0. The geometric mean is scaled by the brevity
// penalty exp(min(0, 1 - ref_len / hyp_len)).
double bleu_corpus(const std::vector<std::vector<int>>& hypotheses,
                   const std::vector<std::vector<int>>& references);

}  // namespace driftlab::metrics
