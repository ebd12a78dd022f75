#include "driftlab/metrics/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "driftlab/errors.hpp"

namespace driftlab::metrics {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<int>& seq, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[Ngram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                   seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double bleu_corpus(const std::vector<std::vector<int>>& hypotheses,
                   const std::vector<std::vector<int>>& references) {
  if (hypotheses.empty()) throw DataError("bleu_corpus: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw DataError("bleu_corpus: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                    std::to_string(references.size()) + " references");
  }
  std::size_t shortest = hypotheses.front().size();
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    shortest = std::min(shortest, hypotheses[i].size());
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
  }
  if (hyp_len == 0) return 0.0;
  const std::size_t max_n = std::max<std::size_t>(1, std::min<std::size_t>(4, shortest));

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    std::size_t matches = 0, total = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      auto hyp = ngram_counts(hypotheses[i], n);
      auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : hyp) {
        total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matches += std::min(count, it->second);
      }
    }
    double precision;
    if (matches == 0) {
      if (n == 1 || total == 0) return 0.0;
      precision = 1.0 / static_cast<double>(total + 1);
    } else {
      precision = static_cast<double>(matches) / static_cast<double>(total);
    }
    log_sum += std::log(precision);
  }
  const double brevity =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
  return 100.0 * brevity * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace driftlab::metrics
