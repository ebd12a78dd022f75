#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracles {

// Brute-force BLEU: every n-gram compared against every position by direct
// slicing; no maps, no shared helpers with the implementation.
inline double oracle_bleu(const std::vector<std::vector<int>>& hyps,
                          const std::vector<std::vector<int>>& refs) {
  std::size_t shortest = hyps[0].size(), hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    shortest = std::min(shortest, hyps[i].size());
    hyp_len += hyps[i].size();
    ref_len += refs[i].size();
  }
  const std::size_t max_n = std::max<std::size_t>(1, std::min<std::size_t>(4, shortest));
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    double match = 0.0, total = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const auto& h = hyps[i];
      const auto& r = refs[i];
      if (h.size() < n) continue;
      const std::size_t hn = h.size() - n + 1;
      total += static_cast<double>(hn);
      std::vector<bool> seen(hn, false);
      for (std::size_t a = 0; a < hn; ++a) {
        if (seen[a]) continue;
        // Count occurrences of this n-gram in h (marking duplicates) and in r.
        double in_h = 0.0, in_r = 0.0;
        for (std::size_t b = a; b < hn; ++b) {
          if (std::equal(h.begin() + a, h.begin() + a + n, h.begin() + b)) {
            in_h += 1.0;
            seen[b] = true;
          }
        }
        for (std::size_t b = 0; r.size() >= n && b + n <= r.size(); ++b) {
          if (std::equal(h.begin() + a, h.begin() + a + n, r.begin() + b)) in_r += 1.0;
        }
        match += std::min(in_h, in_r);
      }
    }
    if (match == 0.0) {
      if (n == 1) return 0.0;
      match += 1.0;
      total += 1.0;
    }
    log_sum += std::log(match / total);
  }
  const double bp = hyp_len == 0 ? 0.0 : std::exp(std::min(0.0, 1.0 - double(ref_len) / double(hyp_len)));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace oracles
