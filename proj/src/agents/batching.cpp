#include "driftlab/agents/batching.hpp"

#include <map>

#include "driftlab/errors.hpp"

namespace driftlab::agents {

std::vector<std::vector<std::size_t>> length_chunks(std::span<const std::size_t> lengths,
                                                    std::size_t max_batch) {
  if (max_batch == 0) throw ParameterError("length_chunks: max_batch must be positive");
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < lengths.size(); ++i) by_length[lengths[i]].push_back(i);
  std::vector<std::vector<std::size_t>> chunks;
  for (auto& [len, idx] : by_length) {
    for (std::size_t start = 0; start < idx.size(); start += max_batch) {
      std::size_t stop = std::min(idx.size(), start + max_batch);
      chunks.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                          idx.begin() + static_cast<std::ptrdiff_t>(stop));
    }
  }
  return chunks;
}

}  // namespace driftlab::agents
