#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace driftlab::agents {

// Items grouped by length (ascending), each group in input order, split into
// chunks of at most max_batch items. Every chunk can become one SeqBatch.
std::vector<std::vector<std::size_t>> length_chunks(std::span<const std::size_t> lengths,
                                                    std::size_t max_batch);

}  // namespace driftlab::agents
