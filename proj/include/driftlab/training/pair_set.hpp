#pragma once

#include <map>
#include <utility>
#include <vector>

#include "driftlab/ad/rng.hpp"
#include "driftlab/agents/seq2seq.hpp"
#include "driftlab/game/game.hpp"

namespace driftlab::training {

using Batch = std::pair<agents::SeqBatch, agents::SeqBatch>;

// Immutable (source, target) pairs indexed by length, so every batch is
// drawn from a single length bucket.
class PairSet {
 public:
  PairSet() = default;
  PairSet(std::vector<game::Tokens> sources, std::vector<game::Tokens> targets);
  static PairSet from_corpus(const std::vector<game::CorpusPair>& pairs);

  std::size_t size() const { return sources_.size(); }
  bool empty() const { return sources_.empty(); }
  const game::Tokens& source(std::size_t i) const { return sources_[i]; }
  const game::Tokens& target(std::size_t i) const { return targets_[i]; }
  const std::vector<game::Tokens>& sources() const { return sources_; }
  const std::vector<game::Tokens>& targets() const { return targets_; }

  // One index drawn uniformly; the remaining batch - 1 drawn uniformly (with
  // replacement) from the same length bucket.
  std::vector<std::size_t> sample_indices(ad::Rng& rng, std::size_t batch) const;
  // `count` indices drawn uniformly from the bucket of the given length.
  std::vector<std::size_t> sample_from_bucket(ad::Rng& rng, std::size_t length,
                                              std::size_t count) const;
  // Shuffled single-length chunks that together cover every pair once.
  std::vector<std::vector<std::size_t>> epoch(ad::Rng& rng, std::size_t batch) const;

  Batch gather(const std::vector<std::size_t>& idx) const;

 private:
  std::vector<game::Tokens> sources_;
  std::vector<game::Tokens> targets_;
  std::map<std::size_t, std::vector<std::size_t>> buckets_;
};

// Rows from two sets stacked into one batch; all rows must share a length.
Batch concat_batches(const Batch& a, const Batch& b);

}  // namespace driftlab::training
