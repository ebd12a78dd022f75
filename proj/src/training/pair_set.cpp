#include "driftlab/training/pair_set.hpp"

#include "driftlab/errors.hpp"

namespace driftlab::training {

PairSet::PairSet(std::vector<game::Tokens> sources, std::vector<game::Tokens> targets)
    : sources_(std::move(sources)), targets_(std::move(targets)) {
  if (sources_.size() != targets_.size()) throw DataError("PairSet: source/target counts differ");
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (sources_[i].empty() || sources_[i].size() != targets_[i].size()) {
      throw DataError("PairSet: pair " + std::to_string(i) + " is empty or unequal in length");
    }
    buckets_[sources_[i].size()].push_back(i);
  }
}

PairSet PairSet::from_corpus(const std::vector<game::CorpusPair>& pairs) {
  std::vector<game::Tokens> src, tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const auto& p : pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  return PairSet(std::move(src), std::move(tgt));
}

std::vector<std::size_t> PairSet::sample_indices(ad::Rng& rng, std::size_t batch) const {
  if (empty()) throw DataError("PairSet: sampling from an empty set");
  if (batch == 0) return {};
  std::size_t first = rng.uniform_index(size());
  auto rest = sample_from_bucket(rng, sources_[first].size(), batch - 1);
  rest.insert(rest.begin(), first);
  return rest;
}

std::vector<std::size_t> PairSet::sample_from_bucket(ad::Rng& rng, std::size_t length,
                                                     std::size_t count) const {
  std::vector<std::size_t> out;
  if (count == 0) return out;
  auto it = buckets_.find(length);
  if (it == buckets_.end()) {
    throw DataError("PairSet: no pairs of length " + std::to_string(length));
  }
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(it->second[rng.uniform_index(it->second.size())]);
  return out;
}

std::vector<std::vector<std::size_t>> PairSet::epoch(ad::Rng& rng, std::size_t batch) const {
  if (batch == 0) throw ParameterError("PairSet::epoch: batch must be positive");
  std::vector<std::vector<std::size_t>> chunks;
  for (const auto& [len, idx] : buckets_) {
    std::vector<std::size_t> order = idx;
    ad::shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::size_t stop = std::min(order.size(), start + batch);
      chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
  }
  ad::shuffle(std::span<std::vector<std::size_t>>(chunks), rng);
  return chunks;
}

Batch PairSet::gather(const std::vector<std::size_t>& idx) const {
  std::vector<const game::Tokens*> src, tgt;
  src.reserve(idx.size());
  tgt.reserve(idx.size());
  for (std::size_t i : idx) {
    src.push_back(&sources_.at(i));
    tgt.push_back(&targets_.at(i));
  }
  return {agents::SeqBatch::from_rows(src), agents::SeqBatch::from_rows(tgt)};
}

Batch concat_batches(const Batch& a, const Batch& b) {
  if (a.first.length != b.first.length) throw ContractError("concat_batches: lengths differ");
  Batch out = a;
  out.first.batch += b.first.batch;
  out.second.batch += b.second.batch;
  out.first.ids.insert(out.first.ids.end(), b.first.ids.begin(), b.first.ids.end());
  out.second.ids.insert(out.second.ids.end(), b.second.ids.begin(), b.second.ids.end());
  return out;
}

}  // namespace driftlab::training
