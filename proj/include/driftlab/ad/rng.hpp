#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace driftlab::ad {

// PCG32 (XSH-RR output permutation, 64-bit LCG state) with explicit stream
// selection. Streams are derived from (seed, tag) rather than from the
// generator state, so forking never perturbs the parent sequence.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "pcg32-xsh-rr";

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Independent child generator keyed by `tag`.
  Rng fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
};

std::uint64_t splitmix64(std::uint64_t x);

// Fisher-Yates with Rng::uniform_index; std::shuffle's draw pattern is
// implementation-defined, this one is not.
template <class T>
void shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = rng.uniform_index(i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace driftlab::ad
