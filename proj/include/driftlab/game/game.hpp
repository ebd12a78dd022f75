#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "driftlab/ad/rng.hpp"

namespace driftlab::game {

// Source, pivot and target play the roles of Fr, En and De in the pivot
// translation game.
enum class Lang { kSource = 0, kPivot = 1, kTarget = 2 };

enum class PairKind { kSrcPvt, kPvtTgt, kSrcTgt };

using Tokens = std::vector<int>;
using Concepts = std::vector<int>;

std::string_view lang_prefix(Lang lang);  // "s", "p", "t"
std::string_view pair_kind_name(PairKind kind);  // "src-pvt", ...
PairKind parse_pair_kind(std::string_view name);

// Three bijective lexicons over a shared concept space. lexicon[l][c] is the
// surface id of concept c in language l.
struct GameSpec {
  std::size_t vocab = 20;
  std::array<std::vector<int>, 3> lexicon;
  std::array<std::vector<int>, 3> inverse;
  bool reverse_target = true;
  std::uint64_t seed = 0;

  const std::vector<int>& lex(Lang l) const { return lexicon[static_cast<std::size_t>(l)]; }
  const std::vector<int>& inv(Lang l) const { return inverse[static_cast<std::size_t>(l)]; }
  bool operator==(const GameSpec&) const = default;
};

GameSpec make_game(std::uint64_t seed, std::size_t vocab, bool reverse_target = true);

Tokens render(const Concepts& concepts, Lang which, const GameSpec& spec);
// Inverse of render (undoes the target reversal as well).
Concepts read_concepts(const Tokens& tokens, Lang which, const GameSpec& spec);

struct GoldTranslation {
  Tokens pivot;
  Tokens target;
};
GoldTranslation gold_translate(const Tokens& src_tokens, const GameSpec& spec);

// Zipf-distributed concepts: rank r has weight 1 / (r + 1)^s and is realized
// by concept rank_permutation[r]. Lengths are uniform in [len_min, len_max].
struct DistributionSpec {
  double zipf_exponent = 1.0;
  std::vector<int> rank_permutation;
  std::size_t len_min = 4;
  std::size_t len_max = 8;

  // Marginal probability of each concept id.
  std::vector<double> concept_probabilities() const;
};

// Identity ranking when shift_seed is empty, else a seeded random permutation.
DistributionSpec make_distribution(std::size_t vocab, double zipf_exponent,
                                   std::optional<std::uint64_t> shift_seed, std::size_t len_min = 4,
                                   std::size_t len_max = 8);

// KL(p || q) in nats over two concept marginals.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

struct CorpusPair {
  Tokens source;
  Tokens target;
  PairKind kind = PairKind::kSrcPvt;
  bool operator==(const CorpusPair&) const = default;
};

std::vector<Concepts> sample_meanings(const DistributionSpec& dist, std::size_t n, ad::Rng& rng);
CorpusPair make_pair(const Concepts& meaning, PairKind kind, const GameSpec& spec);
std::vector<CorpusPair> sample_corpus(const GameSpec& spec, const DistributionSpec& dist,
                                      std::size_t n, PairKind kind, ad::Rng& rng);

// Full reference triple used for evaluation.
struct EvalExample {
  Tokens source;
  Tokens pivot;
  Tokens target;
};
std::vector<EvalExample> sample_eval_set(const GameSpec& spec, const DistributionSpec& dist,
                                         std::size_t n, ad::Rng& rng);

// Surface strings: prefix plus zero-padded id ("s07", "p12", "t03").
std::string token_string(int id, Lang lang, const GameSpec& spec);
int parse_token(std::string_view text, Lang lang, const GameSpec& spec);

// Tab-separated corpus: `src<TAB>tgt<TAB>kind`, tokens space separated.
void write_corpus(std::ostream& out, const std::vector<CorpusPair>& pairs, const GameSpec& spec);
std::vector<CorpusPair> read_corpus(std::istream& in, const GameSpec& spec);

}  // namespace driftlab::game
