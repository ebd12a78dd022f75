#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "driftlab/errors.hpp"
#include "driftlab/game/game.hpp"

using namespace driftlab;
using namespace driftlab::game;

namespace {

GameSpec identity_game(std::size_t vocab) {
  GameSpec g = make_game(1, vocab);
  for (auto* table : {&g.lexicon, &g.inverse}) {
    for (auto& lex : *table) std::iota(lex.begin(), lex.end(), 0);
  }
  return g;
}

std::vector<std::size_t> concept_counts(const std::vector<Concepts>& meanings, std::size_t vocab) {
  std::vector<std::size_t> counts(vocab, 0);
  for (const auto& m : meanings) {
    for (int c : m) ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

}  // namespace

TEST_CASE("make_game is deterministic and seed-dependent") {
  CHECK(make_game(4, 20) == make_game(4, 20));
  const auto a = make_game(4, 20), b = make_game(5, 20);
  bool differ = false;
  for (int l = 0; l < 3; ++l) differ = differ || a.lexicon[l] != b.lexicon[l];
  CHECK(differ);
}

TEST_CASE("every lexicon is a bijection with a matching inverse") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto g = make_game(seed, 20);
    for (Lang l : {Lang::kSource, Lang::kPivot, Lang::kTarget}) {
      auto sorted = g.lex(l);
      std::sort(sorted.begin(), sorted.end());
      std::vector<int> ids(20);
      std::iota(ids.begin(), ids.end(), 0);
      CHECK(sorted == ids);
      for (int c = 0; c < 20; ++c) CHECK(g.inv(l)[g.lex(l)[c]] == c);
    }
  }
}

TEST_CASE("V=2 lexicons are one of the two permutations") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = make_game(seed, 2);
    for (const auto& lex : g.lexicon) {
      CHECK((lex == std::vector<int>{0, 1} || lex == std::vector<int>{1, 0}));
    }
  }
}

TEST_CASE("make_game rejects V < 2") {
  CHECK_THROWS_AS(make_game(1, 1), ParameterError);
  CHECK_THROWS_AS(make_game(1, 0), ParameterError);
}

TEST_CASE("render edge cases") {
  const auto g = identity_game(5);
  CHECK(render({}, Lang::kPivot, g).empty());
  CHECK(render({0, 1, 2}, Lang::kTarget, g) == Tokens{2, 1, 0});
  CHECK(render({0, 1, 2}, Lang::kPivot, g) == Tokens{0, 1, 2});
  CHECK_THROWS_AS(render({5}, Lang::kSource, g), IndexError);
  CHECK_THROWS_AS(render({-1}, Lang::kSource, g), IndexError);
}

TEST_CASE("render then read_concepts round-trips in every language") {
  const auto g = make_game(8, 20);
  ad::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Concepts m(1 + rng.uniform_index(8));
    for (int& c : m) c = static_cast<int>(rng.uniform_index(20));
    for (Lang l : {Lang::kSource, Lang::kPivot, Lang::kTarget}) {
      CHECK(read_concepts(render(m, l, g), l, g) == m);
    }
  }
}

TEST_CASE("gold_translate agrees with independent composition") {
  const auto g = make_game(9, 20);
  ad::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Concepts m(1 + rng.uniform_index(8));
    for (int& c : m) c = static_cast<int>(rng.uniform_index(20));
    const auto src = render(m, Lang::kSource, g);
    const auto gold = gold_translate(src, g);
    // Composition by hand: pvt_i = lex_pvt[inv_src[s_i]], tgt reversed.
    Tokens pvt, tgt;
    for (int s : src) pvt.push_back(g.lex(Lang::kPivot)[g.inv(Lang::kSource)[s]]);
    for (auto it = src.rbegin(); it != src.rend(); ++it) {
      tgt.push_back(g.lex(Lang::kTarget)[g.inv(Lang::kSource)[*it]]);
    }
    CHECK(gold.pivot == pvt);
    CHECK(gold.target == tgt);
    CHECK(gold_translate(src, g).target == gold.target);
  }
}

TEST_CASE("single token: target is the pivot mapped through tgt o pvt^-1") {
  const auto g = make_game(10, 20);
  for (int s = 0; s < 20; ++s) {
    const auto gold = gold_translate({s}, g);
    REQUIRE(gold.pivot.size() == 1);
    CHECK(gold.target == Tokens{g.lex(Lang::kTarget)[g.inv(Lang::kPivot)[gold.pivot[0]]]});
  }
}

TEST_CASE("gold_translate rejects unknown tokens") {
  const auto g = make_game(1, 20);
  CHECK_THROWS_AS(gold_translate({20}, g), VocabularyError);
}

TEST_CASE("distribution probabilities sum to one and permutation is a bijection") {
  for (double s : {0.0, 1.0, 2.5}) {
    for (auto shift : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{7}}) {
      const auto d = make_distribution(20, s, shift);
      const auto p = d.concept_probabilities();
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
      auto perm = d.rank_permutation;
      std::sort(perm.begin(), perm.end());
      std::vector<int> ids(20);
      std::iota(ids.begin(), ids.end(), 0);
      CHECK(perm == ids);
    }
  }
}

TEST_CASE("sample_corpus with n=1 and length 1") {
  const auto g = make_game(1, 20);
  const auto d = make_distribution(20, 1.0, std::nullopt, 1, 1);
  ad::Rng rng(1);
  const auto c = sample_corpus(g, d, 1, PairKind::kSrcPvt, rng);
  REQUIRE(c.size() == 1);
  CHECK(c[0].source.size() == 1);
  CHECK(c[0].target.size() == 1);
}

TEST_CASE("Zipf s=1 on V=3 matches (1, 1/2, 1/3) / H3 within 1%") {
  const auto d = make_distribution(3, 1.0, std::nullopt, 1, 1);
  ad::Rng rng(12);
  const auto counts = concept_counts(sample_meanings(d, 100000, rng), 3);
  const double h3 = 1.0 + 0.5 + 1.0 / 3.0;
  for (int c = 0; c < 3; ++c) {
    const double expect = (1.0 / (c + 1)) / h3;
    CHECK(std::abs(counts[c] / 100000.0 - expect) / expect < 0.01);
  }
}

TEST_CASE("lengths are uniform over the configured range") {
  const auto d = make_distribution(20, 1.0, std::nullopt, 4, 8);
  ad::Rng rng(13);
  std::map<std::size_t, std::size_t> hist;
  for (const auto& m : sample_meanings(d, 50000, rng)) ++hist[m.size()];
  CHECK(hist.size() == 5);
  for (const auto& [len, n] : hist) {
    CHECK(len >= 4);
    CHECK(len <= 8);
    CHECK(std::abs(n / 50000.0 - 0.2) < 0.01);
  }
}

TEST_CASE("shifted task distribution has a different most frequent concept") {
  const auto pre = make_distribution(20, 1.0, std::nullopt);
  const auto task = make_distribution(20, 1.0, 7);
  ad::Rng rng(14);
  auto argmax = [](const std::vector<std::size_t>& v) {
    return std::max_element(v.begin(), v.end()) - v.begin();
  };
  const auto a = concept_counts(sample_meanings(pre, 10000, rng), 20);
  const auto b = concept_counts(sample_meanings(task, 10000, rng), 20);
  CHECK(argmax(a) != argmax(b));
}

TEST_CASE("KL between pretrain and task marginals is zero only without a shift") {
  const auto pre = make_distribution(20, 1.0, std::nullopt);
  const auto same = make_distribution(20, 1.0, std::nullopt);
  const auto shifted = make_distribution(20, 1.0, 7);
  ad::Rng rng(15);
  auto empirical = [&](const DistributionSpec& d) {
    const auto counts = concept_counts(sample_meanings(d, 100000, rng), 20);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> p;
    for (auto n : counts) p.push_back(n / total);
    return p;
  };
  CHECK(kl_divergence(pre.concept_probabilities(), same.concept_probabilities()) == 0.0);
  CHECK(kl_divergence(empirical(pre), empirical(shifted)) > 0.1);
}

TEST_CASE("corpora are deterministic in (spec, dist, n, seed)") {
  const auto g = make_game(2, 20);
  const auto d = make_distribution(20, 1.0, 7);
  ad::Rng r1(5), r2(5);
  CHECK(sample_corpus(g, d, 200, PairKind::kSrcTgt, r1) == sample_corpus(g, d, 200, PairKind::kSrcTgt, r2));
}

TEST_CASE("corpus pairs are rendered from one meaning") {
  const auto g = make_game(2, 20);
  const auto d = make_distribution(20, 1.0, std::nullopt);
  ad::Rng rng(6);
  for (PairKind kind : {PairKind::kSrcPvt, PairKind::kPvtTgt, PairKind::kSrcTgt}) {
    for (const auto& p : sample_corpus(g, d, 100, kind, rng)) {
      CHECK(p.kind == kind);
      CHECK(p.source.size() == p.target.size());
      CHECK(!p.source.empty());
      if (kind == PairKind::kSrcPvt) CHECK(gold_translate(p.source, g).pivot == p.target);
      if (kind == PairKind::kSrcTgt) CHECK(gold_translate(p.source, g).target == p.target);
    }
  }
}

TEST_CASE("corpus TSV round trip and token strings") {
  const auto g = make_game(3, 20);
  CHECK(token_string(7, Lang::kSource, g) == "s07");
  CHECK(token_string(12, Lang::kPivot, g) == "p12");
  CHECK(token_string(3, Lang::kTarget, g) == "t03");
  CHECK(parse_token("p12", Lang::kPivot, g) == 12);
  CHECK_THROWS_AS(parse_token("s12", Lang::kPivot, g), VocabularyError);
  CHECK_THROWS_AS(parse_token("p20", Lang::kPivot, g), VocabularyError);

  const auto d = make_distribution(20, 1.0, std::nullopt);
  ad::Rng rng(7);
  auto pairs = sample_corpus(g, d, 20, PairKind::kPvtTgt, rng);
  auto more = sample_corpus(g, d, 20, PairKind::kSrcPvt, rng);
  pairs.insert(pairs.end(), more.begin(), more.end());
  std::stringstream s;
  write_corpus(s, pairs, g);
  const std::string text = s.str();
  CHECK(text.find("\tpvt-tgt\n") != std::string::npos);
  CHECK(read_corpus(s, g) == pairs);
}
