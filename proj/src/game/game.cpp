#include "driftlab/game/game.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "driftlab/errors.hpp"

namespace driftlab::game {

namespace {

std::pair<Lang, Lang> pair_langs(PairKind kind) {
  switch (kind) {
    case PairKind::kSrcPvt: return {Lang::kSource, Lang::kPivot};
    case PairKind::kPvtTgt: return {Lang::kPivot, Lang::kTarget};
    case PairKind::kSrcTgt: return {Lang::kSource, Lang::kTarget};
  }
  throw ParameterError("unknown pair kind");
}

std::vector<int> random_permutation(std::size_t n, ad::Rng& rng) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  ad::shuffle(std::span<int>(perm), rng);
  return perm;
}

std::size_t token_width(const GameSpec& spec) {
  std::size_t width = 1;
  for (std::size_t v = spec.vocab > 0 ? spec.vocab - 1 : 0; v >= 10; v /= 10) ++width;
  return std::max<std::size_t>(width, 2);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

std::string_view lang_prefix(Lang lang) {
  switch (lang) {
    case Lang::kSource: return "s";
    case Lang::kPivot: return "p";
    case Lang::kTarget: return "t";
  }
  return "?";
}

std::string_view pair_kind_name(PairKind kind) {
  switch (kind) {
    case PairKind::kSrcPvt: return "src-pvt";
    case PairKind::kPvtTgt: return "pvt-tgt";
    case PairKind::kSrcTgt: return "src-tgt";
  }
  return "?";
}

PairKind parse_pair_kind(std::string_view name) {
  if (name == "src-pvt") return PairKind::kSrcPvt;
  if (name == "pvt-tgt") return PairKind::kPvtTgt;
  if (name == "src-tgt") return PairKind::kSrcTgt;
  throw DataError("unknown pair kind '" + std::string(name) + "'");
}

GameSpec make_game(std::uint64_t seed, std::size_t vocab, bool reverse_target) {
  if (vocab < 2) throw ParameterError("make_game: vocabulary size must be at least 2");
  GameSpec spec;
  spec.vocab = vocab;
  spec.seed = seed;
  spec.reverse_target = reverse_target;
  ad::Rng root(seed);
  for (std::size_t l = 0; l < 3; ++l) {
    ad::Rng rng = root.fork(100 + l);
    spec.lexicon[l] = random_permutation(vocab, rng);
    spec.inverse[l].assign(vocab, 0);
    for (std::size_t c = 0; c < vocab; ++c) {
      spec.inverse[l][static_cast<std::size_t>(spec.lexicon[l][c])] = static_cast<int>(c);
    }
  }
  return spec;
}

Tokens render(const Concepts& concepts, Lang which, const GameSpec& spec) {
  const auto& lex = spec.lex(which);
  Tokens out;
  out.reserve(concepts.size());
  for (int c : concepts) {
    if (c < 0 || static_cast<std::size_t>(c) >= spec.vocab) {
      throw IndexError("render: concept " + std::to_string(c) + " outside [0, " +
                       std::to_string(spec.vocab) + ")");
    }
    out.push_back(lex[static_cast<std::size_t>(c)]);
  }
  if (which == Lang::kTarget && spec.reverse_target) std::reverse(out.begin(), out.end());
  return out;
}

Concepts read_concepts(const Tokens& tokens, Lang which, const GameSpec& spec) {
  const auto& inv = spec.inv(which);
  Concepts out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= spec.vocab) {
      throw VocabularyError("unknown " + std::string(lang_prefix(which)) + " token id " +
                            std::to_string(t));
    }
    out.push_back(inv[static_cast<std::size_t>(t)]);
  }
  if (which == Lang::kTarget && spec.reverse_target) std::reverse(out.begin(), out.end());
  return out;
}

GoldTranslation gold_translate(const Tokens& src_tokens, const GameSpec& spec) {
  Concepts meaning = read_concepts(src_tokens, Lang::kSource, spec);
  return {render(meaning, Lang::kPivot, spec), render(meaning, Lang::kTarget, spec)};
}

std::vector<double> DistributionSpec::concept_probabilities() const {
  const std::size_t v = rank_permutation.size();
  std::vector<double> weights(v);
  double total = 0.0;
  for (std::size_t r = 0; r < v; ++r) {
    weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), zipf_exponent);
    total += weights[r];
  }
  std::vector<double> probs(v, 0.0);
  for (std::size_t r = 0; r < v; ++r) {
    probs[static_cast<std::size_t>(rank_permutation[r])] = weights[r] / total;
  }
  return probs;
}

DistributionSpec make_distribution(std::size_t vocab, double zipf_exponent,
                                   std::optional<std::uint64_t> shift_seed, std::size_t len_min,
                                   std::size_t len_max) {
  if (vocab < 1) throw ParameterError("make_distribution: empty vocabulary");
  if (len_min < 1 || len_max < len_min) {
    throw ParameterError("make_distribution: need 1 <= len_min <= len_max");
  }
  if (!(zipf_exponent >= 0.0)) throw ParameterError("make_distribution: negative Zipf exponent");
  DistributionSpec dist;
  dist.zipf_exponent = zipf_exponent;
  dist.len_min = len_min;
  dist.len_max = len_max;
  if (shift_seed) {
    ad::Rng rng(*shift_seed, 7);
    dist.rank_permutation = random_permutation(vocab, rng);
  } else {
    dist.rank_permutation.resize(vocab);
    std::iota(dist.rank_permutation.begin(), dist.rank_permutation.end(), 0);
  }
  return dist;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return INFINITY;
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

std::vector<Concepts> sample_meanings(const DistributionSpec& dist, std::size_t n, ad::Rng& rng) {
  if (n < 1) throw ParameterError("sample_meanings: n must be at least 1");
  const std::size_t v = dist.rank_permutation.size();
  std::vector<double> cdf(v);
  {
    double acc = 0.0;
    for (std::size_t r = 0; r < v; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), dist.zipf_exponent);
      cdf[r] = acc;
    }
    for (double& c : cdf) c /= acc;
  }
  const std::size_t span_len = dist.len_max - dist.len_min + 1;
  std::vector<Concepts> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t len = dist.len_min + rng.uniform_index(span_len);
    Concepts m(len);
    for (int& c : m) {
      double u = rng.uniform();
      auto r = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      c = dist.rank_permutation[std::min(r, v - 1)];
    }
    out.push_back(std::move(m));
  }
  return out;
}

CorpusPair make_pair(const Concepts& meaning, PairKind kind, const GameSpec& spec) {
  auto [from, to] = pair_langs(kind);
  return CorpusPair{render(meaning, from, spec), render(meaning, to, spec), kind};
}

std::vector<CorpusPair> sample_corpus(const GameSpec& spec, const DistributionSpec& dist,
                                      std::size_t n, PairKind kind, ad::Rng& rng) {
  if (dist.rank_permutation.size() != spec.vocab) {
    throw ParameterError("sample_corpus: distribution and game vocabularies differ");
  }
  std::vector<CorpusPair> pairs;
  pairs.reserve(n);
  for (const auto& m : sample_meanings(dist, n, rng)) pairs.push_back(make_pair(m, kind, spec));
  return pairs;
}

std::vector<EvalExample> sample_eval_set(const GameSpec& spec, const DistributionSpec& dist,
                                         std::size_t n, ad::Rng& rng) {
  std::vector<EvalExample> out;
  out.reserve(n);
  for (const auto& m : sample_meanings(dist, n, rng)) {
    out.push_back({render(m, Lang::kSource, spec), render(m, Lang::kPivot, spec),
                   render(m, Lang::kTarget, spec)});
  }
  return out;
}

std::string token_string(int id, Lang lang, const GameSpec& spec) {
  if (id < 0 || static_cast<std::size_t>(id) >= spec.vocab) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary");
  }
  std::string digits = std::to_string(id);
  const std::size_t width = token_width(spec);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(lang_prefix(lang)) + digits;
}

int parse_token(std::string_view text, Lang lang, const GameSpec& spec) {
  const auto prefix = lang_prefix(lang);
  if (text.size() <= prefix.size() || text.substr(0, prefix.size()) != prefix) {
    throw VocabularyError("token '" + std::string(text) + "' is not a " + std::string(prefix) +
                          "-language token");
  }
  int id = 0;
  for (char ch : text.substr(prefix.size())) {
    if (ch < '0' || ch > '9') throw VocabularyError("malformed token '" + std::string(text) + "'");
    id = id * 10 + (ch - '0');
    if (static_cast<std::size_t>(id) >= spec.vocab) {
      throw VocabularyError("token '" + std::string(text) + "' outside vocabulary");
    }
  }
  return id;
}

void write_corpus(std::ostream& out, const std::vector<CorpusPair>& pairs, const GameSpec& spec) {
  for (const auto& p : pairs) {
    auto [from, to] = pair_langs(p.kind);
    for (std::size_t i = 0; i < p.source.size(); ++i) {
      if (i) out << ' ';
      out << token_string(p.source[i], from, spec);
    }
    out << '\t';
    for (std::size_t i = 0; i < p.target.size(); ++i) {
      if (i) out << ' ';
      out << token_string(p.target[i], to, spec);
    }
    out << '\t' << pair_kind_name(p.kind) << '\n';
  }
}

std::vector<CorpusPair> read_corpus(std::istream& in, const GameSpec& spec) {
  std::vector<CorpusPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError("corpus line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    CorpusPair pair;
    pair.kind = parse_pair_kind(fields[2]);
    auto [from, to] = pair_langs(pair.kind);
    for (const auto& tok : split(fields[0], ' ')) pair.source.push_back(parse_token(tok, from, spec));
    for (const auto& tok : split(fields[1], ' ')) pair.target.push_back(parse_token(tok, to, spec));
    if (pair.source.size() != pair.target.size()) {
      throw DataError("corpus line " + std::to_string(lineno) + ": source/target lengths differ");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace driftlab::game
