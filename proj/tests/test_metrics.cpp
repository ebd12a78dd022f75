#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "driftlab/agents/language_model.hpp"
#include "driftlab/agents/seq2seq.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/game/game.hpp"
#include "driftlab/metrics/bleu.hpp"
#include "driftlab/metrics/evaluation.hpp"
#include "driftlab/training/adam.hpp"
#include "driftlab/training/pretrain.hpp"
#include "oracles.hpp"

using namespace driftlab;
using Corpus = std::vector<std::vector<int>>;
using oracles::oracle_bleu;

namespace {

Corpus random_corpus(std::size_t n, std::size_t vocab, ad::Rng& rng) {
  Corpus c(n);
  for (auto& s : c) {
    s.resize(4 + rng.uniform_index(5));
    for (int& t : s) t = static_cast<int>(rng.uniform_index(vocab));
  }
  return c;
}

struct Toy {
  game::GameSpec game;
  std::vector<game::EvalExample> eval;
  Toy(std::size_t n, std::size_t len_min, std::size_t len_max, std::uint64_t seed, std::size_t vocab = 10)
      : game(game::make_game(21, vocab)) {
    ad::Rng rng(seed);
    eval = game::sample_eval_set(game, game::make_distribution(vocab, 1.0, std::nullopt, len_min, len_max), n, rng);
  }
};

agents::SeqBatch rows(const std::vector<game::EvalExample>& set, game::Tokens game::EvalExample::*field) {
  std::vector<std::vector<int>> out;
  for (const auto& e : set) out.push_back(e.*field);
  return agents::SeqBatch::from_rows(out);
}

agents::LanguageModel frozen_lm(std::size_t vocab = 10) {
  auto lm = agents::LanguageModel::init(1, vocab, 8);
  lm.freeze();
  return lm;
}

}  // namespace

TEST_CASE("BLEU matches the brute-force oracle on 50 random corpora") {
  ad::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t vocab = 3 + rng.uniform_index(4);  // small vocab so n-grams collide
    const auto hyps = random_corpus(5, vocab, rng), refs = random_corpus(5, vocab, rng);
    CHECK(std::abs(metrics::bleu_corpus(hyps, refs) - oracle_bleu(hyps, refs)) <= 1e-12);
  }
}

TEST_CASE("BLEU of a perfect corpus is 100 and of a disjoint one is 0") {
  ad::Rng rng(2);
  const auto c = random_corpus(7, 10, rng);
  CHECK(metrics::bleu_corpus(c, c) == 100.0);
  Corpus hi = c;
  for (auto& s : hi) {
    for (int& t : s) t += 100;
  }
  CHECK(metrics::bleu_corpus(hi, c) == 0.0);
}

TEST_CASE("BLEU is invariant to corpus pair order") {
  ad::Rng rng(3);
  auto hyps = random_corpus(9, 4, rng), refs = random_corpus(9, 4, rng);
  const double base = metrics::bleu_corpus(hyps, refs);
  std::reverse(hyps.begin(), hyps.end());
  std::reverse(refs.begin(), refs.end());
  CHECK(metrics::bleu_corpus(hyps, refs) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("BLEU edge cases") {
  CHECK_THROWS_AS(metrics::bleu_corpus({}, {}), DataError);
  CHECK_THROWS_AS(metrics::bleu_corpus({{1}}, {{1}, {2}}), DataError);
  // An empty hypothesis contributes no matches but still counts.
  const double with_empty = metrics::bleu_corpus({{}, {1, 2, 3, 4}}, {{1, 2}, {1, 2, 3, 4}});
  CHECK(with_empty >= 0.0);
  CHECK(with_empty < 100.0);
}

TEST_CASE("overfit pipeline scores 100 on its eval set") {
  Toy toy(12, 4, 4, 5);
  auto sender = agents::Seq2Seq::init(1, 10, 10, 24), receiver = agents::Seq2Seq::init(2, 10, 10, 24);
  const auto src = rows(toy.eval, &game::EvalExample::source);
  const auto pvt = rows(toy.eval, &game::EvalExample::pivot);
  const auto tgt = rows(toy.eval, &game::EvalExample::target);
  training::Adam so(sender.params(), {.lr = 1e-2}), ro(receiver.params(), {.lr = 1e-2});
  for (int i = 0; i < 600; ++i) {
    training::supervised_step(sender, so, {src, pvt});
    training::supervised_step(receiver, ro, {pvt, tgt});
  }
  const auto rec = metrics::eval_pipeline(sender, receiver, toy.eval, frozen_lm());
  CHECK(rec.bleu_pvt == 100.0);
  CHECK(rec.bleu_tgt == 100.0);
  CHECK(rec.real_nll < 0.01);
}

TEST_CASE("untrained agents score near zero grounding") {
  Toy toy(500, 4, 8, 6, 20);
  const auto sender = agents::Seq2Seq::init(3, 20, 20), receiver = agents::Seq2Seq::init(4, 20, 20);
  const auto rec = metrics::eval_pipeline(sender, receiver, toy.eval, frozen_lm(20));
  CHECK(rec.bleu_pvt < 5.0);
}

TEST_CASE("record fields respect their ranges and evaluation has no side effects") {
  Toy toy(60, 4, 8, 7);
  const auto sender = agents::Seq2Seq::init(5, 10, 10), receiver = agents::Seq2Seq::init(6, 10, 10);
  const auto hs = sender.params().content_hash(), hr = receiver.params().content_hash();
  const auto rec = metrics::eval_pipeline(sender, receiver, toy.eval, frozen_lm());
  CHECK(sender.params().content_hash() == hs);
  CHECK(receiver.params().content_hash() == hr);
  CHECK((rec.bleu_tgt >= 0.0 && rec.bleu_tgt <= 100.0));
  CHECK((rec.bleu_pvt >= 0.0 && rec.bleu_pvt <= 100.0));
  CHECK(rec.nll >= 0.0);
  CHECK(rec.real_nll >= 0.0);
}

TEST_CASE("NLL and RealNLL do not depend on the evaluation batch size") {
  Toy toy(75, 4, 8, 8);
  const auto sender = agents::Seq2Seq::init(7, 10, 10), receiver = agents::Seq2Seq::init(8, 10, 10);
  const auto lm = frozen_lm();
  const auto a = metrics::eval_pipeline(sender, receiver, toy.eval, lm, 128);
  for (std::size_t b : {1, 3, 16}) {
    const auto r = metrics::eval_pipeline(sender, receiver, toy.eval, lm, b);
    CHECK(std::abs(r.nll - a.nll) < 1e-9);
    CHECK(std::abs(r.real_nll - a.real_nll) < 1e-9);
    CHECK(r.bleu_pvt == a.bleu_pvt);
  }
}

TEST_CASE("a sender remapped to another pivot lexicon has higher RealNLL") {
  Toy toy(40, 4, 4, 9);
  auto sender = agents::Seq2Seq::init(9, 10, 10, 16);
  const auto src = rows(toy.eval, &game::EvalExample::source);
  const auto pvt = rows(toy.eval, &game::EvalExample::pivot);
  training::Adam opt(sender.params(), {.lr = 1e-2});
  for (int i = 0; i < 200; ++i) training::supervised_step(sender, opt, {src, pvt});
  const double before = metrics::real_nll_metric(sender, toy.eval);

  // Cyclic shift of the output vocabulary: column v of out.w / out.b moves to v+1.
  auto drifted = sender.clone();
  auto& w = drifted.params().get("out.w");
  auto& b = drifted.params().get("out.b");
  const std::size_t d = w.rows(), V = w.cols();
  const auto w0 = std::vector<double>(w.data().begin(), w.data().end());
  const auto b0 = std::vector<double>(b.data().begin(), b.data().end());
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t v = 0; v < V; ++v) w.data()[r * V + (v + 1) % V] = w0[r * V + v];
  }
  for (std::size_t v = 0; v < V; ++v) b.data()[(v + 1) % V] = b0[v];
  CHECK(metrics::real_nll_metric(drifted, toy.eval) > before);
}

TEST_CASE("CSV rows follow the schema and round-trip") {
  metrics::MetricsRecord a{0, 12.5, 99.0, 3.25, 0.5, std::nullopt, std::nullopt};
  metrics::MetricsRecord b{500, 50.0, 80.125, 3.0, 0.75, -0.25, 0.1};
  std::stringstream s;
  s << metrics::kCsvHeader << '\n'
    << metrics::csv_row(a, "s2p", 3) << '\n'
    << metrics::csv_row(b, "s2p", 3) << '\n';
  CHECK(metrics::csv_row(a, "s2p", 3) == "0,s2p,3,12.5,99,3.25,0.5,,");
  const auto back = metrics::read_metrics_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(back[0].method == "s2p");
  CHECK(back[0].seed == 3);
  CHECK(!back[0].record.grad_cos_raw.has_value());
  CHECK(back[1].record.step == 500);
  CHECK(back[1].record.bleu_pvt == 80.125);
  CHECK(*back[1].record.grad_cos_raw == -0.25);

  std::stringstream bad("step,method,seed\n0,x,1\n");
  CHECK_THROWS_AS(metrics::read_metrics_csv(bad), DataError);
}

TEST_CASE("JSONL rows carry every field with null for missing cosines") {
  metrics::MetricsRecord a{10, 1.0, 2.0, 3.0, 4.0, std::nullopt, 0.5};
  const auto line = metrics::jsonl_row(a, "gumbel", 2);
  CHECK(line.find("\"grad_cos_raw\":null") != std::string::npos);
  CHECK(line.find("\"grad_cos_ma100\":0.5") != std::string::npos);
  CHECK(line.find("\"method\":\"gumbel\"") != std::string::npos);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 100.0, 1e-17, -2.5}) {
    CHECK(std::stod(metrics::format_double(v)) == v);
  }
}
