#include <doctest.h>

#include <cmath>

#include "driftlab/ad/gumbel.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/metrics/evaluation.hpp"
#include "driftlab/training/adam.hpp"
#include "driftlab/training/data.hpp"
#include "driftlab/training/finetune.hpp"
#include "driftlab/training/pretrain.hpp"

using namespace driftlab;
using namespace driftlab::training;

namespace {

GameConfig small_game() {
  GameConfig g;
  g.vocab = 10;
  g.len_min = 3;
  g.len_max = 5;
  g.pretrain_pairs = 1500;
  g.pretrain_val_pairs = 100;
  g.task_pairs = 300;
  g.eval_pairs = 100;
  return g;
}

// Briefly pretrained agents on a small game, built once per test binary.
struct World {
  GameData data = build_game_data(small_game());
  AgentPair pretrained = init_agents(1, 10, 16);
  agents::LanguageModel lm;
  World() {
    PretrainConfig cfg;
    cfg.epochs = 15;
    cfg.hidden = 16;
    cfg.adam.lr = 3e-3;
    ad::Rng rng(1, 2);
    pretrain(pretrained, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rng);
    lm = train_language_model(data.pre_src_pvt.targets(), 10, cfg, 3);
  }
};

const World& world() {
  static const World w;
  return w;
}

FinetuneConfig short_run(Method m) {
  FinetuneConfig f;
  f.method = m;
  f.total_steps = 100;
  f.eval_interval = 50;
  f.probe_interval = 10;
  f.k1 = 25;
  f.k2 = 5;
  f.k2_prime = 5;
  f.teacher_dataset_size = 64;
  f.batch = 16;
  return f;
}

// Parameter hashes after every update, sender and receiver.
std::vector<std::pair<std::uint64_t, std::uint64_t>> update_trace(const FinetuneConfig& cfg) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> trace;
  RunHooks hooks;
  hooks.on_update = [&](Phase, long, const AgentPair& a) {
    trace.emplace_back(a.sender.params().content_hash(), a.receiver.params().content_hash());
  };
  run_finetune(world().pretrained, cfg, world().data, world().lm, hooks);
  return trace;
}

std::vector<double> grads(const agents::ParamStore& p) { return p.flatten_grads(); }

}  // namespace

TEST_CASE("pretraining for zero epochs leaves parameters unchanged") {
  auto data = build_game_data(small_game());
  auto agents = init_agents(2, 10, 8);
  const auto before = agents.clone();
  PretrainConfig cfg;
  cfg.epochs = 0;
  cfg.receiver_epochs.reset();  // receiver follows epochs
  cfg.hidden = 8;
  ad::Rng rng(1);
  pretrain(agents, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rng);
  CHECK(agents.sender.params().values_equal(before.sender.params()));
  CHECK(agents.receiver.params().values_equal(before.receiver.params()));
}

TEST_CASE("receiver epochs are counted separately from the sender's") {
  auto data = build_game_data(small_game());
  auto agents = init_agents(2, 10, 8);
  const auto before = agents.clone();
  PretrainConfig cfg;
  cfg.epochs = 2;
  cfg.receiver_epochs = 0;
  cfg.hidden = 8;
  ad::Rng rng(1);
  auto r = pretrain(agents, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rng);
  CHECK(r.sender_epoch_loss.size() == 2);
  CHECK(r.receiver_epoch_loss.empty());
  CHECK(!agents.sender.params().values_equal(before.sender.params()));
  CHECK(agents.receiver.params().values_equal(before.receiver.params()));

  // Equal counts on both agents match the single-count default exactly.
  auto a = before.clone(), b = before.clone();
  cfg.receiver_epochs = 2;
  ad::Rng ra(3), rb(3);
  pretrain(a, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, ra);
  cfg.receiver_epochs.reset();
  pretrain(b, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rb);
  CHECK(a.receiver.params().values_equal(b.receiver.params()));
}

TEST_CASE("pretraining loss decreases over the first three epochs") {
  auto data = build_game_data(small_game());
  auto agents = init_agents(3, 10, 16);
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = 16;
  ad::Rng rng(2);
  auto r = pretrain(agents, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rng);
  REQUIRE(r.sender_epoch_loss.size() == 3);
  for (const auto* losses : {&r.sender_epoch_loss, &r.receiver_epoch_loss}) {
    CHECK((*losses)[1] < (*losses)[0]);
    CHECK((*losses)[2] < (*losses)[1]);
  }
}

TEST_CASE("pretraining rejects an empty corpus") {
  auto data = build_game_data(small_game());
  auto agents = init_agents(3, 10, 8);
  PretrainConfig cfg;
  ad::Rng rng(2);
  CHECK_THROWS_AS(pretrain(agents, PairSet{}, data.pre_pvt_tgt, data.val_src_pvt, data.val_pvt_tgt, cfg, rng),
                  DataError);
}

TEST_CASE("one Adam step on half the squared norm moves every coordinate toward zero") {
  agents::ParamStore p;
  p.add("x", ad::Tensor::from({1, 5}, {3.0, -2.0, 0.5, -0.1, 7.0}).set_requires_grad(true));
  const auto before = p.flatten_values();
  Adam opt(p);
  {
    ad::Tape tape;
    auto x = p.get("x");
    tape.backward(ad::scale(ad::sum(ad::mul(x, x)), 0.5));
  }
  opt.step(p);
  const auto after = p.flatten_values();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(after[i]) < std::abs(before[i]));
  CHECK(opt.steps() == 1);
}

TEST_CASE("interactive loss is non-negative and reaches both agents") {
  const auto& w = world();
  auto agents = w.pretrained.clone();
  ad::Rng brng(4), noise(5);
  const auto task = w.data.task.gather(w.data.task.sample_indices(brng, 8));
  ad::NoisyGumbel sampler(noise);
  {
    ad::Tape tape;
    auto loss = interactive_loss(agents.sender, agents.receiver, task, 0.5, sampler);
    CHECK(loss.item() >= 0.0);
    tape.backward(loss);
  }
  auto norm = [](const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) s += v * v;
    return s;
  };
  CHECK(norm(grads(agents.sender.params())) > 0.0);
  CHECK(norm(grads(agents.receiver.params())) > 0.0);
}

TEST_CASE("noiseless interactive loss of a pipeline overfit to one pair is below 0.01") {
  auto agents = init_agents(6, 10, 16);
  const Batch task{agents::SeqBatch::from_rows(std::vector<std::vector<int>>{{1, 2, 3, 4}}),
                   agents::SeqBatch::from_rows(std::vector<std::vector<int>>{{7, 5, 0, 9}})};
  auto opt = Optimizers::fresh(agents, {.lr = 1e-2});
  ad::NoiselessGumbel sampler;
  for (int i = 0; i < 300; ++i) gumbel_step(agents, opt, task, 0.5, sampler);
  ad::NoGradGuard guard;
  CHECK(interactive_loss(agents.sender, agents.receiver, task, 0.5, sampler).item() < 0.01);
}

TEST_CASE("s2p step with alpha 0 equals a gumbel step") {
  const auto& w = world();
  ad::Rng brng(7);
  const auto task = w.data.task.gather(w.data.task.sample_indices(brng, 8));
  const auto ps = w.data.pre_src_pvt.gather(w.data.pre_src_pvt.sample_indices(brng, 8));
  const auto pr = w.data.pre_pvt_tgt.gather(w.data.pre_pvt_tgt.sample_indices(brng, 8));
  auto a = w.pretrained.clone(), b = w.pretrained.clone();
  auto oa = Optimizers::fresh(a, {}), ob = Optimizers::fresh(b, {});
  ad::Rng na(8), nb(8);
  ad::NoisyGumbel sa(na), sb(nb);
  for (int i = 0; i < 5; ++i) {
    gumbel_step(a, oa, task, 0.5, sa);
    s2p_step(b, ob, task, ps, pr, 0.0, 0.5, sb);
  }
  CHECK(a.sender.params().values_equal(b.sender.params()));
  CHECK(a.receiver.params().values_equal(b.receiver.params()));
}

TEST_CASE("s2p total loss is interactive plus alpha times supervised") {
  const auto& w = world();
  ad::Rng brng(9);
  const auto task = w.data.task.gather(w.data.task.sample_indices(brng, 8));
  const auto ps = w.data.pre_src_pvt.gather(w.data.pre_src_pvt.sample_indices(brng, 8));
  const auto pr = w.data.pre_pvt_tgt.gather(w.data.pre_pvt_tgt.sample_indices(brng, 8));
  for (double alpha : {0.0, 0.5, 1.0, 2.5}) {
    auto a = w.pretrained.clone();
    auto opt = Optimizers::fresh(a, {});
    ad::Rng noise(10);
    ad::NoisyGumbel s(noise);
    const auto m = s2p_step(a, opt, task, ps, pr, alpha, 0.5, s);
    CHECK(std::abs(m.total - (m.interactive + alpha * (m.supervised_sender + m.supervised_receiver))) <= 1e-12);
  }
  auto a = w.pretrained.clone();
  auto opt = Optimizers::fresh(a, {});
  ad::Rng noise(10);
  ad::NoisyGumbel s(noise);
  CHECK_THROWS_AS(s2p_step(a, opt, task, ps, pr, -0.1, 0.5, s), ParameterError);
}

TEST_CASE("config validation") {
  FinetuneConfig f;
  f.method = Method::kMixData;
  f.beta = 1.5;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f.beta = 0.3;
  CHECK_NOTHROW(f.validate());
  f.method = Method::kSIL;
  CHECK_THROWS_AS(f.validate(), ParameterError);  // beta only for mixdata
  f.beta = 0.0;
  f.k1 = 0;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f.k1 = 10;
  f.k2 = 0;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f.allow_zero_imitation = true;
  f.k2_prime = 0;
  CHECK_NOTHROW(f.validate());
  f.method = Method::kGumbel;
  f.tau = 0.0;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f.tau = 0.5;
  f.alpha = 1.0;
  CHECK_THROWS_AS(f.validate(), ParameterError);
  f.method = Method::kS2P;
  CHECK_NOTHROW(f.validate());
  CHECK(parse_method("ssil") == Method::kSSIL);
  CHECK_THROWS_AS(parse_method("reinforce"), ParameterError);
}

TEST_CASE("regime reductions hold exactly over 100 steps") {
  auto with = [](Method m, double alpha, double beta) {
    auto f = short_run(m);
    f.alpha = alpha;
    f.beta = beta;
    return update_trace(f);
  };
  const auto gumbel = with(Method::kGumbel, 0, 0);
  const auto sil = with(Method::kSIL, 0, 0);
  CHECK(gumbel.size() == 100);
  CHECK(with(Method::kS2P, 0, 0) == gumbel);
  CHECK(with(Method::kSSIL, 0, 0) == sil);
  CHECK(with(Method::kMixData, 0, 0) == sil);
  CHECK(with(Method::kS2P, 0.5, 0) != gumbel);
  CHECK(with(Method::kSSIL, 0.5, 0) != sil);
  CHECK(with(Method::kMixData, 0, 0.5) != sil);
}

TEST_CASE("SIL consumes exactly the interactive budget and evaluates once per iteration") {
  const auto& w = world();
  auto f = short_run(Method::kSIL);
  f.total_steps = 110;
  f.k1 = 30;
  const auto r = run_finetune(w.pretrained, f, w.data, w.lm);
  CHECK(r.interactive_steps == 110);
  CHECK(r.iterations == 4);
  REQUIRE(r.trajectory.size() == 5);
  CHECK(r.trajectory.front().step == 0);
  CHECK(r.trajectory.back().step == 110);
  for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
    CHECK(r.trajectory[i].step > r.trajectory[i - 1].step);
  }
}

TEST_CASE("the first snapshot is the pretrained pipeline and runs never touch their input") {
  const auto& w = world();
  const auto before = w.pretrained.sender.params().content_hash();
  const auto r = run_finetune(w.pretrained, short_run(Method::kS2P), w.data, w.lm);
  CHECK(w.pretrained.sender.params().content_hash() == before);
  const auto direct = metrics::eval_pipeline(w.pretrained.sender, w.pretrained.receiver, w.data.eval_set, w.lm);
  CHECK(r.trajectory.front().bleu_pvt == direct.bleu_pvt);
  CHECK(r.trajectory.front().real_nll == direct.real_nll);
  CHECK(!r.trajectory.front().grad_cos_raw.has_value());
}

TEST_CASE("zero imitation steps leave the students and their metrics flat") {
  const auto& w = world();
  auto f = short_run(Method::kSIL);
  f.k2 = 0;
  f.k2_prime = 0;
  f.allow_zero_imitation = true;
  const auto r = run_finetune(w.pretrained, f, w.data, w.lm);
  CHECK(r.final_agents.sender.params().values_equal(w.pretrained.sender.params()));
  for (const auto& rec : r.trajectory) {
    CHECK(rec.bleu_pvt == r.trajectory.front().bleu_pvt);
    CHECK(rec.real_nll == r.trajectory.front().real_nll);
  }
}

TEST_CASE("teacher dataset is the teacher's greedy output on fresh task sources") {
  const auto& w = world();
  auto f = short_run(Method::kSIL);
  ad::Rng rng(11);
  const auto ds = build_teacher_dataset(w.pretrained, w.data, f, rng);
  REQUIRE(ds.sender_pairs.size() == f.teacher_dataset_size);
  REQUIRE(ds.receiver_pairs.size() == f.teacher_dataset_size);
  const auto greedy = metrics::greedy_translate(w.pretrained.sender, ds.sender_pairs.sources());
  CHECK(greedy == ds.sender_pairs.targets());
  CHECK(ds.receiver_pairs.sources() == ds.sender_pairs.targets());
  CHECK(metrics::greedy_translate(w.pretrained.receiver, ds.receiver_pairs.sources()) ==
        ds.receiver_pairs.targets());

  f.receiver_target = ReceiverImitationTarget::kGold;
  ad::Rng rng2(11);
  const auto gold = build_teacher_dataset(w.pretrained, w.data, f, rng2);
  for (std::size_t i = 0; i < gold.receiver_pairs.size(); ++i) {
    CHECK(gold.receiver_pairs.target(i) == game::gold_translate(gold.sender_pairs.source(i), w.data.game).target);
  }
}

TEST_CASE("imitation lowers the student's NLL on the teacher dataset") {
  const auto& w = world();
  auto teacher = w.pretrained.clone();
  auto opt = Optimizers::fresh(teacher, {});
  ad::Rng noise(12), brng(13);
  ad::NoisyGumbel s(noise);
  for (int i = 0; i < 50; ++i) {
    gumbel_step(teacher, opt, w.data.task.gather(w.data.task.sample_indices(brng, 16)), 0.5, s);
  }
  ad::Rng drng(14);
  const auto ds = build_teacher_dataset(teacher, w.data, short_run(Method::kSIL), drng);
  auto student = w.pretrained.sender.clone();
  const double before = dataset_nll(student, ds.sender_pairs);
  Adam sopt(student.params());
  ad::Rng irng(15), mrng(16);
  imitate(student, sopt, ds.sender_pairs, nullptr, 0.0, 20, 16, irng, mrng);
  CHECK(dataset_nll(student, ds.sender_pairs) < before);
}

TEST_CASE("gradient probe: self mode gives exactly 1 and probes are side-effect free") {
  const auto& w = world();
  auto agents = w.pretrained.clone();
  ad::Rng brng(17);
  const auto task = w.data.task.gather(w.data.task.sample_indices(brng, 8));
  const auto pre = w.data.pre_src_pvt.gather(w.data.pre_src_pvt.sample_indices(brng, 8));
  const auto hash = agents.sender.params().content_hash();
  for (int i = 0; i < 10; ++i) {
    ad::Rng rng(100 + i);
    auto self = grad_conflict_probe(agents, task, pre, 0.5, rng, ProbeMode::kSelf);
    REQUIRE(self.has_value());
    CHECK(*self == 1.0);
    auto c = grad_conflict_probe(agents, task, pre, 0.5, rng);
    REQUIRE(c.has_value());
    CHECK((*c >= -1.0 && *c <= 1.0));
  }
  CHECK(agents.sender.params().content_hash() == hash);
  for (double g : agents.sender.params().flatten_grads()) REQUIRE(g == 0.0);
}

TEST_CASE("probe log keeps raw values and a trailing-window mean") {
  ProbeLog log(100);
  CHECK(!log.windowed_mean(0).has_value());
  log.add(50, 0.5);
  log.add(100, std::nullopt);
  log.add(150, -0.5);
  CHECK(*log.latest() == -0.5);
  CHECK(*log.windowed_mean(150) == doctest::Approx(-0.5));  // step 50 left the window
  CHECK(*log.windowed_mean(149) == doctest::Approx(0.0));
  log.add(200, 0.25);
  CHECK(*log.windowed_mean(200) == doctest::Approx(-0.125));
}

TEST_CASE("mixdata with beta 1 keeps the student's grounding within 2 BLEU") {
  const auto& w = world();
  auto f = short_run(Method::kMixData);
  f.beta = 1.0;
  f.total_steps = 200;
  f.k1 = 50;
  f.k2 = 20;
  f.k2_prime = 20;
  const auto r = run_finetune(w.pretrained, f, w.data, w.lm);
  const double start = r.trajectory.front().bleu_pvt;
  for (const auto& rec : r.trajectory) CHECK(rec.bleu_pvt >= start - 2.0);
}
