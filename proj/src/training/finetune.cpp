#include "driftlab/training/finetune.hpp"

#include <algorithm>
#include <cmath>

#include "driftlab/ad/grad_tools.hpp"
#include "driftlab/ad/ops.hpp"
#include "driftlab/agents/batching.hpp"
#include "driftlab/errors.hpp"

namespace driftlab::training {

namespace {

// Independent random streams of a finetuning run. Each purpose owns its
// stream so that switching a term off (alpha = 0, beta = 0) leaves every
// other draw unchanged.
enum Stream : std::uint64_t {
  kTaskBatches = 1,
  kPretrainBatches = 2,
  kGumbelNoise = 3,
  kProbe = 4,
  kTeacherData = 5,
  kImitation = 6,
  kMixing = 7,
};

void zero_grads(AgentPair& agents) {
  agents.sender.params().zero_grad();
  agents.receiver.params().zero_grad();
}

class Runner {
 public:
  Runner(const FinetuneConfig& config, const GameData& data, const agents::LanguageModel& lm,
         const RunHooks& hooks)
      : config_(config), data_(data), lm_(lm), hooks_(hooks), root_(config.seed, 0xF17E),
        task_rng_(root_.fork(kTaskBatches)), pre_rng_(root_.fork(kPretrainBatches)),
        noise_rng_(root_.fork(kGumbelNoise)), probe_rng_(root_.fork(kProbe)),
        teacher_rng_(root_.fork(kTeacherData)), imitation_rng_(root_.fork(kImitation)),
        mix_rng_(root_.fork(kMixing)), sampler_(noise_rng_) {}

  RunResult run(const AgentPair& pretrained) {
    config_.validate();
    RunResult result;
    result.final_agents = pretrained.clone();
    evaluate(result, result.final_agents, 0);
    if (is_sil_family(config_.method)) {
      run_iterated(result);
    } else {
      run_joint(result);
    }
    return result;
  }

 private:
  bool uses_supervised_interaction() const {
    return config_.method == Method::kS2P || config_.method == Method::kSSIL;
  }

  // One interactive update of `agents` at global step `step` (1-based).
  void interactive_update(AgentPair& agents, Optimizers& opt, long step) {
    Batch task = data_.task.gather(data_.task.sample_indices(task_rng_, config_.batch));
    if (uses_supervised_interaction()) {
      Batch pre_s = data_.pre_src_pvt.gather(data_.pre_src_pvt.sample_indices(pre_rng_, config_.batch));
      Batch pre_r = data_.pre_pvt_tgt.gather(data_.pre_pvt_tgt.sample_indices(pre_rng_, config_.batch));
      s2p_step(agents, opt, task, pre_s, pre_r, config_.alpha, config_.tau, sampler_);
    } else {
      gumbel_step(agents, opt, task, config_.tau, sampler_);
    }
    if (hooks_.on_update) hooks_.on_update(Phase::kInteractive, step, agents);
    if (step % config_.probe_interval == 0) probe(agents, step);
  }

  void probe(AgentPair& agents, long step) {
    Batch task = data_.task.gather(data_.task.sample_indices(probe_rng_, config_.batch));
    Batch pre = data_.pre_src_pvt.gather(data_.pre_src_pvt.sample_indices(probe_rng_, config_.batch));
    probes_.add(step, grad_conflict_probe(agents, task, pre, config_.tau, probe_rng_));
  }

  void evaluate(RunResult& result, const AgentPair& agents, long step) {
    AgentPair snapshot = agents.clone();
    metrics::MetricsRecord rec =
        metrics::eval_pipeline(snapshot.sender, snapshot.receiver, data_.eval_set, lm_);
    rec.step = step;
    rec.grad_cos_raw = probes_.latest();
    rec.grad_cos_ma100 = probes_.windowed_mean(step);
    result.trajectory.push_back(rec);
    if (hooks_.on_record) hooks_.on_record(rec, agents);
  }

  void run_joint(RunResult& result) {
    AgentPair& agents = result.final_agents;
    Optimizers opt = Optimizers::fresh(agents, config_.adam);
    for (long step = 1; step <= config_.total_steps; ++step) {
      interactive_update(agents, opt, step);
      if (step % config_.eval_interval == 0 || step == config_.total_steps) {
        evaluate(result, agents, step);
      }
    }
    result.interactive_steps = config_.total_steps;
  }

  void run_iterated(RunResult& result) {
    AgentPair& students = result.final_agents;
    Optimizers student_opt = Optimizers::fresh(students, config_.adam);
    const PairSet* pre_s = config_.method == Method::kMixData ? &data_.pre_src_pvt : nullptr;
    const PairSet* pre_r = config_.method == Method::kMixData ? &data_.pre_pvt_tgt : nullptr;
    long consumed = 0;
    while (consumed < config_.total_steps) {
      const long k = std::min(config_.k1, config_.total_steps - consumed);
      AgentPair teacher = students.clone();
      Optimizers teacher_opt = Optimizers::fresh(teacher, config_.adam);
      for (long i = 1; i <= k; ++i) interactive_update(teacher, teacher_opt, consumed + i);
      consumed += k;

      TeacherDataset dataset = build_teacher_dataset(teacher, data_, config_, teacher_rng_);
      imitate(students.sender, student_opt.sender, dataset.sender_pairs, pre_s, config_.beta,
              config_.k2, config_.batch, imitation_rng_, mix_rng_);
      if (hooks_.on_update) hooks_.on_update(Phase::kImitation, consumed, students);
      imitate(students.receiver, student_opt.receiver, dataset.receiver_pairs, pre_r, config_.beta,
              config_.k2_prime, config_.batch, imitation_rng_, mix_rng_);
      if (hooks_.on_update) hooks_.on_update(Phase::kImitation, consumed, students);
      ++result.iterations;
      evaluate(result, students, consumed);
    }
    result.interactive_steps = consumed;
  }

  FinetuneConfig config_;
  const GameData& data_;
  const agents::LanguageModel& lm_;
  const RunHooks& hooks_;
  ad::Rng root_;
  ad::Rng task_rng_, pre_rng_, noise_rng_, probe_rng_, teacher_rng_, imitation_rng_, mix_rng_;
  ad::NoisyGumbel sampler_;
  ProbeLog probes_;
};

}  // namespace

ad::Tensor interactive_loss(const agents::Seq2Seq& sender, const agents::Seq2Seq& receiver,
                            const Batch& task, double tau, ad::GumbelSampler& sampler) {
  agents::DecodeOutput pivot = sender.gumbel_decode(task.first, tau, sampler);
  return receiver.nll_teacher_forced(pivot.one_hots, task.second);
}

StepMetrics gumbel_step(AgentPair& agents, Optimizers& opt, const Batch& task, double tau,
                        ad::GumbelSampler& sampler) {
  zero_grads(agents);
  StepMetrics m;
  {
    ad::Tape tape;
    ad::Tensor loss = interactive_loss(agents.sender, agents.receiver, task, tau, sampler);
    m.interactive = m.total = loss.item();
    tape.backward(loss);
  }
  opt.sender.step(agents.sender.params());
  opt.receiver.step(agents.receiver.params());
  return m;
}

StepMetrics s2p_step(AgentPair& agents, Optimizers& opt, const Batch& task,
                     const Batch& pre_src_pvt, const Batch& pre_pvt_tgt, double alpha, double tau,
                     ad::GumbelSampler& sampler) {
  if (!(alpha >= 0.0)) throw ParameterError("s2p_step: alpha must be >= 0");
  zero_grads(agents);
  StepMetrics m;
  {
    ad::Tape tape;
    ad::Tensor inter = interactive_loss(agents.sender, agents.receiver, task, tau, sampler);
    ad::Tensor sup_s = agents.sender.nll_teacher_forced(pre_src_pvt.first, pre_src_pvt.second);
    ad::Tensor sup_r = agents.receiver.nll_teacher_forced(pre_pvt_tgt.first, pre_pvt_tgt.second);
    ad::Tensor total = ad::add(inter, ad::scale(ad::add(sup_s, sup_r), alpha));
    m.interactive = inter.item();
    m.supervised_sender = sup_s.item();
    m.supervised_receiver = sup_r.item();
    m.total = total.item();
    tape.backward(total);
  }
  opt.sender.step(agents.sender.params());
  opt.receiver.step(agents.receiver.params());
  return m;
}

std::optional<double> grad_conflict_probe(AgentPair& agents, const Batch& task,
                                          const Batch& pre_src_pvt, double tau, ad::Rng& rng,
                                          ProbeMode mode) {
  // Both losses see the same noise in self mode.
  ad::Rng noise_a = rng.fork(rng.next_u64());
  ad::Rng noise_b = noise_a;

  zero_grads(agents);
  {
    ad::Tape tape;
    ad::NoisyGumbel sampler(noise_a);
    ad::Tensor loss = interactive_loss(agents.sender, agents.receiver, task, tau, sampler);
    tape.backward(loss);
  }
  std::vector<double> g_int = agents.sender.params().flatten_grads();

  zero_grads(agents);
  {
    ad::Tape tape;
    ad::Tensor loss;
    if (mode == ProbeMode::kSelf) {
      ad::NoisyGumbel sampler(noise_b);
      loss = interactive_loss(agents.sender, agents.receiver, task, tau, sampler);
    } else {
      loss = agents.sender.nll_teacher_forced(pre_src_pvt.first, pre_src_pvt.second);
    }
    tape.backward(loss);
  }
  std::vector<double> g_sup = agents.sender.params().flatten_grads();
  zero_grads(agents);

  try {
    return ad::grad_cosine(g_int, g_sup);
  } catch (const UndefinedCosineError&) {
    return std::nullopt;
  }
}

void ProbeLog::add(long step, std::optional<double> value) {
  latest_ = value;
  if (value) values_.emplace_back(step, *value);
  while (!values_.empty() && values_.front().first <= step - window_) values_.pop_front();
}

std::optional<double> ProbeLog::windowed_mean(long step) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [s, v] : values_) {
    if (s > step - window_ && s <= step) {
      sum += v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

TeacherDataset build_teacher_dataset(const AgentPair& teacher, const GameData& data,
                                     const FinetuneConfig& config, ad::Rng& rng) {
  auto meanings = game::sample_meanings(data.task_dist, config.teacher_dataset_size, rng);
  std::vector<game::Tokens> sources;
  sources.reserve(meanings.size());
  for (const auto& m : meanings) sources.push_back(game::render(m, game::Lang::kSource, data.game));

  std::vector<game::Tokens> pivots, targets;
  if (config.stochastic_teacher) {
    ad::Rng sample_rng = rng.fork(0x5A);
    pivots.resize(sources.size());
    targets.resize(sources.size());
    std::vector<std::size_t> lengths;
    for (const auto& s : sources) lengths.push_back(s.size());
    for (const auto& chunk : agents::length_chunks(lengths, metrics::kEvalBatch)) {
      std::vector<const game::Tokens*> rows;
      for (std::size_t i : chunk) rows.push_back(&sources[i]);
      auto pv = teacher.sender.sample_decode(agents::SeqBatch::from_rows(rows), sample_rng).tokens;
      auto tg = teacher.receiver.sample_decode(pv, sample_rng).tokens;
      for (std::size_t j = 0; j < chunk.size(); ++j) {
        pivots[chunk[j]] = pv.row(j);
        targets[chunk[j]] = tg.row(j);
      }
    }
  } else {
    pivots = metrics::greedy_translate(teacher.sender, sources);
    targets = metrics::greedy_translate(teacher.receiver, pivots);
  }
  if (config.receiver_target == ReceiverImitationTarget::kGold) {
    for (std::size_t i = 0; i < sources.size(); ++i) {
      targets[i] = game::gold_translate(sources[i], data.game).target;
    }
  }
  std::vector<game::Tokens> pivots_copy = pivots;
  return TeacherDataset{PairSet(std::move(sources), std::move(pivots)),
                        PairSet(std::move(pivots_copy), std::move(targets))};
}

void imitate(agents::Seq2Seq& student, Adam& opt, const PairSet& teacher_pairs,
             const PairSet* pretrain, double beta, long steps, std::size_t batch, ad::Rng& rng,
             ad::Rng& mix_rng) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("imitate: beta must lie in [0, 1]");
  const std::size_t n_pre =
      pretrain ? static_cast<std::size_t>(std::llround(beta * static_cast<double>(batch))) : 0;
  const std::size_t n_teacher = batch - n_pre;
  for (long s = 0; s < steps; ++s) {
    Batch b;
    if (n_pre == 0) {
      b = teacher_pairs.gather(teacher_pairs.sample_indices(rng, batch));
    } else {
      std::size_t length;
      std::optional<Batch> part;
      if (n_teacher > 0) {
        auto idx = teacher_pairs.sample_indices(rng, n_teacher);
        length = teacher_pairs.source(idx.front()).size();
        part = teacher_pairs.gather(idx);
      } else {
        length = teacher_pairs.source(rng.uniform_index(teacher_pairs.size())).size();
      }
      Batch pre = pretrain->gather(pretrain->sample_from_bucket(mix_rng, length, n_pre));
      b = part ? concat_batches(*part, pre) : pre;
    }
    supervised_step(student, opt, b);
  }
  student.params().zero_grad();
}

RunResult run_finetune(const AgentPair& pretrained, const FinetuneConfig& config,
                       const GameData& data, const agents::LanguageModel& lm,
                       const RunHooks& hooks) {
  Runner runner(config, data, lm, hooks);
  return runner.run(pretrained);
}

}  // namespace driftlab::training
