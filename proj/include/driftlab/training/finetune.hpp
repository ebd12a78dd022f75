#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "driftlab/ad/gumbel.hpp"
#include "driftlab/agents/language_model.hpp"
#include "driftlab/metrics/evaluation.hpp"
#include "driftlab/training/config.hpp"
#include "driftlab/training/data.hpp"
#include "driftlab/training/pretrain.hpp"

namespace driftlab::training {

struct Optimizers {
  Adam sender;
  Adam receiver;
  static Optimizers fresh(const AgentPair& agents, const AdamConfig& config) {
    return {Adam(agents.sender.params(), config), Adam(agents.receiver.params(), config)};
  }
};

struct StepMetrics {
  double interactive = 0.0;
  double supervised_sender = 0.0;
  double supervised_receiver = 0.0;
  double total = 0.0;
};

// Sender Gumbel-decodes the pivot; the receiver reads the straight-through
// one-hots and is scored by teacher-forced cross-entropy on the gold target.
// Differentiable w.r.t. both agents.
ad::Tensor interactive_loss(const agents::Seq2Seq& sender, const agents::Seq2Seq& receiver,
                            const Batch& task, double tau, ad::GumbelSampler& sampler);

// One update of both agents on the interactive loss alone.
StepMetrics gumbel_step(AgentPair& agents, Optimizers& opt, const Batch& task, double tau,
                        ad::GumbelSampler& sampler);

// One update on L_int + alpha * (L_sup(src->pvt) + L_sup(pvt->tgt)). The two
// supervised terms touch disjoint agents, so each agent effectively
// minimizes L_int + alpha * its own supervised loss.
StepMetrics s2p_step(AgentPair& agents, Optimizers& opt, const Batch& task,
                     const Batch& pre_src_pvt, const Batch& pre_pvt_tgt, double alpha, double tau,
                     ad::GumbelSampler& sampler);

enum class ProbeMode {
  kSupervised,  // cos(grad L_int, grad L_sup_pretrain)
  kSelf,        // cos(grad L_int, grad L_int) with identical noise; always 1
};

// Cosine between the sender gradients of the interactive and supervised
// losses at the same parameter point. Empty when either gradient is zero.
// Leaves the agents' parameters and gradients unchanged.
std::optional<double> grad_conflict_probe(AgentPair& agents, const Batch& task,
                                          const Batch& pre_src_pvt, double tau, ad::Rng& rng,
                                          ProbeMode mode = ProbeMode::kSupervised);

// Raw probe values with a trailing-window mean.
class ProbeLog {
 public:
  explicit ProbeLog(long window = 100) : window_(window) {}
  void add(long step, std::optional<double> value);
  std::optional<double> latest() const { return latest_; }
  // Mean of the recorded values with step in (step - window, step].
  std::optional<double> windowed_mean(long step) const;

 private:
  long window_;
  std::optional<double> latest_;
  std::deque<std::pair<long, double>> values_;
};

struct TeacherDataset {
  PairSet sender_pairs;    // (src, teacher pivot)
  PairSet receiver_pairs;  // (teacher pivot, teacher target) or (teacher pivot, gold target)
};

// Decodes a fresh sample of task sources with the teacher.
TeacherDataset build_teacher_dataset(const AgentPair& teacher, const GameData& data,
                                     const FinetuneConfig& config, ad::Rng& rng);

// `steps` supervised updates of `student` on teacher pairs; when `pretrain`
// is given, round(beta * batch) rows of each batch come from it instead.
void imitate(agents::Seq2Seq& student, Adam& opt, const PairSet& teacher_pairs,
             const PairSet* pretrain, double beta, long steps, std::size_t batch, ad::Rng& rng,
             ad::Rng& mix_rng);

enum class Phase { kInteractive, kImitation };

struct RunHooks {
  // Called after every evaluation with the evaluated agents.
  std::function<void(const metrics::MetricsRecord&, const AgentPair&)> on_record;
  // Called after every parameter update with the agents that were updated
  // (the teacher during SIL interaction, the students during imitation).
  std::function<void(Phase, long step, const AgentPair&)> on_update;
};

struct RunResult {
  std::vector<metrics::MetricsRecord> trajectory;
  AgentPair final_agents;
  long interactive_steps = 0;
  long iterations = 0;  // SIL family only
};

// Finetunes copies of `pretrained` with the configured method and evaluates
// on data.eval_set at step 0 and along the way.
RunResult run_finetune(const AgentPair& pretrained, const FinetuneConfig& config,
                       const GameData& data, const agents::LanguageModel& lm,
                       const RunHooks& hooks = {});

}  // namespace driftlab::training
