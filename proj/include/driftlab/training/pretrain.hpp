#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "driftlab/agents/language_model.hpp"
#include "driftlab/agents/seq2seq.hpp"
#include "driftlab/training/adam.hpp"
#include "driftlab/training/pair_set.hpp"

namespace driftlab::training {

struct AgentPair {
  agents::Seq2Seq sender;    // source -> pivot
  agents::Seq2Seq receiver;  // pivot -> target
  AgentPair clone() const { return {sender.clone(), receiver.clone()}; }
};

AgentPair init_agents(std::uint64_t seed, std::size_t vocab, std::size_t hidden);

struct PretrainConfig {
  // A well-grounded sender and an under-trained receiver: interactive
  // finetuning then has headroom on the task score, and the sender's
  // language is what absorbs the pressure.
  long epochs = 20;
  // Receiver epochs when they differ from the sender's; empty means `epochs`.
  std::optional<long> receiver_epochs = 2;
  long lm_epochs = 3;
  std::size_t batch = 32;
  std::size_t hidden = 32;
  AdamConfig adam{.lr = 2e-3};

  long receiver_epoch_count() const { return receiver_epochs.value_or(epochs); }
};

struct PretrainResult {
  std::vector<double> sender_epoch_loss;    // mean training NLL per epoch
  std::vector<double> receiver_epoch_loss;
  double sender_val_nll = 0.0;
  double receiver_val_nll = 0.0;
};

// One teacher-forced supervised update; returns the batch loss.
double supervised_step(agents::Seq2Seq& model, Adam& opt, const Batch& batch);

// Mean per-token NLL over a whole set (no tape).
double dataset_nll(const agents::Seq2Seq& model, const PairSet& set, std::size_t batch = 128);

// Teacher-forced pretraining of both agents on their own corpora.
PretrainResult pretrain(AgentPair& agents, const PairSet& src_pvt, const PairSet& pvt_tgt,
                        const PairSet& val_src_pvt, const PairSet& val_pvt_tgt,
                        const PretrainConfig& config, ad::Rng& rng);

// Trains the pivot language model for `config.lm_epochs` epochs and freezes it.
agents::LanguageModel train_language_model(const std::vector<std::vector<int>>& pivots,
                                           std::size_t vocab, const PretrainConfig& config,
                                           std::uint64_t seed);

}  // namespace driftlab::training
