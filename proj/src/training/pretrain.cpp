#include "driftlab/training/pretrain.hpp"

#include "driftlab/agents/batching.hpp"
#include "driftlab/errors.hpp"

namespace driftlab::training {

AgentPair init_agents(std::uint64_t seed, std::size_t vocab, std::size_t hidden) {
  return {agents::Seq2Seq::init(ad::splitmix64(seed ^ 0x5E4D), vocab, vocab, hidden),
          agents::Seq2Seq::init(ad::splitmix64(seed ^ 0x2EC7), vocab, vocab, hidden)};
}

double supervised_step(agents::Seq2Seq& model, Adam& opt, const Batch& batch) {
  model.params().zero_grad();
  double value;
  {
    ad::Tape tape;
    ad::Tensor loss = model.nll_teacher_forced(batch.first, batch.second);
    value = loss.item();
    tape.backward(loss);
  }
  opt.step(model.params());
  return value;
}

double dataset_nll(const agents::Seq2Seq& model, const PairSet& set, std::size_t batch) {
  if (set.empty()) throw DataError("dataset_nll: empty set");
  std::vector<std::size_t> lengths;
  for (const auto& s : set.sources()) lengths.push_back(s.size());
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& chunk : agents::length_chunks(lengths, batch)) {
    auto b = set.gather(chunk);
    for (double lp : model.token_log_probs(b.first, b.second)) total -= lp;
    tokens += chunk.size() * b.first.length;
  }
  return total / static_cast<double>(tokens);
}

PretrainResult pretrain(AgentPair& agents, const PairSet& src_pvt, const PairSet& pvt_tgt,
                        const PairSet& val_src_pvt, const PairSet& val_pvt_tgt,
                        const PretrainConfig& config, ad::Rng& rng) {
  if (src_pvt.empty() || pvt_tgt.empty()) throw DataError("pretrain: empty corpus");
  if (config.epochs < 0 || config.receiver_epoch_count() < 0) {
    throw ParameterError("pretrain: epochs must be >= 0");
  }
  Adam opt_s(agents.sender.params(), config.adam);
  Adam opt_r(agents.receiver.params(), config.adam);
  ad::Rng rng_s = rng.fork(1), rng_r = rng.fork(2);

  PretrainResult result;
  // The agents never interact here, so each runs its own epoch count on its own stream.
  for (long epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0.0;
    const auto chunks = src_pvt.epoch(rng_s, config.batch);
    for (const auto& idx : chunks) sum += supervised_step(agents.sender, opt_s, src_pvt.gather(idx));
    result.sender_epoch_loss.push_back(sum / static_cast<double>(chunks.size()));
  }
  for (long epoch = 0; epoch < config.receiver_epoch_count(); ++epoch) {
    double sum = 0.0;
    const auto chunks = pvt_tgt.epoch(rng_r, config.batch);
    for (const auto& idx : chunks) {
      sum += supervised_step(agents.receiver, opt_r, pvt_tgt.gather(idx));
    }
    result.receiver_epoch_loss.push_back(sum / static_cast<double>(chunks.size()));
  }
  agents.sender.params().zero_grad();
  agents.receiver.params().zero_grad();
  result.sender_val_nll = dataset_nll(agents.sender, val_src_pvt);
  result.receiver_val_nll = dataset_nll(agents.receiver, val_pvt_tgt);
  return result;
}

agents::LanguageModel train_language_model(const std::vector<std::vector<int>>& pivots,
                                           std::size_t vocab, const PretrainConfig& config,
                                           std::uint64_t seed) {
  if (pivots.empty()) throw DataError("train_language_model: empty corpus");
  auto lm = agents::LanguageModel::init(ad::splitmix64(seed ^ 0x1A96), vocab, config.hidden);
  Adam opt(lm.params(), config.adam);
  PairSet set(pivots, pivots);
  ad::Rng rng(seed, 0x1A);
  for (long epoch = 0; epoch < config.lm_epochs; ++epoch) {
    for (const auto& idx : set.epoch(rng, config.batch)) {
      auto batch = set.gather(idx);
      lm.params().zero_grad();
      {
        ad::Tape tape;
        ad::Tensor loss = lm.nll(batch.first);
        tape.backward(loss);
      }
      opt.step(lm.params());
    }
  }
  lm.params().zero_grad();
  lm.freeze();
  return lm;
}

}  // namespace driftlab::training
