#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "driftlab/agents/params.hpp"
#include "driftlab/agents/seq2seq.hpp"

namespace driftlab::agents {

// Recurrent next-token model over the pivot vocabulary, used frozen as the
// syntactic-correctness judge for generated pivot sentences.
//
//   s_t = tanh(e_t + s_{t-1} W + b),  s_{-1} = 0, e_0 = bos, e_t = y_{t-1} E
//   p(y_t | y_<t) = softmax(s_t W_o + b_o)
class LanguageModel {
 public:
  static constexpr const char* kFreezeHashName = "meta.freeze_hash";

  LanguageModel() = default;
  static LanguageModel init(std::uint64_t seed, std::size_t vocab, std::size_t hidden = 32);

  std::size_t vocab() const { return vocab_; }
  ParamStore& params();
  const ParamStore& params() const { return params_; }

  // Differentiable mean per-token NLL over a batch (training only).
  ad::Tensor nll(const SeqBatch& tokens) const;

  void freeze();
  bool frozen() const { return freeze_hash_.has_value(); }
  std::uint64_t freeze_hash() const;

  // Per-token NLL in nats of one sequence. Requires a frozen model whose
  // parameters still hash to the recorded value.
  double lm_nll(const std::vector<int>& tokens) const;
  // lm_nll of each row.
  std::vector<double> lm_nll_batch(const SeqBatch& tokens) const;

  // Checkpoint view: parameters plus the freeze hash as two 32-bit halves.
  ParamStore checkpoint_params() const;
  static LanguageModel from_checkpoint(const ParamStore& stored);

 private:
  void check_frozen() const;

  std::size_t vocab_ = 0;
  std::size_t hidden_ = 0;
  ParamStore params_;
  std::optional<std::uint64_t> freeze_hash_;
};

}  // namespace driftlab::agents
