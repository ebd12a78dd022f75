#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "driftlab/ad/gumbel.hpp"
#include "driftlab/ad/rng.hpp"
#include "driftlab/agents/params.hpp"

namespace driftlab::agents {

// Equal-length token sequences stored row-major as [batch x length].
struct SeqBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<int> ids;

  int at(std::size_t b, std::size_t t) const { return ids[b * length + t]; }
  std::vector<int> step(std::size_t t) const;
  std::vector<int> row(std::size_t b) const;

  // All sequences must share one nonzero length.
  static SeqBatch from_rows(const std::vector<std::vector<int>>& rows);
  static SeqBatch from_rows(const std::vector<const std::vector<int>*>& rows);
};

struct DecodeOutput {
  SeqBatch tokens;
  // One [batch x V_out] straight-through one-hot per step; empty for greedy.
  std::vector<ad::Tensor> one_hots;
  // log p(emitted token) per position, [batch x length].
  std::vector<double> log_probs;
};

// Elman encoder-decoder with tanh cells and dot-product attention over the
// encoder states. Inputs enter as one-hot rows times an embedding table, so
// discrete ids and straight-through samples share a single code path.
//
//   encoder:  h_t = tanh(x_t E_in + h_{t-1} W_hh + b_h),  h_0 = 0
//   decoder:  s_0 = h_L,  c = h_L W_cs + b_s
//             s_t = tanh(e_t + s_{t-1} W_ss + c),  e_0 = bos, e_t = y_{t-1} E_out
//             a_t = softmax(s_t . h_1..L) weighted sum of h_1..L
//             o_t = tanh(s_t W_os + a_t W_oc + b_o)
//             logits_t = o_t W_out + b_out
class Seq2Seq {
 public:
  static constexpr double kInitRange = 0.08;

  Seq2Seq() = default;
  static Seq2Seq init(std::uint64_t seed, std::size_t vocab_in, std::size_t vocab_out,
                      std::size_t hidden = 32);

  std::size_t vocab_in() const { return vocab_in_; }
  std::size_t vocab_out() const { return vocab_out_; }
  std::size_t hidden() const { return hidden_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  Seq2Seq clone() const;

  // Mean per-token cross-entropy of `tgt` given `src`, decoder fed the gold
  // previous token.
  ad::Tensor nll_teacher_forced(const SeqBatch& src, const SeqBatch& tgt) const;
  // Same, with the encoder reading arbitrary [batch x V_in] rows (e.g. the
  // straight-through output of another agent).
  ad::Tensor nll_teacher_forced(const std::vector<ad::Tensor>& src_rows, const SeqBatch& tgt) const;

  // Teacher-forced log p(tgt_t | ...) per position, [batch x length]. No tape.
  std::vector<double> token_log_probs(const SeqBatch& src, const SeqBatch& tgt) const;

  DecodeOutput greedy_decode(const SeqBatch& src) const;
  DecodeOutput gumbel_decode(const SeqBatch& src, double tau, ad::GumbelSampler& sampler) const;
  DecodeOutput gumbel_decode(const SeqBatch& src, double tau, ad::Rng& rng) const;
  // Ancestral sampling at temperature 1. No tape.
  DecodeOutput sample_decode(const SeqBatch& src, ad::Rng& rng) const;

 private:
  // Encoder state after each input position.
  std::vector<ad::Tensor> encode(const std::vector<ad::Tensor>& rows) const;
  std::vector<ad::Tensor> one_hot_steps(const SeqBatch& batch, std::size_t width) const;

  struct DecoderState {
    ad::Tensor state;
    ad::Tensor context;
    std::vector<ad::Tensor> keys;  // encoder states, attended at every step
  };
  DecoderState start_decoder(std::vector<ad::Tensor> encoded) const;
  // Advances one step from input embedding `emb`; returns logits.
  ad::Tensor decoder_step(DecoderState& st, const ad::Tensor& emb) const;

  std::size_t vocab_in_ = 0;
  std::size_t vocab_out_ = 0;
  std::size_t hidden_ = 0;
  ParamStore params_;
};

// Uniform(-range, range) initialization of every entry, in store order.
void init_uniform(ParamStore& params, std::uint64_t seed, double range);

}  // namespace driftlab::agents
