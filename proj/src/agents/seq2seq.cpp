#include "driftlab/agents/seq2seq.hpp"

#include <cmath>

#include "driftlab/ad/ops.hpp"
#include "driftlab/errors.hpp"

namespace driftlab::agents {

using ad::Tensor;

std::vector<int> SeqBatch::step(std::size_t t) const {
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) out[b] = at(b, t);
  return out;
}

std::vector<int> SeqBatch::row(std::size_t b) const {
  return std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(b * length),
                          ids.begin() + static_cast<std::ptrdiff_t>((b + 1) * length));
}

SeqBatch SeqBatch::from_rows(const std::vector<const std::vector<int>*>& rows) {
  if (rows.empty()) throw ContractError("SeqBatch: empty batch");
  SeqBatch out;
  out.batch = rows.size();
  out.length = rows.front()->size();
  if (out.length == 0) throw ContractError("SeqBatch: empty sequence");
  out.ids.reserve(out.batch * out.length);
  for (const auto* r : rows) {
    if (r->size() != out.length) throw ContractError("SeqBatch: sequences differ in length");
    out.ids.insert(out.ids.end(), r->begin(), r->end());
  }
  return out;
}

SeqBatch SeqBatch::from_rows(const std::vector<std::vector<int>>& rows) {
  std::vector<const std::vector<int>*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto& r : rows) ptrs.push_back(&r);
  return from_rows(ptrs);
}

void init_uniform(ParamStore& params, std::uint64_t seed, double range) {
  ad::Rng rng(seed, 11);
  for (auto& e : params.entries()) {
    for (double& v : e.tensor.data()) v = range * (2.0 * rng.uniform() - 1.0);
  }
}

Seq2Seq Seq2Seq::init(std::uint64_t seed, std::size_t vocab_in, std::size_t vocab_out,
                      std::size_t hidden) {
  if (vocab_in < 1 || vocab_out < 1 || hidden < 1) {
    throw ParameterError("Seq2Seq::init: dimensions must be at least 1");
  }
  Seq2Seq m;
  m.vocab_in_ = vocab_in;
  m.vocab_out_ = vocab_out;
  m.hidden_ = hidden;
  const std::size_t d = hidden;
  auto p = [](ad::Shape s) { return Tensor::zeros(std::move(s)).set_requires_grad(true); };
  m.params_.add("enc.embed", p({vocab_in, d}));
  m.params_.add("enc.w_hh", p({d, d}));
  m.params_.add("enc.b_h", p({d}));
  m.params_.add("dec.bos", p({1, d}));
  m.params_.add("dec.embed", p({vocab_out, d}));
  m.params_.add("dec.w_ss", p({d, d}));
  m.params_.add("dec.w_cs", p({d, d}));
  m.params_.add("dec.b_s", p({d}));
  m.params_.add("att.w_os", p({d, d}));
  m.params_.add("att.w_oc", p({d, d}));
  m.params_.add("att.b_o", p({d}));
  m.params_.add("out.w", p({d, vocab_out}));
  m.params_.add("out.b", p({vocab_out}));
  init_uniform(m.params_, seed, kInitRange);
  return m;
}

Seq2Seq Seq2Seq::clone() const {
  Seq2Seq copy;
  copy.vocab_in_ = vocab_in_;
  copy.vocab_out_ = vocab_out_;
  copy.hidden_ = hidden_;
  copy.params_ = params_.clone();
  return copy;
}

std::vector<Tensor> Seq2Seq::one_hot_steps(const SeqBatch& batch, std::size_t width) const {
  std::vector<Tensor> steps;
  steps.reserve(batch.length);
  for (std::size_t t = 0; t < batch.length; ++t) {
    auto ids = batch.step(t);
    steps.push_back(Tensor::one_hot(ids, width));
  }
  return steps;
}

std::vector<Tensor> Seq2Seq::encode(const std::vector<Tensor>& rows) const {
  if (rows.empty()) throw ContractError("encode: empty input sequence");
  const Tensor& embed = params_.get("enc.embed");
  const Tensor& w_hh = params_.get("enc.w_hh");
  const Tensor& b_h = params_.get("enc.b_h");
  std::vector<Tensor> states;
  Tensor h;
  for (const Tensor& x : rows) {
    if (x.rank() != 2 || x.dim(1) != vocab_in_) {
      throw DimensionError("encode: input rows " + ad::shape_str(x.shape()) +
                           " do not match input vocabulary " + std::to_string(vocab_in_));
    }
    Tensor pre = ad::matmul(x, embed);
    if (h.defined()) pre = ad::add(pre, ad::matmul(h, w_hh));
    h = ad::tanh(ad::add_bias(pre, b_h));
    states.push_back(h);
  }
  return states;
}

Seq2Seq::DecoderState Seq2Seq::start_decoder(std::vector<Tensor> encoded) const {
  DecoderState st;
  st.state = encoded.back();
  st.context =
      ad::add_bias(ad::matmul(encoded.back(), params_.get("dec.w_cs")), params_.get("dec.b_s"));
  st.keys = std::move(encoded);
  return st;
}

Tensor Seq2Seq::decoder_step(DecoderState& st, const Tensor& emb) const {
  Tensor pre = ad::add(ad::add(emb, ad::matmul(st.state, params_.get("dec.w_ss"))), st.context);
  st.state = ad::tanh(pre);
  Tensor attended = ad::attention(st.state, st.keys);
  Tensor mixed = ad::add(ad::matmul(st.state, params_.get("att.w_os")),
                         ad::matmul(attended, params_.get("att.w_oc")));
  Tensor out = ad::tanh(ad::add_bias(mixed, params_.get("att.b_o")));
  return ad::add_bias(ad::matmul(out, params_.get("out.w")), params_.get("out.b"));
}

Tensor Seq2Seq::nll_teacher_forced(const SeqBatch& src, const SeqBatch& tgt) const {
  return nll_teacher_forced(one_hot_steps(src, vocab_in_), tgt);
}

Tensor Seq2Seq::nll_teacher_forced(const std::vector<Tensor>& src_rows, const SeqBatch& tgt) const {
  if (src_rows.size() != tgt.length) {
    throw ContractError("nll_teacher_forced: source length " + std::to_string(src_rows.size()) +
                        " != target length " + std::to_string(tgt.length));
  }
  if (src_rows.front().dim(0) != tgt.batch) {
    throw ContractError("nll_teacher_forced: source and target batch sizes differ");
  }
  DecoderState st = start_decoder(encode(src_rows));
  const Tensor& embed = params_.get("dec.embed");
  Tensor emb = ad::broadcast_rows(params_.get("dec.bos"), tgt.batch);
  Tensor total;
  for (std::size_t t = 0; t < tgt.length; ++t) {
    Tensor logits = decoder_step(st, emb);
    auto gold = tgt.step(t);
    Tensor ce = ad::cross_entropy(logits, gold);
    total = total.defined() ? ad::add(total, ce) : ce;
    if (t + 1 < tgt.length) emb = ad::matmul(Tensor::one_hot(gold, vocab_out_), embed);
  }
  return ad::scale(total, 1.0 / static_cast<double>(tgt.length));
}

std::vector<double> Seq2Seq::token_log_probs(const SeqBatch& src, const SeqBatch& tgt) const {
  if (src.length != tgt.length || src.batch != tgt.batch) {
    throw ContractError("token_log_probs: source/target shapes differ");
  }
  ad::NoGradGuard no_grad;
  DecoderState st = start_decoder(encode(one_hot_steps(src, vocab_in_)));
  const Tensor& embed = params_.get("dec.embed");
  Tensor emb = ad::broadcast_rows(params_.get("dec.bos"), tgt.batch);
  std::vector<double> out(tgt.batch * tgt.length);
  for (std::size_t t = 0; t < tgt.length; ++t) {
    Tensor logp = ad::log_softmax(decoder_step(st, emb));
    auto gold = tgt.step(t);
    for (std::size_t b = 0; b < tgt.batch; ++b) {
      out[b * tgt.length + t] = logp.data()[b * vocab_out_ + static_cast<std::size_t>(gold[b])];
    }
    if (t + 1 < tgt.length) emb = ad::matmul(Tensor::one_hot(gold, vocab_out_), embed);
  }
  return out;
}

DecodeOutput Seq2Seq::greedy_decode(const SeqBatch& src) const {
  ad::NoGradGuard no_grad;
  DecodeOutput out;
  out.tokens.batch = src.batch;
  out.tokens.length = src.length;
  out.tokens.ids.assign(src.batch * src.length, 0);
  out.log_probs.assign(src.batch * src.length, 0.0);

  DecoderState st = start_decoder(encode(one_hot_steps(src, vocab_in_)));
  const Tensor& embed = params_.get("dec.embed");
  Tensor emb = ad::broadcast_rows(params_.get("dec.bos"), src.batch);
  for (std::size_t t = 0; t < src.length; ++t) {
    Tensor logits = decoder_step(st, emb);
    auto ids = ad::argmax_rows(logits);
    Tensor logp = ad::log_softmax(logits);
    for (std::size_t b = 0; b < src.batch; ++b) {
      out.tokens.ids[b * src.length + t] = ids[b];
      out.log_probs[b * src.length + t] = logp.data()[b * vocab_out_ + static_cast<std::size_t>(ids[b])];
    }
    if (t + 1 < src.length) emb = ad::matmul(Tensor::one_hot(ids, vocab_out_), embed);
  }
  return out;
}

DecodeOutput Seq2Seq::gumbel_decode(const SeqBatch& src, double tau,
                                    ad::GumbelSampler& sampler) const {
  if (!(tau > 0.0)) throw ParameterError("gumbel_decode: tau must be positive");
  DecodeOutput out;
  out.tokens.batch = src.batch;
  out.tokens.length = src.length;
  out.tokens.ids.assign(src.batch * src.length, 0);
  out.log_probs.assign(src.batch * src.length, 0.0);

  DecoderState st = start_decoder(encode(one_hot_steps(src, vocab_in_)));
  const Tensor& embed = params_.get("dec.embed");
  Tensor emb = ad::broadcast_rows(params_.get("dec.bos"), src.batch);
  for (std::size_t t = 0; t < src.length; ++t) {
    Tensor logits = decoder_step(st, emb);
    Tensor y = sampler.emit(logits, tau);
    auto ids = ad::argmax_rows(y);
    {
      ad::NoGradGuard no_grad;
      Tensor logp = ad::log_softmax(logits.detach());
      for (std::size_t b = 0; b < src.batch; ++b) {
        out.tokens.ids[b * src.length + t] = ids[b];
        out.log_probs[b * src.length + t] =
            logp.data()[b * vocab_out_ + static_cast<std::size_t>(ids[b])];
      }
    }
    out.one_hots.push_back(y);
    if (t + 1 < src.length) emb = ad::matmul(y, embed);
  }
  return out;
}

DecodeOutput Seq2Seq::gumbel_decode(const SeqBatch& src, double tau, ad::Rng& rng) const {
  ad::NoisyGumbel sampler(rng);
  return gumbel_decode(src, tau, sampler);
}

DecodeOutput Seq2Seq::sample_decode(const SeqBatch& src, ad::Rng& rng) const {
  ad::NoGradGuard no_grad;
  DecodeOutput out;
  out.tokens.batch = src.batch;
  out.tokens.length = src.length;
  out.tokens.ids.assign(src.batch * src.length, 0);
  out.log_probs.assign(src.batch * src.length, 0.0);

  DecoderState st = start_decoder(encode(one_hot_steps(src, vocab_in_)));
  const Tensor& embed = params_.get("dec.embed");
  Tensor emb = ad::broadcast_rows(params_.get("dec.bos"), src.batch);
  for (std::size_t t = 0; t < src.length; ++t) {
    Tensor logp = ad::log_softmax(decoder_step(st, emb));
    std::vector<int> ids(src.batch);
    for (std::size_t b = 0; b < src.batch; ++b) {
      double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = vocab_out_ - 1;
      for (std::size_t v = 0; v < vocab_out_; ++v) {
        acc += std::exp(logp.data()[b * vocab_out_ + v]);
        if (u < acc) {
          pick = v;
          break;
        }
      }
      ids[b] = static_cast<int>(pick);
      out.tokens.ids[b * src.length + t] = ids[b];
      out.log_probs[b * src.length + t] = logp.data()[b * vocab_out_ + pick];
    }
    if (t + 1 < src.length) emb = ad::matmul(Tensor::one_hot(ids, vocab_out_), embed);
  }
  return out;
}

}  // namespace driftlab::agents
