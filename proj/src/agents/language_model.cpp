#include "driftlab/agents/language_model.hpp"

#include "driftlab/ad/ops.hpp"
#include "driftlab/errors.hpp"

namespace driftlab::agents {

using ad::Tensor;

LanguageModel LanguageModel::init(std::uint64_t seed, std::size_t vocab, std::size_t hidden) {
  if (vocab < 1 || hidden < 1) throw ParameterError("LanguageModel::init: dimensions must be >= 1");
  LanguageModel lm;
  lm.vocab_ = vocab;
  lm.hidden_ = hidden;
  auto p = [](ad::Shape s) { return Tensor::zeros(std::move(s)).set_requires_grad(true); };
  lm.params_.add("lm.bos", p({1, hidden}));
  lm.params_.add("lm.embed", p({vocab, hidden}));
  lm.params_.add("lm.w_ss", p({hidden, hidden}));
  lm.params_.add("lm.b_s", p({hidden}));
  lm.params_.add("lm.out.w", p({hidden, vocab}));
  lm.params_.add("lm.out.b", p({vocab}));
  init_uniform(lm.params_, seed, Seq2Seq::kInitRange);
  return lm;
}

ParamStore& LanguageModel::params() {
  if (frozen()) throw ContractError("language model is frozen");
  return params_;
}

Tensor LanguageModel::nll(const SeqBatch& tokens) const {
  const Tensor& embed = params_.get("lm.embed");
  const Tensor& w = params_.get("lm.w_ss");
  const Tensor& b = params_.get("lm.b_s");
  const Tensor& w_out = params_.get("lm.out.w");
  const Tensor& b_out = params_.get("lm.out.b");
  Tensor emb = ad::broadcast_rows(params_.get("lm.bos"), tokens.batch);
  Tensor state;
  Tensor total;
  for (std::size_t t = 0; t < tokens.length; ++t) {
    Tensor pre = state.defined() ? ad::add(emb, ad::matmul(state, w)) : emb;
    state = ad::tanh(ad::add_bias(pre, b));
    Tensor logits = ad::add_bias(ad::matmul(state, w_out), b_out);
    auto gold = tokens.step(t);
    Tensor ce = ad::cross_entropy(logits, gold);
    total = total.defined() ? ad::add(total, ce) : ce;
    if (t + 1 < tokens.length) emb = ad::matmul(Tensor::one_hot(gold, vocab_), embed);
  }
  return ad::scale(total, 1.0 / static_cast<double>(tokens.length));
}

void LanguageModel::freeze() { freeze_hash_ = params_.content_hash(); }

std::uint64_t LanguageModel::freeze_hash() const {
  if (!freeze_hash_) throw ContractError("language model is not frozen");
  return *freeze_hash_;
}

void LanguageModel::check_frozen() const {
  if (!freeze_hash_) throw ContractError("lm_nll requires a frozen language model");
  if (params_.content_hash() != *freeze_hash_) {
    throw ContractError("frozen language model parameters changed since freeze");
  }
}

std::vector<double> LanguageModel::lm_nll_batch(const SeqBatch& tokens) const {
  check_frozen();
  ad::NoGradGuard no_grad;
  const Tensor& embed = params_.get("lm.embed");
  const Tensor& w = params_.get("lm.w_ss");
  const Tensor& b = params_.get("lm.b_s");
  const Tensor& w_out = params_.get("lm.out.w");
  const Tensor& b_out = params_.get("lm.out.b");
  Tensor emb = ad::broadcast_rows(params_.get("lm.bos"), tokens.batch);
  Tensor state;
  std::vector<double> total(tokens.batch, 0.0);
  for (std::size_t t = 0; t < tokens.length; ++t) {
    Tensor pre = state.defined() ? ad::add(emb, ad::matmul(state, w)) : emb;
    state = ad::tanh(ad::add_bias(pre, b));
    Tensor logp = ad::log_softmax(ad::add_bias(ad::matmul(state, w_out), b_out));
    auto gold = tokens.step(t);
    for (std::size_t i = 0; i < tokens.batch; ++i) {
      total[i] -= logp.data()[i * vocab_ + static_cast<std::size_t>(gold[i])];
    }
    if (t + 1 < tokens.length) emb = ad::matmul(Tensor::one_hot(gold, vocab_), embed);
  }
  for (double& v : total) v /= static_cast<double>(tokens.length);
  return total;
}

double LanguageModel::lm_nll(const std::vector<int>& tokens) const {
  if (tokens.empty()) throw ContractError("lm_nll: empty sequence");
  return lm_nll_batch(SeqBatch::from_rows(std::vector<std::vector<int>>{tokens})).front();
}

ParamStore LanguageModel::checkpoint_params() const {
  ParamStore out = params_.clone();
  std::uint64_t h = freeze_hash();
  out.add(kFreezeHashName, Tensor::from({2}, {static_cast<double>(h >> 32u),
                                              static_cast<double>(h & 0xFFFFFFFFu)}));
  return out;
}

LanguageModel LanguageModel::from_checkpoint(const ParamStore& stored) {
  const Tensor& embed = stored.get("lm.embed");
  LanguageModel lm = init(0, embed.dim(0), embed.dim(1));
  ParamStore values;
  for (const auto& e : stored.entries()) {
    if (e.name != kFreezeHashName) values.add(e.name, e.tensor.clone());
  }
  if (!lm.params_.same_layout(values)) throw DataError("language model checkpoint layout mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto src = values.entries()[i].tensor.data();
    auto dst = lm.params_.entries()[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  const auto halves = stored.get(kFreezeHashName).data();
  const std::uint64_t recorded =
      (static_cast<std::uint64_t>(halves[0]) << 32u) | static_cast<std::uint64_t>(halves[1]);
  lm.freeze();
  if (lm.freeze_hash() != recorded) throw DataError("language model checkpoint hash mismatch");
  return lm;
}

}  // namespace driftlab::agents
