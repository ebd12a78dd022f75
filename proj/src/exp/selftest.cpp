#include "driftlab/exp/selftest.hpp"

#include <functional>

#include "driftlab/ad/grad_tools.hpp"
#include "driftlab/ad/gumbel.hpp"
#include "driftlab/ad/ops.hpp"
#include "driftlab/agents/language_model.hpp"
#include "driftlab/agents/seq2seq.hpp"
#include "driftlab/training/finetune.hpp"

namespace driftlab::exp {

using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, ad::Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t.set_requires_grad(true);
}

// Weighted sum so every output coordinate matters.
Tensor project(const Tensor& y, const Tensor& w) { return ad::sum(ad::mul(y, w)); }

Tensor weights_like(const ad::Shape& shape, ad::Rng& rng) {
  Tensor w = Tensor::zeros(shape);
  for (double& v : w.data()) v = 2.0 * rng.uniform() - 1.0;
  return w;
}

agents::SeqBatch random_batch(std::size_t batch, std::size_t length, std::size_t vocab, ad::Rng& rng) {
  std::vector<std::vector<int>> rows(batch, std::vector<int>(length));
  for (auto& r : rows) {
    for (int& v : r) v = static_cast<int>(rng.uniform_index(vocab));
  }
  return agents::SeqBatch::from_rows(rows);
}

}  // namespace

std::vector<GradcheckCase> gradcheck_suite(std::uint64_t seed, std::size_t probes) {
  ad::Rng rng(seed, 0x6C);
  std::vector<GradcheckCase> out;
  auto check = [&](const std::string& name, const std::function<Tensor()>& loss,
                   std::vector<Tensor> params) {
    ad::Rng probe_rng = rng.fork(out.size() + 1);
    auto r = ad::gradcheck(loss, std::move(params), probe_rng, probes);
    out.push_back({name, r.max_rel_error, r.probes});
  };

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    Tensor w = weights_like({3, 5}, rng);
    check("matmul", [=] { return project(ad::matmul(a, b), w); }, {a, b});
  }
  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    Tensor w = weights_like({3, 4}, rng);
    check("add", [=] { return project(ad::add(a, b), w); }, {a, b});
    check("mul", [=] { return project(ad::mul(a, b), w); }, {a, b});
    check("scale", [=] { return project(ad::scale(a, -1.7), w); }, {a});
    check("tanh", [=] { return project(ad::tanh(a), w); }, {a});
    check("softmax", [=] { return project(ad::softmax(a), w); }, {a});
    check("log_softmax", [=] { return project(ad::log_softmax(a), w); }, {a});
    check("sum", [=] { return ad::sum(ad::mul(a, a)); }, {a});
    check("mean", [=] { return ad::mean(ad::mul(a, b)); }, {a, b});
  }
  {
    Tensor x = random_tensor({3, 4}, rng), bias = random_tensor({4}, rng);
    Tensor w = weights_like({3, 4}, rng);
    check("add_bias", [=] { return project(ad::add_bias(x, bias), w); }, {x, bias});
    Tensor row = random_tensor({1, 4}, rng);
    check("broadcast_rows", [=] { return project(ad::broadcast_rows(row, 3), w); }, {row});
  }
  {
    Tensor logits = random_tensor({4, 6}, rng, 2.0);
    std::vector<int> targets{0, 5, 2, 2};
    check("cross_entropy", [=] { return ad::cross_entropy(logits, targets); }, {logits});
  }
  {
    Tensor q = random_tensor({3, 5}, rng);
    std::vector<Tensor> keys;
    for (int j = 0; j < 4; ++j) keys.push_back(random_tensor({3, 5}, rng));
    Tensor w = weights_like({3, 5}, rng);
    std::vector<Tensor> params = keys;
    params.push_back(q);
    check("attention", [=] { return project(ad::attention(q, keys), w); }, params);
  }
  {
    // Straight-through op through its frozen surrogate.
    Tensor logits = random_tensor({4, 6}, rng, 2.0);
    Tensor w = weights_like({4, 6}, rng);
    ad::Rng noise_rng = rng.fork(0x51);
    ad::RecordingGumbel rec(noise_rng);
    {
      ad::NoGradGuard no_grad;
      rec.emit(logits, 0.5);
    }
    auto steps = rec.steps();
    check("gumbel_softmax_st",
          [=] {
            ad::FrozenGumbel frozen(steps);
            return project(frozen.emit(logits, 0.5), w);
          },
          {logits});
  }
  {
    const std::size_t vocab = 6, hidden = 5, batch = 3, length = 4;
    agents::Seq2Seq model = agents::Seq2Seq::init(seed + 1, vocab, vocab, hidden);
    for (auto& e : model.params().entries()) {
      for (double& v : e.tensor.data()) v *= 6.0;  // away from the near-linear regime
    }
    auto src = random_batch(batch, length, vocab, rng), tgt = random_batch(batch, length, vocab, rng);
    check("seq2seq_nll", [=] { return model.nll_teacher_forced(src, tgt); }, model.params().tensors());

    agents::LanguageModel lm = agents::LanguageModel::init(seed + 2, vocab, hidden);
    for (auto& e : lm.params().entries()) {
      for (double& v : e.tensor.data()) v *= 6.0;
    }
    check("language_model_nll", [=]() mutable { return lm.nll(tgt); }, lm.params().tensors());
  }
  {
    // Full pipeline: sender Gumbel-decodes, receiver scores the gold target.
    const std::size_t vocab = 6, hidden = 5, batch = 3, length = 4;
    training::AgentPair agents{agents::Seq2Seq::init(seed + 3, vocab, vocab, hidden),
                               agents::Seq2Seq::init(seed + 4, vocab, vocab, hidden)};
    for (auto* m : {&agents.sender, &agents.receiver}) {
      for (auto& e : m->params().entries()) {
        for (double& v : e.tensor.data()) v *= 6.0;
      }
    }
    training::Batch task{random_batch(batch, length, vocab, rng), random_batch(batch, length, vocab, rng)};
    ad::Rng noise_rng = rng.fork(0x52);
    ad::RecordingGumbel rec(noise_rng);
    {
      ad::NoGradGuard no_grad;
      training::interactive_loss(agents.sender, agents.receiver, task, 0.5, rec);
    }
    auto steps = rec.steps();
    std::vector<Tensor> params = agents.sender.params().tensors();
    for (const auto& t : agents.receiver.params().tensors()) params.push_back(t);
    check("gumbel_pipeline",
          [=] {
            ad::FrozenGumbel frozen(steps);
            return training::interactive_loss(agents.sender, agents.receiver, task, 0.5, frozen);
          },
          params);
  }
  return out;
}

}  // namespace driftlab::exp
