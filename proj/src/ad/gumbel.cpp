#include "driftlab/ad/gumbel.hpp"

#include <algorithm>

#include "driftlab/errors.hpp"

namespace driftlab::ad {

Tensor NoisyGumbel::emit(const Tensor& logits, double tau) {
  return gumbel_softmax_st(logits, tau, rng_);
}

Tensor NoiselessGumbel::emit(const Tensor& logits, double tau) {
  std::vector<double> zero(logits.numel(), 0.0);
  return gumbel_softmax_st(logits, tau, zero);
}

Tensor RecordingGumbel::emit(const Tensor& logits, double tau) {
  Step step;
  step.noise = sample_gumbel(rng_, logits.numel());
  Tensor out = gumbel_softmax_st(logits, tau, step.noise);
  step.hard.assign(out.data().begin(), out.data().end());
  {
    NoGradGuard no_grad;
    Tensor z = Tensor::from(logits.shape(), step.noise);
    z = scale(add(logits.detach(), z), 1.0 / tau);
    Tensor s = softmax(z);
    step.soft.assign(s.data().begin(), s.data().end());
  }
  steps_.push_back(std::move(step));
  return out;
}

Tensor FrozenGumbel::emit(const Tensor& logits, double tau) {
  if (next_ >= steps_.size()) throw ContractError("FrozenGumbel: replay exhausted");
  const auto& step = steps_[next_++];
  if (step.noise.size() != logits.numel()) {
    throw DimensionError("FrozenGumbel: replayed step does not match logits " +
                         shape_str(logits.shape()));
  }
  std::vector<double> offset(step.hard.size());
  for (std::size_t i = 0; i < offset.size(); ++i) offset[i] = step.hard[i] - step.soft[i];
  Tensor noise = Tensor::from(logits.shape(), step.noise);
  Tensor soft = softmax(scale(add(logits, noise), 1.0 / tau));
  return add(soft, Tensor::from(logits.shape(), std::move(offset)));
}

}  // namespace driftlab::ad
