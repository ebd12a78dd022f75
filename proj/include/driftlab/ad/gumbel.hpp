#pragma once

#include <vector>

#include "driftlab/ad/ops.hpp"

namespace driftlab::ad {

// Source of straight-through one-hot samples for a decoder. Decoders call
// emit() once per step with [batch x V] logits.
class GumbelSampler {
 public:
  virtual ~GumbelSampler() = default;
  virtual Tensor emit(const Tensor& logits, double tau) = 0;
};

// Fresh Gumbel noise from an Rng on every call.
class NoisyGumbel final : public GumbelSampler {
 public:
  explicit NoisyGumbel(Rng& rng) : rng_(rng) {}
  Tensor emit(const Tensor& logits, double tau) override;

 private:
  Rng& rng_;
};

// Noise forced to zero: emits the one-hot argmax of the logits.
class NoiselessGumbel final : public GumbelSampler {
 public:
  Tensor emit(const Tensor& logits, double tau) override;
};

// Wraps an Rng and remembers, per call, the noise, the emitted one-hot and
// the soft sample. FrozenGumbel replays a recording.
class RecordingGumbel final : public GumbelSampler {
 public:
  struct Step {
    std::vector<double> noise;
    std::vector<double> hard;
    std::vector<double> soft;
  };

  explicit RecordingGumbel(Rng& rng) : rng_(rng) {}
  Tensor emit(const Tensor& logits, double tau) override;
  const std::vector<Step>& steps() const { return steps_; }

 private:
  Rng& rng_;
  std::vector<Step> steps_;
};

// Differentiable surrogate of a recorded straight-through pass: step t emits
//   hard_t + softmax((logits + noise_t) / tau) - soft_t
// with the recorded discrete choices held fixed. Its value equals the
// recorded one-hot at the recording point and its exact gradient there is
// the straight-through gradient, so finite differences of a loss built on
// it check the straight-through backward.
class FrozenGumbel final : public GumbelSampler {
 public:
  explicit FrozenGumbel(std::vector<RecordingGumbel::Step> steps) : steps_(std::move(steps)) {}
  Tensor emit(const Tensor& logits, double tau) override;

 private:
  std::vector<RecordingGumbel::Step> steps_;
  std::size_t next_ = 0;
};

}  // namespace driftlab::ad
