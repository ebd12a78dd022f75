#pragma once

#include <vector>

#include "driftlab/agents/params.hpp"

namespace driftlab::training {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are laid out like the store the
// optimizer was built for; parameters without a gradient are skipped.
class Adam {
 public:
  Adam(const agents::ParamStore& params, AdamConfig config = {});

  void step(agents::ParamStore& params);
  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long steps_ = 0;
};

}  // namespace driftlab::training
