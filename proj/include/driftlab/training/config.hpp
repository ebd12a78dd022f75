#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "driftlab/training/adam.hpp"

namespace driftlab::training {

enum class Method { kGumbel, kS2P, kSIL, kSSIL, kMixData };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
bool is_sil_family(Method m);

enum class ReceiverImitationTarget { kTeacher, kGold };

struct FinetuneConfig {
  Method method = Method::kGumbel;
  double alpha = 0.0;  // supervised weight: S2P, and the SSIL teacher
  long k1 = 3000;      // teacher interactive steps per iteration
  long k2 = 200;       // student-sender imitation steps per iteration
  long k2_prime = 300; // student-receiver imitation steps per iteration
  double beta = 0.0;   // MixData: fraction of each imitation batch from pretraining data
  double tau = 0.5;    // Gumbel temperature
  AdamConfig adam{};
  std::size_t batch = 32;
  long total_steps = 6000;  // interactive step budget
  long eval_interval = 500; // gumbel/s2p; SIL-family evaluates once per iteration
  long probe_interval = 50;
  std::size_t teacher_dataset_size = 3000;
  ReceiverImitationTarget receiver_target = ReceiverImitationTarget::kTeacher;
  bool stochastic_teacher = false;  // sample the teacher dataset instead of greedy decoding
  bool allow_zero_imitation = false; // permits k2 = k2' = 0 (diagnostic runs)
  std::uint64_t seed = 1;

  // Throws ParameterError on an invalid combination.
  void validate() const;
};

}  // namespace driftlab::training
