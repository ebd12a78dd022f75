#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "driftlab/training/config.hpp"
#include "driftlab/training/data.hpp"
#include "driftlab/training/pretrain.hpp"

namespace driftlab::exp {

// Hyperparameter lists expanded as a cartesian product. An empty list keeps
// the base value. Axes only apply to methods that use them: alpha to s2p and
// ssil, beta to mixdata, k1/k2/k2_prime to the SIL family.
struct SweepSpec {
  std::vector<training::Method> methods;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<long> k1;
  std::vector<long> k2;
  std::vector<long> k2_prime;

  bool empty() const {
    return methods.empty() && alpha.empty() && beta.empty() && k1.empty() && k2.empty() &&
           k2_prime.empty();
  }
};

struct ExperimentConfig {
  training::GameConfig game;
  training::PretrainConfig pretrain;
  training::FinetuneConfig finetune;
  // Partial finetune objects merged over `finetune` for one method.
  std::map<training::Method, nlohmann::json> overrides;
  SweepSpec sweep;
  std::vector<std::uint64_t> seeds{1};
  std::string label;            // run directory name for a sweep-free config (default: method)
  std::string out;              // output root; empty means DRIFTLAB_OUT or the default
  long checkpoint_every = 0;    // also checkpoint every N evaluations (0 = start/end only)
};

// One resolved run of a sweep.
struct RunSpec {
  std::string label;  // directory name under run/, e.g. "s2p" or "s2p__alpha0.5"
  training::FinetuneConfig finetune;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

nlohmann::json game_to_json(const training::GameConfig& g);
nlohmann::json pretrain_to_json(const training::PretrainConfig& p);
nlohmann::json finetune_to_json(const training::FinetuneConfig& f);

// Applies a partial finetune object (same schema as the "finetune" section).
void merge_finetune(training::FinetuneConfig& f, const nlohmann::json& partial);

// Throws ConfigError on any invalid field or combination.
void validate(const ExperimentConfig& config);

// Cartesian product of the sweep axes with overrides applied; every entry is
// validated. Without sweep axes this is the single base run.
std::vector<RunSpec> expand_runs(const ExperimentConfig& config);

// Named presets; throws ConfigError for unknown names.
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace driftlab::exp
