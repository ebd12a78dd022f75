#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/exp/config.hpp"
#include "driftlab/metrics/evaluation.hpp"
#include "driftlab/training/finetune.hpp"

namespace driftlab::exp {

inline constexpr const char* kOutEnv = "DRIFTLAB_OUT";
inline constexpr const char* kDefaultOut = "driftlab_out";

// Output root: explicit flag, then config "out", then $DRIFTLAB_OUT, then
// ./driftlab_out.
std::filesystem::path output_root(const std::optional<std::string>& flag,
                                  const ExperimentConfig& config);

struct Pretrained {
  training::AgentPair agents;
  agents::LanguageModel lm;
  double sender_val_nll = 0.0;
  double receiver_val_nll = 0.0;
  double grounding_bleu = 0.0;  // sender greedy BLEU on held-out pretraining pivots
  double receiver_bleu = 0.0;
  bool from_cache = false;
};

// Directory holding pretrained checkpoints for this game/pretraining setup.
// Seed-independent parts (the language model) live directly inside it.
std::filesystem::path pretrain_dir(const std::filesystem::path& root, const ExperimentConfig& config);

// Loads cached checkpoints for `seed` or trains and caches them.
Pretrained obtain_pretrained(const ExperimentConfig& config, const training::GameData& data,
                             std::uint64_t seed, const std::filesystem::path& root);

// Trains without touching the filesystem.
Pretrained pretrain_agents(const ExperimentConfig& config, const training::GameData& data,
                           std::uint64_t seed);
agents::LanguageModel train_pivot_lm(const ExperimentConfig& config, const training::GameData& data);

struct RunOutput {
  std::string label;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  std::vector<metrics::MetricsRecord> trajectory;
  double seconds = 0.0;
};

// Single-run config archived beside the outputs; reproduces the run verbatim.
nlohmann::json archived_config(const ExperimentConfig& config, const RunSpec& run, std::uint64_t seed);

// Runs one (spec, seed) into root/run/<label>/<seed>/ and writes config.json,
// metrics.csv, metrics.jsonl, ckpt/ and plots/.
RunOutput run_one(const ExperimentConfig& config, const RunSpec& run, std::uint64_t seed,
                  const training::GameData& data, const Pretrained& pretrained,
                  const std::filesystem::path& root);

using ProgressFn = std::function<void(const std::string&)>;

// Every run of the expansion for every seed, then root/summary.{json,md} and
// root/plots/<metric>.svg over all runs.
std::vector<RunOutput> run_experiment(const ExperimentConfig& config,
                                      const std::filesystem::path& root,
                                      const ProgressFn& progress = {});

// Reruns root/run/<label>/<seed>/config.json into `root` (a fresh directory).
RunOutput rerun_archived(const std::filesystem::path& archived_config_path,
                         const std::filesystem::path& root);

std::vector<metrics::CsvRow> read_csv_file(const std::filesystem::path& path);

}  // namespace driftlab::exp
