#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "driftlab/game/game.hpp"
#include "driftlab/training/pair_set.hpp"

namespace driftlab::training {

// Sizes and knobs of one synthetic world. Defaults are desk-scale choices:
// a skewed concept distribution over 40 words, so the task shift moves mass
// onto concepts that are rare during pretraining.
struct GameConfig {
  std::uint64_t seed = 2020;
  std::size_t vocab = 40;
  std::size_t len_min = 4;
  std::size_t len_max = 8;
  bool reverse_target = true;
  double zipf_exponent = 2.0;
  // Seed of the task-distribution rank permutation; empty = no frequency shift.
  std::optional<std::uint64_t> shift_seed = 7;
  std::size_t pretrain_pairs = 5000;  // per direction
  std::size_t pretrain_val_pairs = 500;
  std::size_t task_pairs = 3000;
  std::size_t eval_pairs = 500;
};

struct GameData {
  game::GameSpec game;
  game::DistributionSpec pretrain_dist;
  game::DistributionSpec task_dist;
  std::vector<game::CorpusPair> pretrain_src_pvt_corpus;
  std::vector<game::CorpusPair> pretrain_pvt_tgt_corpus;
  std::vector<game::CorpusPair> task_corpus;  // src-tgt
  PairSet pre_src_pvt;
  PairSet pre_pvt_tgt;
  PairSet val_src_pvt;
  PairSet val_pvt_tgt;
  PairSet task;
  std::vector<game::EvalExample> eval_set;  // held out, task distribution
};

// Deterministic in the config.
GameData build_game_data(const GameConfig& config);

}  // namespace driftlab::training
