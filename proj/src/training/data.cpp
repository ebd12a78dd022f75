#include "driftlab/training/data.hpp"

#include "driftlab/errors.hpp"

namespace driftlab::training {

GameData build_game_data(const GameConfig& config) {
  if (config.pretrain_pairs == 0 || config.task_pairs == 0 || config.eval_pairs == 0 ||
      config.pretrain_val_pairs == 0) {
    throw ParameterError("corpus sizes must be positive");
  }
  GameData d;
  d.game = game::make_game(config.seed, config.vocab, config.reverse_target);
  d.pretrain_dist = game::make_distribution(config.vocab, config.zipf_exponent, std::nullopt,
                                            config.len_min, config.len_max);
  d.task_dist = game::make_distribution(config.vocab, config.zipf_exponent, config.shift_seed,
                                        config.len_min, config.len_max);

  ad::Rng root(config.seed, 0xDA7A);
  ad::Rng r1 = root.fork(1), r2 = root.fork(2), r3 = root.fork(3), r4 = root.fork(4),
          r5 = root.fork(5), r6 = root.fork(6);
  d.pretrain_src_pvt_corpus = game::sample_corpus(d.game, d.pretrain_dist, config.pretrain_pairs,
                                                  game::PairKind::kSrcPvt, r1);
  d.pretrain_pvt_tgt_corpus = game::sample_corpus(d.game, d.pretrain_dist, config.pretrain_pairs,
                                                  game::PairKind::kPvtTgt, r2);
  d.task_corpus =
      game::sample_corpus(d.game, d.task_dist, config.task_pairs, game::PairKind::kSrcTgt, r3);
  d.pre_src_pvt = PairSet::from_corpus(d.pretrain_src_pvt_corpus);
  d.pre_pvt_tgt = PairSet::from_corpus(d.pretrain_pvt_tgt_corpus);
  d.val_src_pvt = PairSet::from_corpus(game::sample_corpus(
      d.game, d.pretrain_dist, config.pretrain_val_pairs, game::PairKind::kSrcPvt, r4));
  d.val_pvt_tgt = PairSet::from_corpus(game::sample_corpus(
      d.game, d.pretrain_dist, config.pretrain_val_pairs, game::PairKind::kPvtTgt, r5));
  d.task = PairSet::from_corpus(d.task_corpus);
  d.eval_set = game::sample_eval_set(d.game, d.task_dist, config.eval_pairs, r6);
  return d;
}

}  // namespace driftlab::training
