#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftlab/agents/checkpoint.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/exp/config.hpp"
#include "driftlab/exp/plot.hpp"
#include "driftlab/exp/runner.hpp"
#include "driftlab/exp/selftest.hpp"
#include "driftlab/training/data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace driftlab;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;

struct Common {
  std::string config_path;
  std::string preset_name;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::optional<long> steps;
};

void add_common(CLI::App* cmd, Common& c) {
  auto* cfg = cmd->add_option("--config", c.config_path, "Experiment config (JSON)");
  cmd->add_option("--preset", c.preset_name, "Named preset (paper-shape, smoke)")->excludes(cfg);
  cmd->add_option("--out", c.out, "Output root (default: $DRIFTLAB_OUT or ./driftlab_out)");
  cmd->add_option("--seeds", c.seeds, "Comma-separated seeds")->delimiter(',');
  cmd->add_option("--steps", c.steps, "Interactive step budget");
}

exp::ExperimentConfig resolve(const Common& c) {
  exp::ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    cfg = exp::load_config(c.config_path);
  } else if (!c.preset_name.empty()) {
    cfg = exp::preset(c.preset_name);
  }
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (c.steps) cfg.finetune.total_steps = *c.steps;
  return cfg;
}

fs::path root_of(const Common& c, const exp::ExperimentConfig& cfg) {
  return exp::output_root(c.out.empty() ? std::nullopt : std::optional<std::string>(c.out), cfg);
}

void print_progress(const std::string& line) { std::cerr << line << std::endl; }

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_gen_data(const Common& c) {
  auto cfg = resolve(c);
  exp::validate(cfg);
  const fs::path dir = root_of(c, cfg) / "data";
  auto data = training::build_game_data(cfg.game);
  auto dump = [&](const std::string& name, const std::vector<game::CorpusPair>& pairs) {
    std::ostringstream s;
    game::write_corpus(s, pairs, data.game);
    write_file(dir / name, s.str());
  };
  dump("pretrain_src_pvt.tsv", data.pretrain_src_pvt_corpus);
  dump("pretrain_pvt_tgt.tsv", data.pretrain_pvt_tgt_corpus);
  dump("task_src_tgt.tsv", data.task_corpus);
  std::vector<game::CorpusPair> eval_pvt, eval_tgt;
  for (const auto& ex : data.eval_set) {
    eval_pvt.push_back({ex.source, ex.pivot, game::PairKind::kSrcPvt});
    eval_tgt.push_back({ex.source, ex.target, game::PairKind::kSrcTgt});
  }
  dump("eval_src_pvt.tsv", eval_pvt);
  dump("eval_src_tgt.tsv", eval_tgt);
  json g{{"config", exp::game_to_json(cfg.game)},
         {"lexicon", {{"src", data.game.lex(game::Lang::kSource)},
                      {"pvt", data.game.lex(game::Lang::kPivot)},
                      {"tgt", data.game.lex(game::Lang::kTarget)}}},
         {"pretrain_concept_probabilities", data.pretrain_dist.concept_probabilities()},
         {"task_concept_probabilities", data.task_dist.concept_probabilities()}};
  write_file(dir / "game.json", g.dump(2) + "\n");
  std::cout << "wrote corpora to " << dir.string() << "\n";
  return 0;
}

int cmd_pretrain(const Common& c) {
  auto cfg = resolve(c);
  exp::validate(cfg);
  const fs::path root = root_of(c, cfg);
  auto data = training::build_game_data(cfg.game);
  for (std::uint64_t seed : cfg.seeds) {
    auto p = exp::obtain_pretrained(cfg, data, seed, root);
    json j{{"seed", seed},
           {"cached", p.from_cache},
           {"grounding_bleu", p.grounding_bleu},
           {"receiver_bleu", p.receiver_bleu},
           {"sender_val_nll", p.sender_val_nll},
           {"receiver_val_nll", p.receiver_val_nll},
           {"dir", (exp::pretrain_dir(root, cfg) / ("seed" + std::to_string(seed))).string()}};
    std::cout << j.dump() << "\n";
  }
  return 0;
}

struct FinetuneFlags {
  std::string method;
  std::optional<double> alpha, beta, tau, lr;
  std::optional<long> k1, k2, k2_prime, eval_interval;
  std::string receiver_target;
};

int cmd_finetune(const Common& c, const FinetuneFlags& f) {
  auto cfg = resolve(c);
  json partial = json::object();
  if (!f.method.empty()) {
    auto m = training::parse_method(f.method);
    partial["method"] = f.method;
    if (m != training::Method::kS2P && m != training::Method::kSSIL) cfg.finetune.alpha = 0.0;
    if (m != training::Method::kMixData) cfg.finetune.beta = 0.0;
  }
  if (f.alpha) partial["alpha"] = *f.alpha;
  if (f.beta) partial["beta"] = *f.beta;
  if (f.tau) partial["tau"] = *f.tau;
  if (f.lr) partial["lr"] = *f.lr;
  if (f.k1) partial["k1"] = *f.k1;
  if (f.k2) partial["k2"] = *f.k2;
  if (f.k2_prime) partial["k2_prime"] = *f.k2_prime;
  if (f.eval_interval) partial["eval_interval"] = *f.eval_interval;
  if (!f.receiver_target.empty()) partial["receiver_target"] = f.receiver_target;
  exp::merge_finetune(cfg.finetune, partial);
  if (!f.method.empty() || !cfg.sweep.empty()) {
    if (!cfg.sweep.empty()) cfg.label.clear();
    cfg.sweep = exp::SweepSpec{};
    cfg.overrides.clear();
  }
  exp::validate(cfg);
  exp::run_experiment(cfg, root_of(c, cfg), print_progress);
  return 0;
}

struct SweepFlags {
  std::vector<std::string> methods;
  std::vector<double> alpha, beta;
  std::vector<long> k1, k2, k2_prime;
};

int cmd_sweep(const Common& c, const SweepFlags& s) {
  auto cfg = resolve(c);
  if (!s.methods.empty()) {
    cfg.sweep.methods.clear();
    for (const auto& m : s.methods) cfg.sweep.methods.push_back(training::parse_method(m));
  }
  if (cfg.sweep.methods.empty() && c.config_path.empty() && c.preset_name.empty()) {
    // Without a config, the axis names the method it belongs to.
    if (!s.alpha.empty()) {
      cfg.finetune.method = training::Method::kS2P;
    } else if (!s.beta.empty()) {
      cfg.finetune.method = training::Method::kMixData;
    } else if (!s.k1.empty() || !s.k2.empty() || !s.k2_prime.empty()) {
      cfg.finetune.method = training::Method::kSIL;
    }
  }
  if (!s.alpha.empty()) cfg.sweep.alpha = s.alpha;
  if (!s.beta.empty()) cfg.sweep.beta = s.beta;
  if (!s.k1.empty()) cfg.sweep.k1 = s.k1;
  if (!s.k2.empty()) cfg.sweep.k2 = s.k2;
  if (!s.k2_prime.empty()) cfg.sweep.k2_prime = s.k2_prime;
  exp::validate(cfg);
  const fs::path root = root_of(c, cfg);
  auto outputs = exp::run_experiment(cfg, root, print_progress);
  std::cout << outputs.size() << " runs written under " << (root / "run").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& which) {
  const fs::path dir = run_dir;
  auto cfg = exp::load_config((dir / "config.json").string());
  auto data = training::build_game_data(cfg.game);
  auto load = [&](const std::string& name) {
    auto m = agents::Seq2Seq::init(0, cfg.game.vocab, cfg.game.vocab, cfg.pretrain.hidden);
    agents::assign_values(m.params(), agents::load_checkpoint(dir / "ckpt" / (which + "_" + name + ".ckpt")));
    return m;
  };
  auto sender = load("sender"), receiver = load("receiver");
  auto lm = exp::train_pivot_lm(cfg, data);
  auto rec = metrics::eval_pipeline(sender, receiver, data.eval_set, lm);
  // Runs always consume the whole interactive budget.
  rec.step = which == "final" ? cfg.finetune.total_steps : 0;
  std::cout << metrics::jsonl_row(rec, cfg.label.empty() ? std::string(training::method_name(cfg.finetune.method)) : cfg.label,
                                  cfg.seeds.front())
            << "\n";
  return 0;
}

int cmd_gradcheck(std::size_t probes, std::uint64_t seed) {
  const double tolerance = 1e-4;
  double worst = 0.0;
  for (const auto& c : exp::gradcheck_suite(seed, probes)) {
    std::printf("%-20s max_rel_error %.3e (%zu probes)\n", c.name.c_str(), c.max_rel_error, c.probes);
    worst = std::max(worst, c.max_rel_error);
  }
  std::printf("gradcheck max relative error %.3e (tolerance %.0e): %s\n", worst, tolerance,
              worst < tolerance ? "ok" : "FAILED");
  return worst < tolerance ? 0 : kExitFailure;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out_dir,
             const std::vector<std::string>& metric_names) {
  std::vector<metrics::CsvRow> rows;
  for (const auto& path : csvs) {
    auto part = exp::read_csv_file(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto& names = metric_names.empty() ? exp::plot_metrics() : metric_names;
  for (const auto& metric : names) {
    const fs::path path = fs::path(out_dir) / (metric + ".svg");
    write_file(path, exp::plot_svg(rows, metric));
    std::cout << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-drift countermeasures on a synthetic pivot-translation game"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen-data", "Build the game and write its corpora as TSV");
  add_common(gen, common);
  auto* pre = app.add_subcommand("pretrain", "Pretrain sender/receiver (cached per seed)");
  add_common(pre, common);

  FinetuneFlags ff;
  auto* ft = app.add_subcommand("finetune", "Finetune pretrained agents with one method");
  add_common(ft, common);
  ft->add_option("--method", ff.method, "gumbel, s2p, sil, ssil or mixdata")
      ->check(CLI::IsMember({"gumbel", "s2p", "sil", "ssil", "mixdata"}));
  ft->add_option("--alpha", ff.alpha, "Supervised weight (s2p, ssil)");
  ft->add_option("--beta", ff.beta, "Pretraining fraction of imitation batches (mixdata)");
  ft->add_option("--tau", ff.tau, "Gumbel temperature");
  ft->add_option("--lr", ff.lr, "Adam learning rate");
  ft->add_option("--k1", ff.k1, "Teacher interactive steps per iteration");
  ft->add_option("--k2", ff.k2, "Sender imitation steps per iteration");
  ft->add_option("--k2-prime", ff.k2_prime, "Receiver imitation steps per iteration");
  ft->add_option("--eval-interval", ff.eval_interval, "Steps between evaluations (gumbel, s2p)");
  ft->add_option("--receiver-target", ff.receiver_target, "teacher or gold")
      ->check(CLI::IsMember({"teacher", "gold"}));

  std::string run_dir, which = "final";
  auto* ev = app.add_subcommand("eval", "Evaluate the checkpoints of a run directory");
  ev->add_option("--run", run_dir, "run/<method>/<seed> directory")->required();
  ev->add_option("--which", which, "start or final")->check(CLI::IsMember({"start", "final"}));

  SweepFlags sf;
  auto* sw = app.add_subcommand("sweep", "Cartesian product over hyperparameter lists and seeds");
  add_common(sw, common);
  sw->add_option("--methods", sf.methods, "Methods")->delimiter(',');
  sw->add_option("--alpha", sf.alpha, "Alpha values")->delimiter(',');
  sw->add_option("--beta", sf.beta, "Beta values")->delimiter(',');
  sw->add_option("--k1", sf.k1, "k1 values")->delimiter(',');
  sw->add_option("--k2", sf.k2, "k2 values")->delimiter(',');
  sw->add_option("--k2-prime", sf.k2_prime, "k2' values")->delimiter(',');

  std::size_t probes = 20;
  std::uint64_t gc_seed = 7;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference self-test of the autodiff engine");
  gc->add_option("--probes", probes, "Coordinates checked per case");
  gc->add_option("--seed", gc_seed, "Seed for inputs and probe coordinates");

  std::vector<std::string> csvs, plot_names;
  std::string plot_out = ".";
  auto* pl = app.add_subcommand("plot", "Render metrics CSVs as SVG line charts");
  pl->add_option("csv", csvs, "metrics.csv files")->required();
  pl->add_option("--out", plot_out, "Output directory");
  pl->add_option("--metrics", plot_names, "Metrics to plot")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*pre) return cmd_pretrain(common);
    if (*ft) return cmd_finetune(common, ff);
    if (*ev) return cmd_eval(run_dir, which);
    if (*sw) return cmd_sweep(common, sf);
    if (*gc) return cmd_gradcheck(probes, gc_seed);
    if (*pl) return cmd_plot(csvs, plot_out, plot_names);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
