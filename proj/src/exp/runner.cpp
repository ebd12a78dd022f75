#include "driftlab/exp/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "driftlab/agents/checkpoint.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/exp/plot.hpp"
#include "driftlab/metrics/bleu.hpp"

namespace driftlab::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4u) s[static_cast<std::size_t>(i)] = digits[v & 0xFu];
  return s;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

agents::Seq2Seq load_agent(const fs::path& path, std::size_t vocab, std::size_t hidden) {
  agents::Seq2Seq m = agents::Seq2Seq::init(0, vocab, vocab, hidden);
  agents::assign_values(m.params(), agents::load_checkpoint(path));
  return m;
}

double pivot_bleu(const agents::Seq2Seq& model, const training::PairSet& set) {
  return metrics::bleu_corpus(metrics::greedy_translate(model, set.sources()), set.targets());
}

void save_agents(const fs::path& dir, const std::string& prefix, const training::AgentPair& a) {
  fs::create_directories(dir);
  agents::save_checkpoint(dir / (prefix + "sender.ckpt"), a.sender.params());
  agents::save_checkpoint(dir / (prefix + "receiver.ckpt"), a.receiver.params());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_plots(const fs::path& dir, const std::vector<metrics::CsvRow>& rows) {
  for (const auto& metric : plot_metrics()) write_text(dir / (metric + ".svg"), plot_svg(rows, metric));
}

std::string fmt2(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

}  // namespace

fs::path output_root(const std::optional<std::string>& flag, const ExperimentConfig& config) {
  if (flag && !flag->empty()) return *flag;
  if (!config.out.empty()) return config.out;
  if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return env;
  return kDefaultOut;
}

fs::path pretrain_dir(const fs::path& root, const ExperimentConfig& config) {
  json key{{"game", game_to_json(config.game)}, {"pretrain", pretrain_to_json(config.pretrain)}};
  return root / "pretrain" / hex64(fnv1a(key.dump()));
}

agents::LanguageModel train_pivot_lm(const ExperimentConfig& config, const training::GameData& data) {
  return training::train_language_model(data.pre_src_pvt.targets(), config.game.vocab,
                                        config.pretrain, config.game.seed);
}

namespace {

// Agents only; the caller supplies the language model.
Pretrained train_agents(const ExperimentConfig& config, const training::GameData& data,
                        std::uint64_t seed, training::PretrainResult& result) {
  Pretrained p;
  p.agents = training::init_agents(seed, config.game.vocab, config.pretrain.hidden);
  ad::Rng rng(seed, 0x9E7);
  result = training::pretrain(p.agents, data.pre_src_pvt, data.pre_pvt_tgt, data.val_src_pvt,
                              data.val_pvt_tgt, config.pretrain, rng);
  p.sender_val_nll = result.sender_val_nll;
  p.receiver_val_nll = result.receiver_val_nll;
  p.grounding_bleu = pivot_bleu(p.agents.sender, data.val_src_pvt);
  p.receiver_bleu = pivot_bleu(p.agents.receiver, data.val_pvt_tgt);
  return p;
}

}  // namespace

Pretrained pretrain_agents(const ExperimentConfig& config, const training::GameData& data,
                           std::uint64_t seed) {
  training::PretrainResult result;
  Pretrained p = train_agents(config, data, seed, result);
  p.lm = train_pivot_lm(config, data);
  return p;
}

Pretrained obtain_pretrained(const ExperimentConfig& config, const training::GameData& data,
                             std::uint64_t seed, const fs::path& root) {
  const fs::path base = pretrain_dir(root, config);
  const fs::path dir = base / ("seed" + std::to_string(seed));
  const fs::path lm_path = base / "lm.ckpt";
  const fs::path summary_path = dir / "pretrain.json";
  const std::size_t vocab = config.game.vocab, hidden = config.pretrain.hidden;

  if (fs::exists(summary_path) && fs::exists(lm_path)) {
    Pretrained p;
    p.agents.sender = load_agent(dir / "sender.ckpt", vocab, hidden);
    p.agents.receiver = load_agent(dir / "receiver.ckpt", vocab, hidden);
    p.lm = agents::LanguageModel::from_checkpoint(agents::load_checkpoint(lm_path));
    std::ifstream in(summary_path);
    json j = json::parse(in);
    p.sender_val_nll = j.at("sender_val_nll").get<double>();
    p.receiver_val_nll = j.at("receiver_val_nll").get<double>();
    p.grounding_bleu = j.at("grounding_bleu").get<double>();
    p.receiver_bleu = j.at("receiver_bleu").get<double>();
    p.from_cache = true;
    return p;
  }

  training::PretrainResult result;
  Pretrained p = train_agents(config, data, seed, result);
  if (fs::exists(lm_path)) {
    p.lm = agents::LanguageModel::from_checkpoint(agents::load_checkpoint(lm_path));
  } else {
    p.lm = train_pivot_lm(config, data);
    fs::create_directories(base);
    agents::save_checkpoint(lm_path, p.lm.checkpoint_params());
  }
  save_agents(dir, "", p.agents);
  json summary{{"seed", seed},
               {"sender_val_nll", p.sender_val_nll},
               {"receiver_val_nll", p.receiver_val_nll},
               {"grounding_bleu", p.grounding_bleu},
               {"receiver_bleu", p.receiver_bleu},
               {"sender_epoch_loss", result.sender_epoch_loss},
               {"receiver_epoch_loss", result.receiver_epoch_loss}};
  write_text(summary_path, summary.dump(2) + "\n");
  return p;
}

json archived_config(const ExperimentConfig& config, const RunSpec& run, std::uint64_t seed) {
  ExperimentConfig single = config;
  single.finetune = run.finetune;
  single.finetune.seed = seed;
  single.overrides.clear();
  single.sweep = SweepSpec{};
  single.seeds = {seed};
  single.label = run.label;
  single.out.clear();
  return to_json(single);
}

RunOutput run_one(const ExperimentConfig& config, const RunSpec& run, std::uint64_t seed,
                  const training::GameData& data, const Pretrained& pretrained, const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.label = run.label;
  out.seed = seed;
  out.dir = root / "run" / run.label / std::to_string(seed);
  fs::remove_all(out.dir);
  fs::create_directories(out.dir / "ckpt");
  fs::create_directories(out.dir / "plots");

  write_text(out.dir / "config.json", archived_config(config, run, seed).dump(2) + "\n");
  save_agents(out.dir / "ckpt", "start_", pretrained.agents);

  training::FinetuneConfig f = run.finetune;
  f.seed = seed;

  std::ofstream csv(out.dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  std::ofstream jsonl(out.dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
  if (!csv || !jsonl) throw IoError("cannot open metrics files in '" + out.dir.string() + "'");
  csv << metrics::kCsvHeader << '\n';

  long evals = 0;
  training::RunHooks hooks;
  hooks.on_record = [&](const metrics::MetricsRecord& rec, const training::AgentPair& agents) {
    csv << metrics::csv_row(rec, run.label, seed) << '\n';
    jsonl << metrics::jsonl_row(rec, run.label, seed) << '\n';
    csv.flush();
    jsonl.flush();
    ++evals;
    if (config.checkpoint_every > 0 && evals % config.checkpoint_every == 0) {
      save_agents(out.dir / "ckpt", "step" + std::to_string(rec.step) + "_", agents);
    }
  };
  auto result = training::run_finetune(pretrained.agents, f, data, pretrained.lm, hooks);
  csv.close();
  jsonl.close();

  save_agents(out.dir / "ckpt", "final_", result.final_agents);
  out.trajectory = std::move(result.trajectory);
  std::vector<metrics::CsvRow> rows;
  for (const auto& rec : out.trajectory) rows.push_back({run.label, seed, rec});
  write_plots(out.dir / "plots", rows);
  out.seconds = seconds_since(t0);
  return out;
}

std::vector<RunOutput> run_experiment(const ExperimentConfig& config, const fs::path& root,
                                      const ProgressFn& progress) {
  validate(config);
  const auto runs = expand_runs(config);
  const training::GameData data = training::build_game_data(config.game);
  fs::create_directories(root);

  std::vector<RunOutput> outputs;
  json summary_runs = json::array();
  std::map<std::uint64_t, Pretrained> pretrained;
  for (std::uint64_t seed : config.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    Pretrained& p = pretrained[seed] = obtain_pretrained(config, data, seed, root);
    if (progress) {
      progress("pretrain seed " + std::to_string(seed) + (p.from_cache ? " (cached)" : "") +
               ": grounding BLEU " + fmt2(p.grounding_bleu) + ", " + fmt2(seconds_since(t0)) + "s");
    }
    for (const auto& run : runs) {
      RunOutput o = run_one(config, run, seed, data, p, root);
      const auto& last = o.trajectory.back();
      if (progress) {
        progress(run.label + " seed " + std::to_string(seed) + ": bleu_tgt " + fmt2(last.bleu_tgt) +
                 ", bleu_pvt " + fmt2(last.bleu_pvt) + ", real_nll " + fmt2(last.real_nll) + ", " +
                 fmt2(o.seconds) + "s");
      }
      json first = json::parse(metrics::jsonl_row(o.trajectory.front(), o.label, seed));
      json final = json::parse(metrics::jsonl_row(last, o.label, seed));
      summary_runs.push_back(json{{"label", o.label},
                                  {"seed", seed},
                                  {"pretrain_grounding_bleu", p.grounding_bleu},
                                  {"initial", first},
                                  {"final", final},
                                  {"seconds", o.seconds}});
      outputs.push_back(std::move(o));
    }
  }

  std::vector<metrics::CsvRow> rows;
  for (const auto& o : outputs) {
    for (const auto& rec : o.trajectory) rows.push_back({o.label, o.seed, rec});
  }
  write_plots(root / "plots", rows);

  // Mean final metrics per label.
  std::ostringstream md;
  md << "| run | seeds | bleu_tgt | bleu_pvt | nll | real_nll |\n|---|---|---|---|---|---|\n";
  for (const auto& run : runs) {
    double tgt = 0, pvt = 0, nll = 0, real = 0;
    std::size_t n = 0;
    for (const auto& o : outputs) {
      if (o.label != run.label) continue;
      const auto& r = o.trajectory.back();
      tgt += r.bleu_tgt;
      pvt += r.bleu_pvt;
      nll += r.nll;
      real += r.real_nll;
      ++n;
    }
    const double k = static_cast<double>(n);
    md << "| " << run.label << " | " << n << " | " << fmt2(tgt / k) << " | " << fmt2(pvt / k)
       << " | " << fmt2(nll / k) << " | " << fmt2(real / k) << " |\n";
  }
  write_text(root / "summary.md", md.str());
  write_text(root / "summary.json", json{{"runs", summary_runs}}.dump(2) + "\n");
  return outputs;
}

RunOutput rerun_archived(const fs::path& archived_config_path, const fs::path& root) {
  ExperimentConfig config = load_config(archived_config_path.string());
  const auto runs = expand_runs(config);
  if (runs.size() != 1 || config.seeds.size() != 1) {
    throw ConfigError("'" + archived_config_path.string() + "' is not a single-run config");
  }
  const training::GameData data = training::build_game_data(config.game);
  Pretrained p = obtain_pretrained(config, data, config.seeds.front(), root);
  return run_one(config, runs.front(), config.seeds.front(), data, p, root);
}

std::vector<metrics::CsvRow> read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return metrics::read_metrics_csv(in);
}

}  // namespace driftlab::exp
