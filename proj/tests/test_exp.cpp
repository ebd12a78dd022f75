#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "driftlab/errors.hpp"
#include "driftlab/exp/config.hpp"
#include "driftlab/exp/plot.hpp"
#include "driftlab/exp/runner.hpp"

using namespace driftlab;
using namespace driftlab::exp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Removed on destruction; unique per test case.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("driftlab_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

ExperimentConfig tiny(training::Method m) {
  auto c = preset("smoke");
  c.sweep = {};
  c.overrides.clear();
  c.finetune.method = m;
  c.seeds = {1};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DRIFTLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<metrics::CsvRow> fake_rows() {
  std::vector<metrics::CsvRow> rows;
  for (std::uint64_t seed : {1, 2}) {
    for (long step : {0, 100, 200}) {
      metrics::MetricsRecord r{step, 10.0 + step / 10.0 + seed, 90.0 - step / 20.0, 3.0, 0.5, std::nullopt,
                               step ? std::optional<double>(-0.1 * seed) : std::nullopt};
      rows.push_back({"gumbel", seed, r});
      r.bleu_pvt = 90.0;
      rows.push_back({"s2p", seed, r});
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  const json base = to_json(tiny(training::Method::kGumbel));
  CHECK_NOTHROW(parse_config(base));
  CHECK(to_json(parse_config(base)) == base);

  json unknown = base;
  unknown["finetune"]["temperature"] = 0.5;
  CHECK_THROWS_AS(parse_config(unknown), ConfigError);
  json top = base;
  top["extra"] = 1;
  CHECK_THROWS_AS(parse_config(top), ConfigError);
  json wrong_type = base;
  wrong_type["game"]["vocab"] = "twenty";
  CHECK_THROWS_AS(parse_config(wrong_type), ConfigError);
  json bad_method = base;
  bad_method["finetune"]["method"] = "reinforce";
  CHECK_THROWS_AS(parse_config(bad_method), ConfigError);
  json bad_combo = base;
  bad_combo["finetune"]["beta"] = 0.5;  // beta with gumbel
  CHECK_THROWS_AS(parse_config(bad_combo), ConfigError);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("sweeps expand to a labelled cartesian product") {
  auto c = tiny(training::Method::kS2P);
  c.sweep.methods = {training::Method::kS2P, training::Method::kSSIL, training::Method::kSIL};
  c.sweep.alpha = {0.0, 0.5};
  c.sweep.k1 = {10, 20};
  const auto runs = expand_runs(c);
  // s2p: 2 alphas; ssil: 2 alphas x 2 k1; sil: 2 k1.
  CHECK(runs.size() == 8);
  std::set<std::string> labels;
  for (const auto& r : runs) labels.insert(r.label);
  CHECK(labels.size() == runs.size());
  CHECK(labels.count("s2p__alpha0.5"));
  CHECK(labels.count("ssil__alpha0__k120"));
  CHECK(labels.count("sil__k110"));

  auto only_alpha = tiny(training::Method::kGumbel);
  only_alpha.sweep.alpha = {0.0, 1.0};
  CHECK_THROWS_AS(expand_runs(only_alpha), ConfigError);

  const auto single = expand_runs(tiny(training::Method::kSIL));
  REQUIRE(single.size() == 1);
  CHECK(single[0].label == "sil");
}

TEST_CASE("paper-shape preset covers four methods over five seeds") {
  const auto c = preset("paper-shape");
  CHECK(expand_runs(c).size() == 4);
  CHECK(c.seeds.size() == 5);
}

TEST_CASE("plots are deterministic and bands collapse for one seed") {
  const auto rows = fake_rows();
  const auto a = plot_svg(rows, "bleu_pvt");
  CHECK(a == plot_svg(rows, "bleu_pvt"));
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("gumbel") != std::string::npos);

  const auto agg = aggregate(rows, "bleu_tgt");
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].method == "gumbel");
  CHECK(agg[0].points[1].mean == doctest::Approx(21.5));
  CHECK(agg[0].points[1].std == doctest::Approx(0.5));

  std::vector<metrics::CsvRow> one;
  for (const auto& r : rows) {
    if (r.seed == 1) one.push_back(r);
  }
  for (const auto& s : aggregate(one, "bleu_pvt")) {
    for (const auto& p : s.points) CHECK(p.std == 0.0);
  }
  const auto cos = aggregate(rows, "grad_cos_ma100");
  CHECK(cos[0].points.size() == 2);  // step 0 has no cosine
  CHECK_THROWS_AS(plot_svg(rows, "accuracy"), DataError);
}

TEST_CASE("a run writes its layout and an archived config reproduces metrics exactly") {
  ScratchDir dir("rerun");
  const auto c = tiny(training::Method::kSSIL);
  auto cfg = c;
  cfg.finetune.alpha = 0.5;
  const auto outs = run_experiment(cfg, dir.path);
  REQUIRE(outs.size() == 1);
  const fs::path run = dir.path / "run" / "ssil" / "1";
  for (const char* f : {"config.json", "metrics.csv", "metrics.jsonl"}) CHECK(fs::exists(run / f));
  CHECK(fs::is_directory(run / "ckpt"));
  CHECK(fs::exists(dir.path / "summary.md"));
  CHECK(fs::exists(dir.path / "summary.json"));
  CHECK(fs::exists(dir.path / "plots" / "bleu_pvt.svg"));

  ScratchDir again("rerun2");
  const auto re = rerun_archived(run / "config.json", again.path);
  CHECK(slurp(re.dir / "metrics.csv") == slurp(run / "metrics.csv"));
  CHECK(slurp(re.dir / "metrics.jsonl") == slurp(run / "metrics.jsonl"));
}

TEST_CASE("sweep members do not influence each other") {
  ScratchDir both("sweep"), alone("alone");
  auto c = tiny(training::Method::kGumbel);
  c.sweep.methods = {training::Method::kGumbel, training::Method::kSIL};
  run_experiment(c, both.path);
  run_experiment(tiny(training::Method::kSIL), alone.path);
  CHECK(slurp(both.path / "run" / "sil" / "1" / "metrics.csv") ==
        slurp(alone.path / "run" / "sil" / "1" / "metrics.csv"));
}

TEST_CASE("output root precedence") {
  auto c = tiny(training::Method::kGumbel);
  CHECK(output_root(std::string("flag"), c) == fs::path("flag"));
  c.out = "cfg";
  CHECK(output_root(std::nullopt, c) == fs::path("cfg"));
}

TEST_CASE("CLI exit codes") {
  CHECK(run_cli("gradcheck --probes 5") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("finetune --method nope") == 2);
  CHECK(run_cli("no-such-command") == 2);

  ScratchDir dir("cli");
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({"finetune": {"tau": -1}})";
  CHECK(run_cli("finetune --config " + bad.string() + " --out " + (dir.path / "o").string()) == 3);
  std::ofstream(dir.path / "broken.json") << "{not json";
  CHECK(run_cli("finetune --config " + (dir.path / "broken.json").string()) == 3);
  CHECK(run_cli("plot " + (dir.path / "missing.csv").string() + " --out " + dir.path.string()) != 0);
}
