#include "driftlab/exp/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "driftlab/errors.hpp"
#include "driftlab/metrics/evaluation.hpp"

namespace driftlab::exp {

using nlohmann::json;
using training::Method;

namespace {

// Reads the keys of one JSON object and rejects any key it was not asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in '" + name_ + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

Method method_from(const std::string& name) {
  try {
    return training::parse_method(name);
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

void read_game(const json& j, training::GameConfig& g) {
  Section s(j, "game");
  s.read("seed", g.seed);
  s.read("vocab", g.vocab);
  s.read("len_min", g.len_min);
  s.read("len_max", g.len_max);
  s.read("reverse_target", g.reverse_target);
  s.read("zipf_exponent", g.zipf_exponent);
  if (const json* shift = s.child("shift_seed")) {
    if (shift->is_null()) {
      g.shift_seed.reset();
    } else if (shift->is_number_unsigned()) {
      g.shift_seed = shift->get<std::uint64_t>();
    } else {
      throw ConfigError("'game.shift_seed' must be a non-negative integer or null");
    }
  }
  s.read("pretrain_pairs", g.pretrain_pairs);
  s.read("pretrain_val_pairs", g.pretrain_val_pairs);
  s.read("task_pairs", g.task_pairs);
  s.read("eval_pairs", g.eval_pairs);
  s.finish();
}

void read_pretrain(const json& j, training::PretrainConfig& p) {
  Section s(j, "pretrain");
  s.read("epochs", p.epochs);
  if (const json* re = s.child("receiver_epochs")) {
    if (re->is_null()) {
      p.receiver_epochs.reset();
    } else if (re->is_number_integer()) {
      p.receiver_epochs = re->get<long>();
    } else {
      throw ConfigError("'pretrain.receiver_epochs' must be an integer or null");
    }
  }
  s.read("lm_epochs", p.lm_epochs);
  s.read("batch", p.batch);
  s.read("hidden", p.hidden);
  s.read("lr", p.adam.lr);
  s.finish();
}

void read_sweep(const json& j, SweepSpec& sw) {
  Section s(j, "sweep");
  std::vector<std::string> methods;
  s.read("methods", methods);
  for (const auto& m : methods) sw.methods.push_back(method_from(m));
  s.read("alpha", sw.alpha);
  s.read("beta", sw.beta);
  s.read("k1", sw.k1);
  s.read("k2", sw.k2);
  s.read("k2_prime", sw.k2_prime);
  s.finish();
}

bool takes_alpha(Method m) { return m == Method::kS2P || m == Method::kSSIL; }

std::string axis_suffix(const char* name, double v) {
  return std::string("__") + name + metrics::format_double(v);
}

}  // namespace

void merge_finetune(training::FinetuneConfig& f, const json& partial) {
  Section s(partial, "finetune");
  std::string method(training::method_name(f.method));
  s.read("method", method);
  f.method = method_from(method);
  s.read("alpha", f.alpha);
  s.read("tau", f.tau);
  s.read("beta", f.beta);
  s.read("k1", f.k1);
  s.read("k2", f.k2);
  s.read("k2_prime", f.k2_prime);
  s.read("lr", f.adam.lr);
  s.read("batch", f.batch);
  s.read("total_steps", f.total_steps);
  s.read("eval_interval", f.eval_interval);
  s.read("probe_interval", f.probe_interval);
  s.read("teacher_dataset_size", f.teacher_dataset_size);
  std::string target = f.receiver_target == training::ReceiverImitationTarget::kGold ? "gold" : "teacher";
  s.read("receiver_target", target);
  if (target == "gold") {
    f.receiver_target = training::ReceiverImitationTarget::kGold;
  } else if (target == "teacher") {
    f.receiver_target = training::ReceiverImitationTarget::kTeacher;
  } else {
    throw ConfigError("'finetune.receiver_target' must be \"teacher\" or \"gold\"");
  }
  s.read("stochastic_teacher", f.stochastic_teacher);
  s.read("allow_zero_imitation", f.allow_zero_imitation);
  s.finish();
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section s(j, "config");
  if (const json* g = s.child("game")) read_game(*g, c.game);
  if (const json* p = s.child("pretrain")) read_pretrain(*p, c.pretrain);
  if (const json* f = s.child("finetune")) merge_finetune(c.finetune, *f);
  if (const json* o = s.child("overrides")) {
    if (!o->is_object()) throw ConfigError("'overrides' must be an object keyed by method");
    for (const auto& [name, partial] : o->items()) {
      if (!partial.is_object()) throw ConfigError("'overrides." + name + "' must be an object");
      if (partial.contains("method")) throw ConfigError("'overrides." + name + "' may not set method");
      c.overrides[method_from(name)] = partial;
    }
  }
  if (const json* sw = s.child("sweep")) read_sweep(*sw, c.sweep);
  s.read("seeds", c.seeds);
  s.read("label", c.label);
  s.read("out", c.out);
  s.read("checkpoint_every", c.checkpoint_every);
  s.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json game_to_json(const training::GameConfig& g) {
  return json{{"seed", g.seed},
              {"vocab", g.vocab},
              {"len_min", g.len_min},
              {"len_max", g.len_max},
              {"reverse_target", g.reverse_target},
              {"zipf_exponent", g.zipf_exponent},
              {"shift_seed", g.shift_seed ? json(*g.shift_seed) : json(nullptr)},
              {"pretrain_pairs", g.pretrain_pairs},
              {"pretrain_val_pairs", g.pretrain_val_pairs},
              {"task_pairs", g.task_pairs},
              {"eval_pairs", g.eval_pairs}};
}

json pretrain_to_json(const training::PretrainConfig& p) {
  return json{{"epochs", p.epochs},
              {"receiver_epochs", p.receiver_epochs ? json(*p.receiver_epochs) : json(nullptr)},
              {"lm_epochs", p.lm_epochs},
              {"batch", p.batch},
              {"hidden", p.hidden},
              {"lr", p.adam.lr}};
}

json finetune_to_json(const training::FinetuneConfig& f) {
  return json{
      {"method", std::string(training::method_name(f.method))},
      {"alpha", f.alpha},
      {"tau", f.tau},
      {"beta", f.beta},
      {"k1", f.k1},
      {"k2", f.k2},
      {"k2_prime", f.k2_prime},
      {"lr", f.adam.lr},
      {"batch", f.batch},
      {"total_steps", f.total_steps},
      {"eval_interval", f.eval_interval},
      {"probe_interval", f.probe_interval},
      {"teacher_dataset_size", f.teacher_dataset_size},
      {"receiver_target",
       f.receiver_target == training::ReceiverImitationTarget::kGold ? "gold" : "teacher"},
      {"stochastic_teacher", f.stochastic_teacher},
      {"allow_zero_imitation", f.allow_zero_imitation}};
}

json to_json(const ExperimentConfig& c) {
  json j{{"game", game_to_json(c.game)},
         {"pretrain", pretrain_to_json(c.pretrain)},
         {"finetune", finetune_to_json(c.finetune)},
         {"seeds", c.seeds},
         {"label", c.label},
         {"out", c.out},
         {"checkpoint_every", c.checkpoint_every}};
  if (!c.overrides.empty()) {
    json o = json::object();
    for (const auto& [m, partial] : c.overrides) o[std::string(training::method_name(m))] = partial;
    j["overrides"] = o;
  }
  if (!c.sweep.empty()) {
    json sw = json::object();
    if (!c.sweep.methods.empty()) {
      std::vector<std::string> names;
      for (Method m : c.sweep.methods) names.emplace_back(training::method_name(m));
      sw["methods"] = names;
    }
    if (!c.sweep.alpha.empty()) sw["alpha"] = c.sweep.alpha;
    if (!c.sweep.beta.empty()) sw["beta"] = c.sweep.beta;
    if (!c.sweep.k1.empty()) sw["k1"] = c.sweep.k1;
    if (!c.sweep.k2.empty()) sw["k2"] = c.sweep.k2;
    if (!c.sweep.k2_prime.empty()) sw["k2_prime"] = c.sweep.k2_prime;
    j["sweep"] = sw;
  }
  return j;
}

void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("'seeds' must list at least one seed");
  if (c.game.vocab < 2) throw ConfigError("'game.vocab' must be at least 2");
  if (c.game.len_min < 1 || c.game.len_min > c.game.len_max) {
    throw ConfigError("'game' length range must satisfy 1 <= len_min <= len_max");
  }
  if (c.game.pretrain_pairs == 0 || c.game.task_pairs == 0 || c.game.eval_pairs == 0 ||
      c.game.pretrain_val_pairs == 0) {
    throw ConfigError("'game' corpus sizes must be positive");
  }
  if (!(c.game.zipf_exponent >= 0.0)) throw ConfigError("'game.zipf_exponent' must be >= 0");
  if (c.pretrain.epochs < 0 || c.pretrain.receiver_epoch_count() < 0 || c.pretrain.lm_epochs < 0) {
    throw ConfigError("'pretrain' epoch counts must be >= 0");
  }
  if (c.pretrain.batch == 0 || c.pretrain.hidden == 0 || !(c.pretrain.adam.lr > 0.0)) {
    throw ConfigError("'pretrain' batch, hidden and lr must be positive");
  }
  if (c.label.find('/') != std::string::npos || c.label == "." || c.label == "..") {
    throw ConfigError("'label' must be a plain directory name");
  }
  if (c.checkpoint_every < 0) throw ConfigError("'checkpoint_every' must be >= 0");
  expand_runs(c);
}

std::vector<RunSpec> expand_runs(const ExperimentConfig& c) {
  const auto& sw = c.sweep;
  std::vector<Method> methods = sw.methods.empty() ? std::vector<Method>{c.finetune.method} : sw.methods;
  auto unused = [&](bool nonempty, auto applies, const char* name) {
    if (nonempty && std::none_of(methods.begin(), methods.end(), applies)) {
      throw ConfigError(std::string("sweep axis '") + name + "' applies to none of the swept methods");
    }
  };
  unused(!sw.alpha.empty(), takes_alpha, "alpha");
  unused(!sw.beta.empty(), [](Method m) { return m == Method::kMixData; }, "beta");
  unused(!sw.k1.empty() || !sw.k2.empty() || !sw.k2_prime.empty(), training::is_sil_family, "k1/k2/k2_prime");

  std::vector<RunSpec> runs;
  std::set<std::string> labels;
  for (Method m : methods) {
    training::FinetuneConfig base = c.finetune;
    base.method = m;
    if (!takes_alpha(m) && sw.methods.size() > 0) base.alpha = 0.0;
    if (m != Method::kMixData && sw.methods.size() > 0) base.beta = 0.0;
    if (auto it = c.overrides.find(m); it != c.overrides.end()) merge_finetune(base, it->second);

    const bool sil = training::is_sil_family(m);
    auto axis = [](bool applies, const auto& values, auto base_value) {
      using V = std::decay_t<decltype(base_value)>;
      return applies && !values.empty() ? std::vector<V>(values.begin(), values.end())
                                        : std::vector<V>{base_value};
    };
    const auto alphas = axis(takes_alpha(m), sw.alpha, base.alpha);
    const auto betas = axis(m == Method::kMixData, sw.beta, base.beta);
    const auto k1s = axis(sil, sw.k1, base.k1);
    const auto k2s = axis(sil, sw.k2, base.k2);
    const auto k2ps = axis(sil, sw.k2_prime, base.k2_prime);

    for (double a : alphas) {
      for (double b : betas) {
        for (long k1 : k1s) {
          for (long k2 : k2s) {
            for (long k2p : k2ps) {
              RunSpec r;
              r.finetune = base;
              r.finetune.alpha = a;
              r.finetune.beta = b;
              r.finetune.k1 = k1;
              r.finetune.k2 = k2;
              r.finetune.k2_prime = k2p;
              r.label = sw.empty() && !c.label.empty() ? c.label
                                                       : std::string(training::method_name(m));
              if (takes_alpha(m) && !sw.alpha.empty()) r.label += axis_suffix("alpha", a);
              if (m == Method::kMixData && !sw.beta.empty()) r.label += axis_suffix("beta", b);
              if (sil && !sw.k1.empty()) r.label += axis_suffix("k1", static_cast<double>(k1));
              if (sil && !sw.k2.empty()) r.label += axis_suffix("k2", static_cast<double>(k2));
              if (sil && !sw.k2_prime.empty()) {
                r.label += axis_suffix("k2p", static_cast<double>(k2p));
              }
              try {
                r.finetune.validate();
              } catch (const ParameterError& e) {
                throw ConfigError(r.label + ": " + e.what());
              }
              if (!labels.insert(r.label).second) {
                throw ConfigError("sweep produces duplicate run '" + r.label + "'");
              }
              runs.push_back(std::move(r));
            }
          }
        }
      }
    }
  }
  return runs;
}

std::vector<std::string> preset_names() { return {"paper-shape", "smoke"}; }

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "paper-shape") {
    c.sweep.methods = {Method::kGumbel, Method::kS2P, Method::kSIL, Method::kSSIL};
    // One alpha for both so S2P and SSIL runs are directly comparable.
    c.overrides[Method::kS2P] = json{{"alpha", 0.5}};
    c.overrides[Method::kSSIL] = json{{"alpha", 0.5}};
    c.seeds = {1, 2, 3, 4, 5};
  } else if (name == "smoke") {
    c.game.pretrain_pairs = 400;
    c.game.pretrain_val_pairs = 50;
    c.game.task_pairs = 200;
    c.game.eval_pairs = 50;
    c.pretrain.epochs = 1;
    c.pretrain.receiver_epochs.reset();
    c.pretrain.lm_epochs = 1;
    c.finetune.total_steps = 40;
    c.finetune.eval_interval = 20;
    c.finetune.probe_interval = 10;
    c.finetune.k1 = 20;
    c.finetune.k2 = 5;
    c.finetune.k2_prime = 5;
    c.finetune.teacher_dataset_size = 64;
    c.sweep.methods = {Method::kGumbel, Method::kS2P, Method::kSIL, Method::kSSIL};
    c.overrides[Method::kS2P] = json{{"alpha", 1.0}};
    c.overrides[Method::kSSIL] = json{{"alpha", 0.5}};
    c.seeds = {1, 2};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  validate(c);
  return c;
}

}  // namespace driftlab::exp
