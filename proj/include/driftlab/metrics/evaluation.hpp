#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/agents/language_model.hpp"
#include "driftlab/agents/seq2seq.hpp"
#include "driftlab/game/game.hpp"

namespace driftlab::metrics {

struct MetricsRecord {
  long step = 0;
  double bleu_tgt = 0.0;  // task score
  double bleu_pvt = 0.0;  // grounding score
  double nll = 0.0;       // frozen-LM NLL of generated pivots, nats/token
  double real_nll = 0.0;  // sender NLL of gold pivots, nats/token
  std::optional<double> grad_cos_raw;
  std::optional<double> grad_cos_ma100;
};

inline constexpr std::size_t kEvalBatch = 128;

// Greedy pivot from the sender, greedy target from the receiver reading that
// pivot; scores against the gold references. Runs without a tape and leaves
// both agents untouched.
MetricsRecord eval_pipeline(const agents::Seq2Seq& sender, const agents::Seq2Seq& receiver,
                            const std::vector<game::EvalExample>& eval_set,
                            const agents::LanguageModel& lm, std::size_t batch = kEvalBatch);

// Mean per-token teacher-forced NLL of the gold pivot given the source.
double real_nll_metric(const agents::Seq2Seq& sender,
                       const std::vector<game::EvalExample>& eval_set,
                       std::size_t batch = kEvalBatch);

// Greedy-decodes every source (any mix of lengths) in length buckets.
std::vector<std::vector<int>> greedy_translate(const agents::Seq2Seq& model,
                                               const std::vector<std::vector<int>>& sources,
                                               std::size_t batch = kEvalBatch);

// Shortest round-trip decimal form; the single formatter behind every
// metrics file so identical values always produce identical bytes.
std::string format_double(double v);

inline constexpr const char* kCsvHeader =
    "step,method,seed,bleu_tgt,bleu_pvt,nll,real_nll,grad_cos_raw,grad_cos_ma100";

std::string csv_row(const MetricsRecord& rec, const std::string& method, std::uint64_t seed);
std::string jsonl_row(const MetricsRecord& rec, const std::string& method, std::uint64_t seed);

struct CsvRow {
  std::string method;
  std::uint64_t seed = 0;
  MetricsRecord record;
};
std::vector<CsvRow> read_metrics_csv(std::istream& in);

}  // namespace driftlab::metrics
