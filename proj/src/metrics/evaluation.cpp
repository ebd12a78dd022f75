#include "driftlab/metrics/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include "driftlab/agents/batching.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/metrics/bleu.hpp"

namespace driftlab::metrics {

namespace {

std::vector<std::size_t> lengths_of(const std::vector<std::vector<int>>& seqs) {
  std::vector<std::size_t> lens;
  lens.reserve(seqs.size());
  for (const auto& s : seqs) lens.push_back(s.size());
  return lens;
}

agents::SeqBatch gather(const std::vector<std::vector<int>>& seqs,
                        const std::vector<std::size_t>& idx) {
  std::vector<const std::vector<int>*> rows;
  rows.reserve(idx.size());
  for (std::size_t i : idx) rows.push_back(&seqs[i]);
  return agents::SeqBatch::from_rows(rows);
}

std::string opt_field(const std::optional<double>& v, const char* missing) {
  return v ? format_double(*v) : std::string(missing);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("metrics CSV: malformed number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<std::vector<int>> greedy_translate(const agents::Seq2Seq& model,
                                               const std::vector<std::vector<int>>& sources,
                                               std::size_t batch) {
  std::vector<std::vector<int>> out(sources.size());
  for (const auto& chunk : agents::length_chunks(lengths_of(sources), batch)) {
    auto decoded = model.greedy_decode(gather(sources, chunk)).tokens;
    for (std::size_t j = 0; j < chunk.size(); ++j) out[chunk[j]] = decoded.row(j);
  }
  return out;
}

double real_nll_metric(const agents::Seq2Seq& sender,
                       const std::vector<game::EvalExample>& eval_set, std::size_t batch) {
  if (eval_set.empty()) throw DataError("real_nll_metric: empty evaluation set");
  std::vector<std::vector<int>> src, pvt;
  for (const auto& ex : eval_set) {
    src.push_back(ex.source);
    pvt.push_back(ex.pivot);
  }
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& chunk : agents::length_chunks(lengths_of(src), batch)) {
    auto logp = sender.token_log_probs(gather(src, chunk), gather(pvt, chunk));
    for (double lp : logp) total -= lp;
    tokens += logp.size();
  }
  return total / static_cast<double>(tokens);
}

MetricsRecord eval_pipeline(const agents::Seq2Seq& sender, const agents::Seq2Seq& receiver,
                            const std::vector<game::EvalExample>& eval_set,
                            const agents::LanguageModel& lm, std::size_t batch) {
  if (eval_set.empty()) throw DataError("eval_pipeline: empty evaluation set");
  std::vector<std::vector<int>> src, gold_pvt, gold_tgt;
  for (const auto& ex : eval_set) {
    src.push_back(ex.source);
    gold_pvt.push_back(ex.pivot);
    gold_tgt.push_back(ex.target);
  }
  auto pivots = greedy_translate(sender, src, batch);
  auto targets = greedy_translate(receiver, pivots, batch);

  MetricsRecord rec;
  rec.bleu_tgt = bleu_corpus(targets, gold_tgt);
  rec.bleu_pvt = bleu_corpus(pivots, gold_pvt);

  double nll_sum = 0.0;
  for (const auto& chunk : agents::length_chunks(lengths_of(pivots), batch)) {
    for (double v : lm.lm_nll_batch(gather(pivots, chunk))) nll_sum += v;
  }
  rec.nll = nll_sum / static_cast<double>(pivots.size());
  rec.real_nll = real_nll_metric(sender, eval_set, batch);
  return rec;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

std::string csv_row(const MetricsRecord& rec, const std::string& method, std::uint64_t seed) {
  std::ostringstream out;
  out << rec.step << ',' << method << ',' << seed << ',' << format_double(rec.bleu_tgt) << ','
      << format_double(rec.bleu_pvt) << ',' << format_double(rec.nll) << ','
      << format_double(rec.real_nll) << ',' << opt_field(rec.grad_cos_raw, "") << ','
      << opt_field(rec.grad_cos_ma100, "");
  return out.str();
}

std::string jsonl_row(const MetricsRecord& rec, const std::string& method, std::uint64_t seed) {
  std::ostringstream out;
  out << "{\"step\":" << rec.step << ",\"method\":\"" << method << "\",\"seed\":" << seed
      << ",\"bleu_tgt\":" << format_double(rec.bleu_tgt)
      << ",\"bleu_pvt\":" << format_double(rec.bleu_pvt) << ",\"nll\":" << format_double(rec.nll)
      << ",\"real_nll\":" << format_double(rec.real_nll)
      << ",\"grad_cos_raw\":" << opt_field(rec.grad_cos_raw, "null")
      << ",\"grad_cos_ma100\":" << opt_field(rec.grad_cos_ma100, "null") << '}';
  return out.str();
}

std::vector<CsvRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("metrics CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw DataError("metrics CSV: unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 9) throw DataError("metrics CSV: expected 9 fields in '" + line + "'");
    CsvRow row;
    row.record.step = static_cast<long>(parse_double(f[0]));
    row.method = f[1];
    row.seed = static_cast<std::uint64_t>(parse_double(f[2]));
    row.record.bleu_tgt = parse_double(f[3]);
    row.record.bleu_pvt = parse_double(f[4]);
    row.record.nll = parse_double(f[5]);
    row.record.real_nll = parse_double(f[6]);
    if (!f[7].empty()) row.record.grad_cos_raw = parse_double(f[7]);
    if (!f[8].empty()) row.record.grad_cos_ma100 = parse_double(f[8]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace driftlab::metrics
