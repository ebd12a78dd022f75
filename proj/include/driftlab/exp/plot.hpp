#pragma once

#include <string>
#include <vector>

#include "driftlab/metrics/evaluation.hpp"

namespace driftlab::exp {

// Columns that can be plotted from a metrics CSV.
const std::vector<std::string>& plot_metrics();  // bleu_tgt, bleu_pvt, nll, real_nll, grad_cos_ma100

struct SeriesPoint {
  long step = 0;
  double mean = 0.0;
  double std = 0.0;  // population std over the seeds that report this step
  std::size_t count = 0;
};

struct Series {
  std::string method;
  std::vector<SeriesPoint> points;  // ascending step
};

// Mean and spread over seeds of one metric, one series per method in order of
// first appearance. Missing values (empty grad_cos fields) are skipped.
std::vector<Series> aggregate(const std::vector<metrics::CsvRow>& rows, const std::string& metric);

// Line chart of one metric with shaded +-1 std bands. Output depends only on
// the inputs.
std::string plot_svg(const std::vector<metrics::CsvRow>& rows, const std::string& metric);

}  // namespace driftlab::exp
