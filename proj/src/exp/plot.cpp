#include "driftlab/exp/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "driftlab/errors.hpp"

namespace driftlab::exp {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 150, kTop = 36, kBottom = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::optional<double> metric_value(const metrics::MetricsRecord& r, const std::string& metric) {
  if (metric == "bleu_tgt") return r.bleu_tgt;
  if (metric == "bleu_pvt") return r.bleu_pvt;
  if (metric == "nll") return r.nll;
  if (metric == "real_nll") return r.real_nll;
  if (metric == "grad_cos_raw") return r.grad_cos_raw;
  if (metric == "grad_cos_ma100") return r.grad_cos_ma100;
  throw DataError("unknown plot metric '" + metric + "'");
}

std::string fixed(double v, int digits) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  if (ec != std::errc()) throw Error("plot: number formatting failed");
  return std::string(buf, ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
double nice_step(double span, int target) {
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

const std::vector<std::string>& plot_metrics() {
  static const std::vector<std::string> names{"bleu_tgt", "bleu_pvt", "nll", "real_nll",
                                              "grad_cos_ma100"};
  return names;
}

std::vector<Series> aggregate(const std::vector<metrics::CsvRow>& rows, const std::string& metric) {
  std::vector<std::string> order;
  std::map<std::string, std::map<long, std::vector<double>>> values;
  for (const auto& row : rows) {
    if (!values.count(row.method)) order.push_back(row.method);
    auto& by_step = values[row.method];
    if (auto v = metric_value(row.record, metric)) by_step[row.record.step].push_back(*v);
  }
  std::vector<Series> out;
  for (const auto& method : order) {
    Series s{method, {}};
    for (const auto& [step, vs] : values[method]) {
      if (vs.empty()) continue;
      double mean = 0.0;
      for (double v : vs) mean += v;
      mean /= static_cast<double>(vs.size());
      double var = 0.0;
      for (double v : vs) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vs.size());
      s.points.push_back({step, mean, std::sqrt(var), vs.size()});
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string plot_svg(const std::vector<metrics::CsvRow>& rows, const std::string& metric) {
  const auto series = aggregate(rows, metric);

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      const double x = static_cast<double>(p.step);
      if (!any) {
        x_min = x_max = x;
        y_min = p.mean - p.std;
        y_max = p.mean + p.std;
        any = true;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, p.mean - p.std);
      y_max = std::max(y_max, p.mean + p.std);
    }
  }
  if (metric.rfind("bleu", 0) == 0) {
    y_min = 0.0;
    y_max = 100.0;
  } else if (metric.rfind("grad_cos", 0) == 0) {
    y_min = std::min(y_min, -0.1);
    y_max = std::max(y_max, 0.1);
  }
  if (x_max <= x_min) x_max = x_min + 1.0;
  if (y_max <= y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double y_step = nice_step(y_max - y_min, 5);
  y_min = std::floor(y_min / y_step) * y_step;
  y_max = std::ceil(y_max / y_step) * y_step;
  const double x_step = nice_step(x_max - x_min, 6);

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * ph; };
  auto pt = [&](double x, double y) { return fixed(px(x), 2) + "," + fixed(py(y), 2); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0) << "\" height=\""
      << fixed(kHeight, 0) << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << ' ' << fixed(kHeight, 0)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kLeft, 2) << "\" y=\"20\" font-size=\"14\">" << escape(metric)
      << "</text>\n";

  const int y_digits = y_step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(y_step)));
  for (double y = y_min; y <= y_max + 1e-9 * y_step; y += y_step) {
    svg << "<line x1=\"" << fixed(kLeft, 2) << "\" y1=\"" << fixed(py(y), 2) << "\" x2=\""
        << fixed(kLeft + pw, 2) << "\" y2=\"" << fixed(py(y), 2)
        << "\" stroke=\"#dddddd\"/>\n<text x=\"" << fixed(kLeft - 6, 2) << "\" y=\""
        << fixed(py(y) + 4, 2) << "\" text-anchor=\"end\">" << fixed(y, y_digits) << "</text>\n";
  }
  for (double x = std::ceil(x_min / x_step) * x_step; x <= x_max + 1e-9 * x_step; x += x_step) {
    svg << "<line x1=\"" << fixed(px(x), 2) << "\" y1=\"" << fixed(kTop + ph, 2) << "\" x2=\""
        << fixed(px(x), 2) << "\" y2=\"" << fixed(kTop + ph + 4, 2)
        << "\" stroke=\"black\"/>\n<text x=\"" << fixed(px(x), 2) << "\" y=\""
        << fixed(kTop + ph + 16, 2) << "\" text-anchor=\"middle\">" << fixed(x, 0) << "</text>\n";
  }
  svg << "<rect x=\"" << fixed(kLeft, 2) << "\" y=\"" << fixed(kTop, 2) << "\" width=\""
      << fixed(pw, 2) << "\" height=\"" << fixed(ph, 2)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fixed(kLeft + pw / 2, 2) << "\" y=\"" << fixed(kHeight - 10, 2)
      << "\" text-anchor=\"middle\">interactive step</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    if (!s.points.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (const auto& p : s.points) svg << pt(static_cast<double>(p.step), p.mean + p.std) << ' ';
      for (auto it = s.points.rbegin(); it != s.points.rend(); ++it) {
        svg << pt(static_cast<double>(it->step), it->mean - it->std) << ' ';
      }
      svg << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
      for (const auto& p : s.points) svg << pt(static_cast<double>(p.step), p.mean) << ' ';
      svg << "\"/>\n";
    }
    const double ly = kTop + 12 + 18 * static_cast<double>(i);
    svg << "<line x1=\"" << fixed(kLeft + pw + 12, 2) << "\" y1=\"" << fixed(ly, 2) << "\" x2=\""
        << fixed(kLeft + pw + 32, 2) << "\" y2=\"" << fixed(ly, 2) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n<text x=\"" << fixed(kLeft + pw + 36, 2) << "\" y=\""
        << fixed(ly + 4, 2) << "\">" << escape(s.method) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace driftlab::exp
