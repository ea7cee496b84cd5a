#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "error.hpp"

namespace backplay {

namespace {

constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 190, kTop = 40, kBottom = 55;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
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

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" + num(kW / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::string s = "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kW - kLeft - kRight) +
                  "\" height=\"" + num(kH - kTop - kBottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num((kLeft + kW - kRight) / 2) + "\" y=\"" + num(kH - 15) + "\" text-anchor=\"middle\">" +
       escape(xlabel) + "</text>\n";
  s += "<text transform=\"translate(18," + num((kTop + kH - kBottom) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(ylabel) + "</text>\n";
  (void)f;
  return s;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, bool dashed) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"";
  if (dashed) s += " stroke-dasharray=\"6,4\"";
  s += " points=\"";
  for (const auto& [x, y] : pts) s += num(x) + "," + num(y) + " ";
  return s + "\"/>\n";
}

std::string legend_entry(int i, const std::string& label, const std::string& color, bool dashed) {
  const double y = kTop + 10 + 18 * i;
  const double x = kW - kRight + 12;
  std::string s = "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 22) + "\" y2=\"" + num(y) +
                  "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
  return s + "<text x=\"" + num(x + 28) + "\" y=\"" + num(y + 4) + "\">" + escape(label) + "</text>\n";
}

// Round step for roughly `n` ticks over [lo, hi].
double nice_step(double lo, double hi, int n) {
  const double raw = (hi - lo) / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10 * mag;
}

}  // namespace

std::string learning_curve_svg(const std::vector<RunRecord>& records, int marker_epoch, const std::string& title) {
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<double>>> series;
  int max_epoch = 0;
  for (const RunRecord& r : records) {
    if (r.rows.empty()) continue;
    std::string label = regime_name(r.spec.regime);
    if (r.spec.gap >= 0) label += " (gap " + std::to_string(r.spec.gap) + ")";
    if (!series.contains(label)) order.push_back(label);
    for (const MetricRow& row : r.rows) {
      series[label][row.epoch].push_back(row.success_rate);
      max_epoch = std::max(max_epoch, row.epoch);
    }
  }
  if (order.empty()) fail(ErrorCode::kInvalidArgument, "no metric rows to plot");

  const Frame f{0.0, std::max(1.0, static_cast<double>(max_epoch)), 0.0, 1.0};
  std::string s = header(title) + axes(f, "epoch", "success rate");
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(f.py(y)) + "\" x2=\"" + num(kW - kRight) + "\" y2=\"" +
         num(f.py(y)) + "\" stroke=\"#ddd\"/>\n<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(f.py(y) + 4) +
         "\" text-anchor=\"end\">" + num(y).substr(0, 3) + "</text>\n";
  }
  const double step = nice_step(0, f.x1, 6);
  for (double x = 0; x <= f.x1 + 1e-9; x += step) {
    char lab[32];
    std::snprintf(lab, sizeof lab, "%g", x);
    s += "<text x=\"" + num(f.px(x)) + "\" y=\"" + num(kH - kBottom + 16) + "\" text-anchor=\"middle\">" + lab +
         "</text>\n";
  }
  if (marker_epoch >= 0 && marker_epoch <= f.x1)
    s += "<line x1=\"" + num(f.px(marker_epoch)) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(f.px(marker_epoch)) +
         "\" y2=\"" + num(kH - kBottom) + "\" stroke=\"red\" stroke-dasharray=\"4,3\"/>\n";

  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> mean, lo, hi;
    bool band = false;
    for (const auto& [epoch, values] : series[order[i]]) {
      double sum = 0, mn = 1e300, mx = -1e300;
      for (double v : values) {
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      band = band || values.size() > 1;
      mean.push_back({f.px(epoch), f.py(sum / static_cast<double>(values.size()))});
      lo.push_back({f.px(epoch), f.py(mn)});
      hi.push_back({f.px(epoch), f.py(mx)});
    }
    if (band) {
      s += "<polygon fill=\"" + color + "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
      for (const auto& [x, y] : hi) s += num(x) + "," + num(y) + " ";
      for (auto it = lo.rbegin(); it != lo.rend(); ++it) s += num(it->first) + "," + num(it->second) + " ";
      s += "\"/>\n";
    }
    s += polyline(mean, color, false);
    s += legend_entry(static_cast<int>(i), order[i], color, false);
  }
  return s + "</svg>\n";
}

std::string sweep_svg(const std::vector<ComplexityRecord>& rows, const std::string& title) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ComplexityRecord*>> series;
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  int m_lo = std::numeric_limits<int>::max(), m_hi = 0;
  for (const ComplexityRecord& r : rows) {
    if (!(r.mean_trials > 0)) continue;
    if (!series.contains(r.strategy)) order.push_back(r.strategy);
    series[r.strategy].push_back(&r);
    lo = std::min(lo, r.mean_trials);
    hi = std::max(hi, r.mean_trials);
    m_lo = std::min(m_lo, r.M);
    m_hi = std::max(m_hi, r.M);
  }
  if (order.empty()) fail(ErrorCode::kInvalidArgument, "no sweep rows to plot");
  // Predicted curves are anchored at each series' first point.
  std::map<std::string, std::vector<std::pair<int, double>>> predicted;
  for (const auto& name : order) {
    const auto& pts = series[name];
    const double scale = pts.front()->mean_trials / pts.front()->predicted_rate;
    for (const ComplexityRecord* r : pts) {
      const double v = r->predicted_rate * scale;
      if (!(v > 0) || !std::isfinite(v)) continue;
      predicted[name].push_back({r->M, v});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const Frame f{static_cast<double>(m_lo), static_cast<double>(std::max(m_hi, m_lo + 1)), std::floor(std::log10(lo)),
                std::ceil(std::log10(hi)) + (std::ceil(std::log10(hi)) == std::floor(std::log10(lo)) ? 1 : 0)};
  std::string s = header(title) + axes(f, "M (distance levels)", "mean trials (log scale)");
  for (double e = f.y0; e <= f.y1 + 1e-9; e += 1) {
    char lab[32];
    std::snprintf(lab, sizeof lab, "1e%d", static_cast<int>(e));
    s += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(f.py(e)) + "\" x2=\"" + num(kW - kRight) + "\" y2=\"" +
         num(f.py(e)) + "\" stroke=\"#ddd\"/>\n<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(f.py(e) + 4) +
         "\" text-anchor=\"end\">" + lab + "</text>\n";
  }
  for (int m = m_lo; m <= m_hi; ++m)
    s += "<text x=\"" + num(f.px(m)) + "\" y=\"" + num(kH - kBottom + 16) + "\" text-anchor=\"middle\">" +
         std::to_string(m) + "</text>\n";
  int legend = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> pts;
    for (const ComplexityRecord* r : series[order[i]]) {
      pts.push_back({f.px(r->M), f.py(std::log10(r->mean_trials))});
      s += "<circle cx=\"" + num(f.px(r->M)) + "\" cy=\"" + num(f.py(std::log10(r->mean_trials))) + "\" r=\"3\" fill=\"" +
           color + "\"/>\n";
    }
    s += polyline(pts, color, false);
    s += legend_entry(legend++, order[i], color, false);
    std::vector<std::pair<double, double>> pred;
    for (const auto& [m, v] : predicted[order[i]]) pred.push_back({f.px(m), f.py(std::log10(v))});
    if (pred.size() > 1) {
      s += polyline(pred, color, true);
      s += legend_entry(legend++, order[i] + " predicted", color, true);
    }
  }
  return s + "</svg>\n";
}

}  // namespace backplay
