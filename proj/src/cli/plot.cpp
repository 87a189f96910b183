#include "ic3net/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <vector>

#include "ic3net/errors.hpp"

namespace ic3net::cli {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr int kTicks = 5;

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

Series series_of(const CsvTable& t, const std::string& column, const std::string& label, const std::string& color) {
  const auto xs = t.numbers("epoch");
  const auto ys = t.numbers(column);
  Series s{label, color, {}};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] && ys[i] && std::isfinite(*ys[i])) s.points.emplace_back(*xs[i], *ys[i]);
  }
  return s;
}

std::string render(const std::string& title, const std::string& y_label, const std::vector<Series>& series,
                   std::optional<std::pair<double, double>> fixed_y) {
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        any = true;
      }
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (x_lo == x_hi) {
    x_lo -= 1;
    x_hi += 1;
  }
  auto [ylo, yhi] = fixed_y ? *fixed_y : (any ? padded_range(y_lo, y_hi) : std::pair<double, double>{0.0, 1.0});

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (yhi - y) / (yhi - ylo) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
         "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) + "\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
  out += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / kTicks;
    const double fy = ylo + (yhi - ylo) * i / kTicks;
    out += "<line x1=\"" + fmt(px(fx)) + "\" y1=\"" + fmt(kTop + ph) + "\" x2=\"" + fmt(px(fx)) + "\" y2=\"" +
           fmt(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           tick_label(fx) + "</text>\n";
    out += "<line x1=\"" + fmt(kLeft - 5) + "\" y1=\"" + fmt(py(fy)) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
           fmt(py(fy)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + fmt(kLeft - 8) + "\" y=\"" + fmt(py(fy) + 4) + "\" text-anchor=\"end\">" + tick_label(fy) +
           "</text>\n";
  }
  out += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 10) + "\" text-anchor=\"middle\">epoch</text>\n";
  out += "<text x=\"16\" y=\"" + fmt(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt(kTop + ph / 2) + ")\">" + escape(y_label) + "</text>\n";

  double legend_y = kTop + 14;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      out += (i ? " " : "") + fmt(px(s.points[i].first)) + "," + fmt(py(s.points[i].second));
    }
    out += "\"/>\n";
    out += "<line x1=\"" + fmt(kLeft + pw - 110) + "\" y1=\"" + fmt(legend_y - 4) + "\" x2=\"" +
           fmt(kLeft + pw - 90) + "\" y2=\"" + fmt(legend_y - 4) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"/>\n";
    out += "<text x=\"" + fmt(kLeft + pw - 85) + "\" y=\"" + fmt(legend_y) + "\">" + escape(s.label) + "</text>\n";
    legend_y += 16;
  }
  out += "</svg>\n";
  return out;
}

bool any_value(const CsvTable& t, const std::string& column) {
  if (!t.has(column)) return false;
  for (const auto& v : t.numbers(column)) {
    if (v) return true;
  }
  return false;
}

}  // namespace

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "learning_curve") return PlotKind::kLearningCurve;
  if (s == "gate_trace") return PlotKind::kGateTrace;
  throw ConfigError("unknown plot kind '" + s + "' (expected learning_curve or gate_trace)");
}

std::string to_string(PlotKind k) { return k == PlotKind::kLearningCurve ? "learning_curve" : "gate_trace"; }

std::pair<double, double> padded_range(double lo, double hi) {
  if (lo == hi) {
    const double pad = std::max(std::abs(lo) * 0.1, 1.0);
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

std::string render_plot(const CsvTable& table, PlotKind kind, const std::string& column) {
  table.column("epoch");
  if (kind == PlotKind::kLearningCurve) {
    std::string col = column;
    if (col.empty()) col = any_value(table, "p_arrive") ? "success_rate" : "avg_steps";
    table.column(col);
    return render("learning curve", col, {series_of(table, col, col, "#1f77b4")}, std::nullopt);
  }
  table.column("mean_gate");
  table.column("prey_gate");
  std::vector<Series> s{series_of(table, "mean_gate", "agents", "#1f77b4")};
  if (any_value(table, "prey_gate")) s.push_back(series_of(table, "prey_gate", "prey", "#d62728"));
  return render("gate trace", "mean gate", s, std::pair<double, double>{-0.05, 1.05});
}

}  // namespace ic3net::cli
