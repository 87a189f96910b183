#pragma once

#include <string>
#include <utility>

#include "ic3net/cli/metrics.hpp"

namespace ic3net::cli {

enum class PlotKind { kLearningCurve, kGateTrace };

PlotKind plot_kind_from_string(const std::string& s);
std::string to_string(PlotKind k);

/// Axis range for a set of values. Constant data is padded to a visible band.
std::pair<double, double> padded_range(double lo, double hi);

/// Line chart over epochs as a standalone SVG document. The learning curve
/// plots `column` (default: success_rate for traffic-junction runs, avg_steps
/// otherwise); the gate trace overlays mean_gate and prey_gate on [0, 1].
/// Output depends only on the table contents.
std::string render_plot(const CsvTable& table, PlotKind kind, const std::string& column = "");

}  // namespace ic3net::cli
