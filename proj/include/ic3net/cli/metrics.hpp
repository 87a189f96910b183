#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ic3net/train/trainer.hpp"

namespace ic3net::cli {

/// Column order of metrics.csv. Blank cells mean "not applicable"
/// (prey_gate without a trainable prey, p_arrive outside traffic junction).
const std::vector<std::string>& metrics_columns();

std::string format_number(double v);  // shortest round-trip form, blank for NaN
std::string metrics_header();
std::string metrics_row(const train::EpochMetrics& m);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has(const std::string& column) const;
  /// Index of a column; FormatError naming it when absent.
  std::size_t column(const std::string& name) const;
  /// Numeric view of a column; blank cells are nullopt.
  std::vector<std::optional<double>> numbers(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ic3net::cli
