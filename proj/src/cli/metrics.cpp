#include "ic3net/cli/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ic3net/errors.hpp"

namespace ic3net::cli {

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"epoch",     "mean_reward", "avg_steps",   "success_rate",
                                             "mean_gate", "prey_gate",   "p_arrive",    "policy_loss",
                                             "value_loss", "entropy"};
  return cols;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_header() {
  std::string out;
  for (const auto& c : metrics_columns()) out += (out.empty() ? "" : ",") + c;
  return out + "\n";
}

std::string metrics_row(const train::EpochMetrics& m) {
  const double cells[] = {m.mean_reward, m.avg_steps,   m.success_rate, m.mean_gate, m.prey_gate,
                          m.p_arrive,    m.policy_loss, m.value_loss,   m.entropy};
  std::string out = std::to_string(m.epoch);
  for (double c : cells) out += "," + format_number(c);
  return out + "\n";
}

bool CsvTable::has(const std::string& name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("missing column '" + name + "'");
}

std::vector<std::optional<double>> CsvTable::numbers(const std::string& name) const {
  const std::size_t idx = column(name);
  std::vector<std::optional<double>> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& cell = idx < rows[r].size() ? rows[r][idx] : std::string();
    if (cell.empty()) {
      out.emplace_back();
      continue;
    }
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
      throw FormatError("column '" + name + "', row " + std::to_string(r + 1) + ": not a number '" + cell + "'");
    }
    out.emplace_back(v);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      t.header = split(line);
      first = false;
      continue;
    }
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw FormatError("row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (first) throw FormatError("empty CSV (no header row)");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace ic3net::cli
