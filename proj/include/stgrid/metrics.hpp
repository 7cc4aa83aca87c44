#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stgrid/errors.hpp"

namespace stgrid {

inline constexpr const char* kMetricsVersionLine = "# stgrid-metrics v1";
inline constexpr const char* kMetricsHeader = "n,reward,sys_loss,dqn_loss,action,eps_sys,eps_dqn,wall_ms";

// One orchestrator iteration. Losses are 0 while a learner is idle; the
// action is -1 for the random-walk baseline.
struct MetricsRow {
  long n = 0;
  int reward = 0;
  double sys_loss = 0.0;
  double dqn_loss = 0.0;
  int action = 0;
  double eps_sys = 0.0;
  double eps_dqn = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

namespace detail {
inline std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace detail

inline std::string format_row(const MetricsRow& r) {
  return std::to_string(r.n) + "," + std::to_string(r.reward) + "," + detail::shortest(r.sys_loss) +
         "," + detail::shortest(r.dqn_loss) + "," + std::to_string(r.action) + "," +
         detail::shortest(r.eps_sys) + "," + detail::shortest(r.eps_dqn) + "," +
         detail::shortest(r.wall_ms);
}

// Appends rows as they are produced and flushes each one.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false) : path_(path) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw ConfigurationError("cannot open metrics file " + path);
    if (!append) out_ << kMetricsVersionLine << "\n" << kMetricsHeader << "\n";
  }
  void write(const MetricsRow& r) {
    out_ << format_row(r) << "\n";
    out_.flush();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open metrics file " + path);
  std::string line;
  std::vector<MetricsRow> rows;
  if (!std::getline(in, line) || line != kMetricsVersionLine)
    throw ConfigurationError(path + ": missing metrics version line");
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw ConfigurationError(path + ": unexpected metrics header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ConfigurationError(path + ": malformed row '" + line + "'");
    MetricsRow r;
    r.n = std::stol(f[0]);
    r.reward = std::stoi(f[1]);
    r.sys_loss = std::stod(f[2]);
    r.dqn_loss = std::stod(f[3]);
    r.action = std::stoi(f[4]);
    r.eps_sys = std::stod(f[5]);
    r.eps_dqn = std::stod(f[6]);
    r.wall_ms = std::stod(f[7]);
    rows.push_back(r);
  }
  return rows;
}

// Mean reward over the last ceil(10%) of the rows.
inline double final_tenth_mean(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, (rows.size() + 9) / 10);
  double s = 0.0;
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) s += rows[i].reward;
  return s / static_cast<double>(tail);
}

}  // namespace stgrid
