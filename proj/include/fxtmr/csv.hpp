#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxtmr/sim.hpp"

namespace fxtmr {

namespace detail {

inline void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

inline std::FILE* open_or_throw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

}  // namespace detail

/// Per-tick trajectory table. Fixed leading columns
///   t, x*, z*, um*, ul*, u*, h, delta, ratio, mpc_feasible
/// followed by interval, status, held and the barrier center zt*.
inline void export_csv(const TrajectoryLog& log, const std::string& path) {
  std::FILE* f = detail::open_or_throw(path);
  std::string line = "t";
  for (int i = 0; i < log.nx; ++i) line += ",x" + std::to_string(i);
  for (int i = 0; i < log.nx; ++i) line += ",z" + std::to_string(i);
  for (int i = 0; i < log.nu; ++i) line += ",um" + std::to_string(i);
  for (int i = 0; i < log.nu; ++i) line += ",ul" + std::to_string(i);
  for (int i = 0; i < log.nu; ++i) line += ",u" + std::to_string(i);
  line += ",h,delta,ratio,mpc_feasible,interval,status,held";
  for (int i = 0; i < log.nx; ++i) line += ",zt" + std::to_string(i);
  line += "\n";
  std::fputs(line.c_str(), f);

  for (const TickRecord& t : log.ticks) {
    line.clear();
    detail::put(line, t.t);
    auto push_vec = [&line](const Eigen::VectorXd& v) {
      for (int i = 0; i < v.size(); ++i) {
        line += ',';
        detail::put(line, v(i));
      }
    };
    push_vec(t.x);
    push_vec(t.z);
    push_vec(t.u_m);
    push_vec(t.u_l);
    push_vec(t.u);
    line += ',';
    detail::put(line, t.h);
    line += ',';
    detail::put(line, t.delta);
    line += ',';
    detail::put(line, t.ratio);
    line += ',';
    line += t.mpc_feasible ? '1' : '0';
    line += ',' + std::to_string(t.interval);
    line += ',' + std::to_string(static_cast<int>(t.lowlevel_status));
    line += ',';
    line += t.held ? '1' : '0';
    push_vec(t.z_target);
    line += '\n';
    if (std::fputs(line.c_str(), f) < 0) {
      std::fclose(f);
      throw std::runtime_error("write failure on: " + path);
    }
  }
  std::fclose(f);
}

/// Per-interval summary table.
inline void export_interval_csv(const TrajectoryLog& log, const std::string& path) {
  std::FILE* f = detail::open_or_throw(path);
  std::string line = "i,t_start,mpc_feasible,reached_C,h_end,first_cross_t,held_in_C,max_ratio,"
                     "lemma2_norm,assumption1_ok,assumption1_margin";
  for (int i = 0; i < log.nx; ++i) line += ",zplus" + std::to_string(i);
  for (int i = 0; i < log.nx; ++i) line += ",zend" + std::to_string(i);
  for (int i = 0; i < log.nu; ++i) line += ",um" + std::to_string(i);
  line += "\n";
  std::fputs(line.c_str(), f);
  for (const IntervalRecord& r : log.intervals) {
    line = std::to_string(r.i);
    line += ',';
    detail::put(line, r.t_start);
    line += r.mpc_feasible ? ",1" : ",0";
    line += r.reached_C ? ",1" : ",0";
    line += ',';
    detail::put(line, r.h_end);
    line += ',';
    detail::put(line, r.first_cross_t);
    line += r.held_in_C ? ",1" : ",0";
    line += ',';
    detail::put(line, r.max_ratio);
    line += ',';
    detail::put(line, r.lemma2_norm);
    line += r.assumption1_ok ? ",1" : ",0";
    line += ',';
    detail::put(line, r.assumption1_margin);
    auto push_vec = [&line](const Eigen::VectorXd& v, int expect) {
      for (int i = 0; i < expect; ++i) {
        line += ',';
        detail::put(line, v.size() == expect ? v(i) : std::numeric_limits<double>::quiet_NaN());
      }
    };
    push_vec(r.z_plus, log.nx);
    push_vec(r.z_end, log.nx);
    push_vec(r.u_m, log.nu);
    line += '\n';
    std::fputs(line.c_str(), f);
  }
  std::fclose(f);
}

/// Structured key=value report next to the CSVs.
inline void write_report(const SimReport& r, const std::string& path) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "periodic_safety=" << b(r.periodic_safety) << "\n";
  out << "recursive_feasibility=" << b(r.recursive_feasibility) << "\n";
  out << "theorem1_hypothesis_ok=" << b(r.theorem1_hypothesis_ok) << "\n";
  out << "all_intervals_reached=" << b(r.all_intervals_reached) << "\n";
  out << "first_unreached_interval=" << r.first_unreached_interval << "\n";
  out << "lemma1_ok=" << b(r.lemma1_ok) << "\n";
  out << "lemma2_ok=" << b(r.lemma2_ok) << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", r.lemma2_max_norm);
  out << "lemma2_max_norm=" << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", r.max_ratio);
  out << "max_ratio=" << buf << "\n";
  out << "assumption2_ok=" << b(r.assumption2_ok) << "\n";
  out << "assumption1_ok=" << b(r.assumption1_ok) << "\n";
  out << "assumption1_indeterminate=" << b(r.assumption1_indeterminate) << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", r.assumption1_worst_margin);
  out << "assumption1_worst_margin=" << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", r.input_bound_violation);
  out << "input_bound_violation=" << buf << "\n";
  out << "intervals_completed=" << r.intervals_completed << "\n";
  out << "lowlevel_holds=" << r.lowlevel_holds << "\n";
  out << "halted=" << b(r.halted) << "\n";
  out << "halt_interval=" << r.halt_interval << "\n";
  out << "halt_reason=" << r.halt_reason << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", r.runtime_seconds);
  out << "runtime_seconds=" << buf << "\n";
  out << "safety_violation_count=" << r.safety_violations.size() << "\n";
  for (size_t i = 0; i < r.safety_violations.size(); ++i) {
    const SafetyViolation& v = r.safety_violations[i];
    std::snprintf(buf, sizeof(buf), "%.17g", v.margin);
    out << "violation." << i << "=" << v.t << ":" << v.quantity << ":" << buf << "\n";
  }
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open for writing: " + path);
  file << out.str();
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  std::istringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream rs(line);
    while (std::getline(rs, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace fxtmr
