#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fxtmr/sim.hpp"

namespace fxtmr {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value configuration with [section] headers. Keys are addressed
/// as "section.key"; insertion order is preserved so serialize() is stable.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
        cfg.section_order_.push_back(section);
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                          "' outside any [section]");
      const std::string full = section + "." + key;
      if (cfg.index_.count(full))
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + full +
                          "'");
      cfg.index_[full] = static_cast<int>(cfg.entries_.size());
      cfg.entries_.emplace_back(full, value);
      cfg.lines_[full] = lineno;
    }
    return cfg;
  }

  static ConfigMap parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  std::string serialize() const {
    std::ostringstream out;
    std::string current;
    for (const auto& [key, value] : entries_) {
      const size_t dot = key.find('.');
      const std::string section = key.substr(0, dot);
      if (section != current) {
        if (!current.empty()) out << "\n";
        out << "[" << section << "]\n";
        current = section;
      }
      out << key.substr(dot + 1) << " = " << value << "\n";
    }
    return out.str();
  }

  bool has(const std::string& key) const { return index_.count(key) > 0; }

  /// Override an existing key; unknown keys are rejected so typos surface.
  void set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it == index_.end())
      throw ConfigError("override references unknown config key '" + key + "'");
    entries_[it->second].second = value;
  }

  std::string get_string(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("missing config key '" + key + "'");
    return entries_[it->second].second;
  }

  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
  }

  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  int get_int(const std::string& key) const {
    const double v = get_double(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError(located(key) + ": expected an integer, got '" + get_string(key) + "'");
    return i;
  }

  int get_int_or(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key) const {
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(located(key) + ": expected true/false, got '" + v + "'");
  }

  bool get_bool_or(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
  }

  Eigen::VectorXd get_vector(const std::string& key) const {
    const std::string raw = get_string(key);
    std::vector<double> vals;
    std::string token;
    std::istringstream in(raw);
    while (std::getline(in, token, ',')) {
      token = trim(token);
      if (token.empty()) continue;
      vals.push_back(parse_double(key, token));
    }
    if (vals.empty()) throw ConfigError(located(key) + ": expected a vector of numbers");
    Eigen::VectorXd out(static_cast<int>(vals.size()));
    for (size_t i = 0; i < vals.size(); ++i) out(static_cast<int>(i)) = vals[i];
    return out;
  }

  /// Vector value broadcast to dimension n when given as a single number.
  Eigen::VectorXd get_vector_n(const std::string& key, int n) const {
    Eigen::VectorXd v = get_vector(key);
    if (v.size() == 1 && n > 1) return Eigen::VectorXd::Constant(n, v(0));
    if (v.size() != n)
      throw ConfigError(located(key) + ": expected " + std::to_string(n) + " entries, got " +
                        std::to_string(v.size()));
    return v;
  }

  Eigen::VectorXd get_vector_n_or(const std::string& key, int n, double fallback) const {
    if (!has(key)) return Eigen::VectorXd::Constant(n, fallback);
    return get_vector_n(key, n);
  }

 private:
  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::string located(const std::string& key) const {
    auto it = lines_.find(key);
    const std::string at = it == lines_.end() ? "" : " (line " + std::to_string(it->second) + ")";
    return "config key '" + key + "'" + at;
  }

  double parse_double(const std::string& key, const std::string& token) const {
    try {
      size_t pos = 0;
      const double v = std::stod(token, &pos);
      if (pos != token.size()) throw std::invalid_argument(token);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(located(key) + ": expected a number, got '" + token + "'");
    }
  }

  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, int> index_;
  std::map<std::string, int> lines_;
  std::vector<std::string> section_order_;
};

inline ScenarioConfig scenario_from_config(const ConfigMap& cfg) {
  ScenarioConfig sc;
  const std::string type = cfg.get_string("plant.type");
  if (type == "segway") {
    sc.plant_kind = PlantKind::Segway;
    SegwayParams& p = sc.segway;
    p.wheel_mass = cfg.get_double_or("plant.wheel_mass", p.wheel_mass);
    p.body_mass = cfg.get_double_or("plant.body_mass", p.body_mass);
    p.body_inertia = cfg.get_double_or("plant.body_inertia", p.body_inertia);
    p.com_length = cfg.get_double_or("plant.com_length", p.com_length);
    p.wheel_radius = cfg.get_double_or("plant.wheel_radius", p.wheel_radius);
    p.motor_kt = cfg.get_double_or("plant.motor_kt", p.motor_kt);
    p.motor_kb = cfg.get_double_or("plant.motor_kb", p.motor_kb);
    p.motor_resistance = cfg.get_double_or("plant.motor_resistance", p.motor_resistance);
    p.gravity = cfg.get_double_or("plant.gravity", p.gravity);
  } else if (type == "double_integrator") {
    sc.plant_kind = PlantKind::DoubleIntegrator;
    sc.integrator_axes = cfg.get_int_or("plant.axes", 1);
  } else if (type == "single_integrator") {
    sc.plant_kind = PlantKind::SingleIntegrator;
    sc.integrator_axes = cfg.get_int_or("plant.axes", 1);
  } else {
    throw ConfigError("config key 'plant.type': unknown plant '" + type + "'");
  }

  const std::unique_ptr<ControlAffinePlant> plant = make_plant(sc);
  const int nx = plant->nx();
  const int nu = plant->nu();

  sc.u_max = cfg.get_vector_n("plant.input_max", nu);

  sc.T = cfg.get_double("sim.T");
  sc.n_intervals = cfg.get_int("sim.intervals");
  sc.lowlevel_rate = cfg.get_double("sim.lowlevel_rate_hz");
  sc.integrator_substeps = cfg.get_int_or("sim.integrator_substeps", 1);
  sc.x0 = cfg.get_vector_n("sim.x0", nx);
  const std::string baseline = cfg.get_string_or("sim.baseline", "fxt");
  if (baseline == "fxt")
    sc.baseline = BaselineKind::Fxt;
  else if (baseline == "esclf")
    sc.baseline = BaselineKind::EsClf;
  else
    throw ConfigError("config key 'sim.baseline': expected fxt or esclf, got '" + baseline + "'");
  sc.seed = static_cast<std::uint64_t>(cfg.get_double_or("sim.seed", 1));
  sc.run_assumption1 = cfg.get_bool_or("sim.check_assumption1", true);
  sc.assumption1_samples = cfg.get_int_or("sim.assumption1_samples", 128);

  sc.mu = cfg.get_double("fxt.mu");
  sc.k = cfg.get_double("fxt.k");
  sc.r_check = cfg.get_double("fxt.r_check");
  sc.c = cfg.get_double("fxt.c");
  sc.d = cfg.get_double("fxt.d");
  if (cfg.has("fxt.slack_cost")) sc.slack_cost = cfg.get_double("fxt.slack_cost");

  sc.clf_lambda = cfg.get_double_or("esclf.lambda", 1.0);
  sc.clf_slack_weight = cfg.get_double_or("esclf.slack_weight", 1.0);

  sc.horizon = cfg.get_int_or("mpc.horizon", 10);
  sc.q_diag = cfg.get_vector_n_or("mpc.q_diag", nx, 1.0);
  sc.r_diag = cfg.get_vector_n_or("mpc.r_diag", nu, 1.0);
  sc.qf_diag = cfg.get_vector_n_or("mpc.qf_diag", nx, 1.0);
  sc.xt_lo = cfg.get_vector_n("mpc.xt_lo", nx);
  sc.xt_hi = cfg.get_vector_n("mpc.xt_hi", nx);
  sc.um_max = cfg.get_vector_n("mpc.um_max", nu);
  const std::string coupling = cfg.get_string_or("mpc.coupling", "l1");
  if (coupling == "l1")
    sc.coupling = CouplingForm::L1;
  else if (coupling == "box")
    sc.coupling = CouplingForm::Box;
  else
    throw ConfigError("config key 'mpc.coupling': expected l1 or box, got '" + coupling + "'");

  sc.safety_tol = cfg.get_double_or("tolerances.safety", 1e-6);
  sc.algebra_tol = cfg.get_double_or("tolerances.algebra", 1e-9);
  sc.qp_tolerance = cfg.get_double_or("tolerances.qp", 1e-8);
  sc.qp_max_iterations = cfg.get_int_or("tolerances.qp_max_iterations", 10000);
  return sc;
}

}  // namespace fxtmr
