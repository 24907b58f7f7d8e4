#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fxtmr/fxts.hpp"
#include "fxtmr/geometry.hpp"
#include "fxtmr/mpc.hpp"
#include "fxtmr/plant.hpp"
#include "fxtmr/qp.hpp"

namespace fxtmr {

enum class PlantKind { Segway, DoubleIntegrator, SingleIntegrator };
enum class BaselineKind { Fxt, EsClf };

inline const char* to_string(BaselineKind b) {
  return b == BaselineKind::Fxt ? "fxt" : "esclf";
}

struct ScenarioConfig {
  PlantKind plant_kind = PlantKind::Segway;
  SegwayParams segway;
  int integrator_axes = 1;

  double T = 0.2;
  int n_intervals = 25;
  double lowlevel_rate = 10000.0;  // Hz
  int integrator_substeps = 1;
  Eigen::VectorXd x0;
  BaselineKind baseline = BaselineKind::Fxt;

  double mu = 2.0, k = 0.5, r_check = 0.5, c = 0.005, d = 0.6;
  std::optional<double> slack_cost;
  double clf_lambda = 1.0, clf_slack_weight = 1.0;

  Eigen::VectorXd u_max;   // |u| <= u_max
  Eigen::VectorXd um_max;  // |u_m| <= um_max

  int horizon = 10;
  Eigen::VectorXd q_diag, r_diag, qf_diag;
  Eigen::VectorXd xt_lo, xt_hi;
  CouplingForm coupling = CouplingForm::L1;

  bool run_assumption1 = true;
  int assumption1_samples = 128;
  std::uint64_t seed = 1;
  double safety_tol = 1e-6;
  double algebra_tol = 1e-9;
  double qp_tolerance = 1e-8;
  int qp_max_iterations = 10000;
};

struct TickRecord {
  double t = 0.0;
  Eigen::VectorXd x, z;
  Eigen::VectorXd u_m, u_l, u;
  double h = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool mpc_feasible = false;
  int interval = 0;
  QpStatus lowlevel_status = QpStatus::Optimal;
  bool held = false;         // previous u_l reapplied after a failed solve
  bool at_boundary = false;  // t == iT (includes the terminal record)
  Eigen::VectorXd z_target;  // barrier center z^-((i+1)T) for this tick
};

struct IntervalRecord {
  int i = 0;
  double t_start = 0.0;
  bool mpc_feasible = false;
  QpStatus mpc_status = QpStatus::MaxIterations;
  Eigen::VectorXd z_plus;   // reference state after the reset
  Eigen::VectorXd z_end;    // predicted z^-((i+1)T), the barrier center
  Eigen::VectorXd u_m;
  double h_end = std::numeric_limits<double>::quiet_NaN();
  bool reached_C = false;
  double first_cross_t = std::numeric_limits<double>::quiet_NaN();
  bool held_in_C = true;  // no post-crossing dips below -tol
  double max_ratio = -std::numeric_limits<double>::infinity();
  double lemma2_norm = std::numeric_limits<double>::quiet_NaN();
  bool assumption1_ok = true;
  bool assumption1_indeterminate = false;
  double assumption1_margin = std::numeric_limits<double>::infinity();
};

struct TrajectoryLog {
  std::vector<TickRecord> ticks;
  std::vector<IntervalRecord> intervals;
  int nx = 0, nu = 0;
  double T = 0.0;
  int ticks_per_interval = 0;
};

struct SafetyViolation {
  double t = 0.0;
  std::string quantity;
  double margin = 0.0;
};

struct SafetyVerdict {
  bool safe = true;
  std::vector<SafetyViolation> violations;
};

struct SimReport {
  bool periodic_safety = false;
  std::vector<SafetyViolation> safety_violations;
  bool recursive_feasibility = false;
  bool theorem1_hypothesis_ok = true;
  double max_ratio = -std::numeric_limits<double>::infinity();
  bool assumption2_ok = true;
  bool assumption1_ok = true;
  bool assumption1_indeterminate = false;
  double assumption1_worst_margin = std::numeric_limits<double>::infinity();
  double input_bound_violation = 0.0;
  bool lemma1_ok = true;
  bool lemma2_ok = true;
  double lemma2_max_norm = 0.0;
  bool all_intervals_reached = true;
  int first_unreached_interval = -1;
  bool halted = false;
  std::string halt_reason;
  int halt_interval = -1;
  int intervals_completed = 0;
  int lowlevel_holds = 0;
  double runtime_seconds = 0.0;
};

struct SimRun {
  TrajectoryLog log;
  SimReport report;
};

inline std::unique_ptr<ControlAffinePlant> make_plant(const ScenarioConfig& cfg) {
  switch (cfg.plant_kind) {
    case PlantKind::Segway: return std::make_unique<SegwayPlant>(cfg.segway);
    case PlantKind::DoubleIntegrator:
      return std::make_unique<DoubleIntegratorPlant>(cfg.integrator_axes);
    default: return std::make_unique<SingleIntegratorPlant>(cfg.integrator_axes);
  }
}

inline void validate_scenario(const ScenarioConfig& cfg, const ControlAffinePlant& plant) {
  const int nx = plant.nx();
  const int nu = plant.nu();
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("scenario config: ") + what);
  };
  need(cfg.T > 0.0, "sim.T must be positive");
  need(cfg.n_intervals >= 0, "sim.intervals must be >= 0");
  need(cfg.lowlevel_rate > 0.0, "sim.lowlevel_rate_hz must be positive");
  const double ticks = cfg.lowlevel_rate * cfg.T;
  need(std::abs(ticks - std::round(ticks)) < 1e-6 && std::round(ticks) >= 1.0,
       "sim.lowlevel_rate_hz * sim.T must be a positive integer");
  need(cfg.integrator_substeps >= 1, "sim.integrator_substeps must be >= 1");
  need(cfg.x0.size() == nx, "sim.x0 dimension must match the plant");
  need(cfg.u_max.size() == nu && (cfg.u_max.array() > 0.0).all(),
       "plant.input_max must be positive and match the input dimension");
  need(cfg.um_max.size() == nu && (cfg.um_max.array() > 0.0).all(),
       "mpc.um_max must be positive and match the input dimension");
  need((cfg.um_max.array() <= cfg.u_max.array()).all(), "mpc.um_max must not exceed input_max");
  need(cfg.xt_lo.size() == nx && cfg.xt_hi.size() == nx, "mpc.xt bounds must match the plant");
  need(cfg.q_diag.size() == nx && cfg.qf_diag.size() == nx && cfg.r_diag.size() == nu,
       "mpc weights must match the model dimensions");
  need(cfg.horizon >= 1, "mpc.horizon must be >= 1");
  need(cfg.assumption1_samples >= 1, "sim.assumption1_samples must be >= 1");
}

struct Assumption1Result {
  bool ok = true;
  bool indeterminate = false;
  double worst_margin = std::numeric_limits<double>::infinity();
};

/// Sample the boundary sphere of C_i and maximize the Assumption-1 left-hand
/// side L_f h + L_g h (u_m + u_l) over the admissible u_l at each sample.
inline Assumption1Result check_assumption1(const BarrierContext& ctx, const Eigen::VectorXd& u_m,
                                           const FxtParams& params,
                                           const ControlAffinePlant& plant,
                                           const Polytope& input_set, int n_samples,
                                           std::uint64_t seed,
                                           const SolverSettings& settings = {}) {
  if (n_samples < 1) throw std::invalid_argument("check_assumption1: n_samples must be >= 1");
  const int nx_dim = plant.nx();
  const int nu = plant.nu();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Assumption1Result res;
  for (int s = 0; s < n_samples; ++s) {
    Eigen::VectorXd dir(nx_dim);
    do {
      for (int i = 0; i < nx_dim; ++i) dir(i) = n01(rng);
    } while (dir.norm() < 1e-12);
    dir.normalize();
    const Eigen::VectorXd x = ctx.z_end + params.c * dir;

    const BarrierValue bv = barrier(x, ctx, params);
    const double lfh = bv.grad.dot(plant.f(x));
    const Eigen::RowVectorXd lgh = bv.grad.transpose() * plant.g(x);

    // maximize lgh u_l over A_u (u_l + u_m) <= b_u
    QpProblem lp(Eigen::MatrixXd::Zero(nu, nu), -lgh.transpose(), input_set.A,
                 input_set.b - input_set.A * u_m);
    const QpSolution sol = solve_qp(lp, settings);
    if (sol.status != QpStatus::Optimal) {
      res.indeterminate = true;
      res.ok = false;
      continue;
    }
    const double margin = lfh + lgh.dot(u_m) + lgh.dot(sol.x);
    res.worst_margin = std::min(res.worst_margin, margin);
    if (margin < -1e-9) res.ok = false;
  }
  return res;
}

/// Eq.-20 inequality at a single ratio value r_M >= 1.
inline bool eq20_holds_at(const FxtParams& params, double r_M, double tol = 1e-9) {
  if (r_M < 1.0) throw std::invalid_argument("eq20_holds_at: requires r_M >= 1");
  const double phi = r_M - std::sqrt(r_M * r_M - 1.0);
  const double rhs = std::pow(params.k, params.mu) * std::pow(phi, params.mu) +
                     0.5 * params.c * params.c;
  return 0.5 * params.d * params.d <= rhs + tol;
}

/// Consistency of the Assumption-2 bound with the FxT-DoA containment:
/// the inequality must hold at r_M = r_bar and across a grid on [1, r_bar].
/// Vacuously true when r_bar < 1 (whole-space DoA regime).
inline bool check_eq20_consistency(const FxtParams& params, double tol = 1e-9) {
  if (params.r_bar < 1.0) return true;
  if (!eq20_holds_at(params, params.r_bar, tol)) return false;
  const int grid = 1001;
  for (int i = 0; i < grid; ++i) {
    const double r = 1.0 + (params.r_bar - 1.0) * static_cast<double>(i) / (grid - 1);
    if (!eq20_holds_at(params, r, tol)) return false;
  }
  return true;
}

/// Periodic-safety verdict from a complete log: x(iT) in X_T at every
/// boundary (tol) and dist(x(t), X_T) <= d (membership in X = X_T (+) D)
/// at every tick.
inline SafetyVerdict check_periodic_safety(const TrajectoryLog& log, const Box& xt, double d,
                                           double T, double tol = 1e-6) {
  (void)T;
  SafetyVerdict verdict;
  for (const TickRecord& tick : log.ticks) {
    const double dist = dist_to_box(tick.x, xt);
    if (dist > d + tol) {
      verdict.safe = false;
      verdict.violations.push_back({tick.t, "x outside X = X_T (+) D", dist - d});
    }
    if (tick.at_boundary && !xt.contains(tick.x, tol)) {
      double worst = 0.0;
      for (int i = 0; i < xt.dim(); ++i)
        worst = std::max({worst, xt.lo(i) - tick.x(i), tick.x(i) - xt.hi(i)});
      verdict.safe = false;
      verdict.violations.push_back({tick.t, "x(iT) outside X_T", worst});
    }
  }
  return verdict;
}

using ProgressCallback = std::function<void(const IntervalRecord&)>;

/// Multi-rate closed loop: FTOCP at 1/T Hz with the reference reset
/// z+ = z*_{i|i} and held u_m = v*_{i|i}; the low-level policy at
/// lowlevel_rate with the barrier centered on the predicted z^-((i+1)T);
/// RK4 plant integration between ticks.
inline SimRun run_scenario(const ScenarioConfig& cfg, const ProgressCallback& progress = {}) {
  const auto t_begin = std::chrono::steady_clock::now();
  const std::unique_ptr<ControlAffinePlant> plant = make_plant(cfg);
  validate_scenario(cfg, *plant);
  const int nx = plant->nx();
  const int nu = plant->nu();

  const FxtParams fxt =
      derive_params(cfg.mu, cfg.k, cfg.r_check, cfg.T, cfg.c, cfg.d, cfg.slack_cost);
  const Linearization lin = linearize(*plant, Eigen::VectorXd::Zero(nx));
  const DiscreteLtiModel model_T = zoh_discretize(lin.A, lin.B, cfg.T);
  const int K = static_cast<int>(std::round(cfg.lowlevel_rate * cfg.T));
  const double dt = cfg.T / K;
  const DiscreteLtiModel model_tick = zoh_discretize(lin.A, lin.B, dt);

  const Polytope input_set = symmetric_box_polytope(cfg.u_max);
  const Polytope um_set = symmetric_box_polytope(cfg.um_max);
  const Box xt_box(cfg.xt_lo, cfg.xt_hi);

  SolverSettings qp_settings;
  qp_settings.tolerance = cfg.qp_tolerance;
  qp_settings.max_iterations = cfg.qp_max_iterations;

  const MpcConfig mpc_cfg(cfg.horizon, cfg.q_diag.asDiagonal(), cfg.r_diag.asDiagonal(),
                          cfg.qf_diag.asDiagonal(), box_polytope(xt_box), cfg.c, cfg.d, um_set,
                          TerminalSet::origin(), model_T, cfg.coupling, qp_settings);

  SimRun run;
  TrajectoryLog& log = run.log;
  SimReport& report = run.report;
  log.nx = nx;
  log.nu = nu;
  log.T = cfg.T;
  log.ticks_per_interval = K;
  if (cfg.n_intervals > 0) {
    log.ticks.reserve(static_cast<size_t>(cfg.n_intervals) * K + 1);
    log.intervals.reserve(cfg.n_intervals);
  }

  Eigen::VectorXd x = cfg.x0;
  Eigen::VectorXd z = cfg.x0;
  Eigen::VectorXd u_l_prev = Eigen::VectorXd::Zero(nu);
  report.recursive_feasibility = true;

  for (int i = 0; i < cfg.n_intervals && !report.halted; ++i) {
    const MpcSolution sol = solve_ftocp(x, mpc_cfg, qp_settings);
    IntervalRecord rec;
    rec.i = i;
    rec.t_start = i * cfg.T;
    rec.mpc_feasible = sol.feasible;
    rec.mpc_status = sol.status;
    if (!sol.feasible) {
      report.halted = true;
      report.halt_interval = i;
      if (i == 0 && sol.status == QpStatus::Infeasible) {
        report.theorem1_hypothesis_ok = false;
        report.halt_reason =
            "Theorem-1 hypothesis violated: FTOCP infeasible at t = 0";
      } else if (sol.status == QpStatus::Infeasible) {
        report.recursive_feasibility = false;
        report.halt_reason = "FTOCP infeasible at t = " + std::to_string(i) + "T";
      } else {
        report.halt_reason = "FTOCP solver indeterminate (max iterations) at t = " +
                             std::to_string(i) + "T";
      }
      log.intervals.push_back(std::move(rec));
      if (progress) progress(log.intervals.back());
      break;
    }

    z = reset_map(sol);
    const Eigen::VectorXd u_m = sol.v_seq.front();
    const Eigen::VectorXd z_end = predict_z_end(model_T, z, u_m);
    rec.z_plus = z;
    rec.z_end = z_end;
    rec.u_m = u_m;
    rec.lemma2_norm = (x - z_end).norm();
    report.lemma2_max_norm = std::max(report.lemma2_max_norm, rec.lemma2_norm);

    const BarrierContext ctx{z_end, i};
    if (cfg.run_assumption1 && cfg.baseline == BaselineKind::Fxt) {
      const Assumption1Result a1 =
          check_assumption1(ctx, u_m, fxt, *plant, input_set, cfg.assumption1_samples,
                            cfg.seed + static_cast<std::uint64_t>(i) * 1000003ULL, qp_settings);
      rec.assumption1_ok = a1.ok;
      rec.assumption1_indeterminate = a1.indeterminate;
      rec.assumption1_margin = a1.worst_margin;
      report.assumption1_ok = report.assumption1_ok && a1.ok;
      report.assumption1_indeterminate = report.assumption1_indeterminate || a1.indeterminate;
      report.assumption1_worst_margin =
          std::min(report.assumption1_worst_margin, a1.worst_margin);
    }

    bool crossed = false;
    for (int tick = 0; tick < K; ++tick) {
      const double t = i * cfg.T + tick * dt;
      TickRecord tr;
      tr.t = t;
      tr.x = x;
      tr.z = z;
      tr.interval = i;
      tr.mpc_feasible = true;
      tr.at_boundary = tick == 0;
      tr.z_target = z_end;
      tr.u_m = u_m;

      LowLevelOutput out;
      if (cfg.baseline == BaselineKind::Fxt)
        out = low_level_policy(x, u_m, ctx, fxt, *plant, input_set, qp_settings);
      else
        out = es_clf_policy(x, u_m, ctx, cfg.clf_lambda, cfg.clf_slack_weight, *plant, input_set,
                            qp_settings);
      tr.lowlevel_status = out.status;
      tr.held = out.status != QpStatus::Optimal;
      if (tr.held) {
        ++report.lowlevel_holds;
        tr.u_l = u_l_prev;
      } else {
        tr.u_l = out.u_l;
        tr.delta = out.delta;
        if (cfg.baseline == BaselineKind::Fxt) {
          tr.ratio = out.ratio;
          rec.max_ratio = std::max(rec.max_ratio, out.ratio);
          report.max_ratio = std::max(report.max_ratio, out.ratio);
        }
      }
      tr.u = tr.u_l + u_m;
      tr.h = barrier(x, ctx, fxt).h;
      if (tr.h >= 0.0 && !crossed) {
        crossed = true;
        rec.first_cross_t = t;
      }
      if (crossed && tr.h < -cfg.safety_tol) rec.held_in_C = false;
      report.input_bound_violation =
          std::max(report.input_bound_violation,
                   (input_set.A * tr.u - input_set.b).maxCoeff());

      u_l_prev = tr.u_l;
      const Eigen::VectorXd u_applied = tr.u;
      log.ticks.push_back(std::move(tr));

      const double sub_dt = dt / cfg.integrator_substeps;
      for (int s = 0; s < cfg.integrator_substeps; ++s)
        x = rk4_step(*plant, x, u_applied, sub_dt);
      if (!x.allFinite()) {
        report.halted = true;
        report.halt_interval = i;
        report.halt_reason = "plant divergence (non-finite state)";
        break;
      }
      z = model_tick.Abar * z + model_tick.Bbar * u_m;
    }

    rec.h_end = barrier(x, ctx, fxt).h;
    rec.reached_C = rec.h_end >= -cfg.safety_tol;
    if (!rec.reached_C && report.first_unreached_interval < 0)
      report.first_unreached_interval = i;
    report.all_intervals_reached = report.all_intervals_reached && rec.reached_C;
    report.lemma1_ok = report.lemma1_ok && rec.reached_C && rec.held_in_C;
    if (!report.halted) ++report.intervals_completed;
    log.intervals.push_back(std::move(rec));
    if (progress) progress(log.intervals.back());
  }

  // terminal record at t = MT (state after the last integration step)
  if (!log.intervals.empty() && !log.ticks.empty() && !report.halted) {
    const IntervalRecord& last = log.intervals.back();
    TickRecord tr = log.ticks.back();
    tr.t = cfg.n_intervals * cfg.T;
    tr.x = x;
    tr.z = z;
    tr.at_boundary = true;
    tr.interval = last.i;
    tr.h = last.h_end;
    log.ticks.push_back(std::move(tr));
  }

  const SafetyVerdict verdict = check_periodic_safety(log, xt_box, cfg.d, cfg.T, cfg.safety_tol);
  report.safety_violations = verdict.violations;
  report.periodic_safety =
      verdict.safe && report.all_intervals_reached && !report.halted &&
      report.intervals_completed == cfg.n_intervals;
  report.lemma2_ok = report.lemma2_max_norm <= cfg.d + cfg.algebra_tol;
  report.assumption2_ok =
      cfg.baseline != BaselineKind::Fxt || report.max_ratio <= fxt.r_bar;
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return run;
}

}  // namespace fxtmr
