// Multi-rate MPC + fixed-time barrier QP simulator front end.
//
// Modes:
//   run      execute one scenario, write trajectory.csv/intervals.csv/report.txt
//   compare  run the scenario with the fxt and esclf low-level policies
//   verify   assumption checks and the t = 0 plan probe, no closed loop
//   selftest fixed-seed property smoke of the numerical core
//
// Exit codes: 0 success, 1 configuration error, 2 safety/feasibility failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fxtmr/config.hpp"
#include "fxtmr/csv.hpp"
#include "fxtmr/sim.hpp"

namespace {

int verbosity() {
  const char* env = std::getenv("FXT_MULTIRATE_LOG");
  if (!env) return 1;
  return std::atoi(env);
}

struct RunPaths {
  std::string trajectory, intervals, report;
};

RunPaths write_outputs(const fxtmr::SimRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RunPaths paths{(dir / "trajectory.csv").string(), (dir / "intervals.csv").string(),
                 (dir / "report.txt").string()};
  fxtmr::export_csv(run.log, paths.trajectory);
  fxtmr::export_interval_csv(run.log, paths.intervals);
  fxtmr::write_report(run.report, paths.report);
  return paths;
}

fxtmr::SimRun run_with_progress(const fxtmr::ScenarioConfig& cfg) {
  fxtmr::ProgressCallback progress;
  if (verbosity() >= 2) {
    progress = [](const fxtmr::IntervalRecord& r) {
      std::printf("interval %d: mpc=%s h_end=%.3e reached=%d max_ratio=%.3f\n", r.i,
                  r.mpc_feasible ? "feasible" : fxtmr::to_string(r.mpc_status), r.h_end,
                  r.reached_C, r.max_ratio);
      std::fflush(stdout);
    };
  }
  return fxtmr::run_scenario(cfg, progress);
}

bool run_verdict_ok(const fxtmr::SimReport& r) {
  return r.periodic_safety && r.recursive_feasibility && r.theorem1_hypothesis_ok && !r.halted;
}

void print_summary(const char* tag, const fxtmr::SimReport& r) {
  std::printf("%s: periodic_safety=%s recursive_feasibility=%s intervals=%d max_ratio=%.4f\n",
              tag, r.periodic_safety ? "true" : "false",
              r.recursive_feasibility ? "true" : "false", r.intervals_completed, r.max_ratio);
  if (r.halted) std::printf("%s: halted at interval %d: %s\n", tag, r.halt_interval,
                            r.halt_reason.c_str());
}

int mode_run(const fxtmr::ScenarioConfig& cfg, const std::filesystem::path& out) {
  const fxtmr::SimRun run = run_with_progress(cfg);
  const RunPaths paths = write_outputs(run, out);
  if (verbosity() >= 1) {
    print_summary("run", run.report);
    std::printf("wrote %s\n", paths.trajectory.c_str());
  }
  return run_verdict_ok(run.report) ? 0 : 2;
}

int mode_compare(const fxtmr::ScenarioConfig& cfg, const std::filesystem::path& out) {
  fxtmr::ScenarioConfig fxt_cfg = cfg;
  fxt_cfg.baseline = fxtmr::BaselineKind::Fxt;
  fxtmr::ScenarioConfig clf_cfg = cfg;
  clf_cfg.baseline = fxtmr::BaselineKind::EsClf;

  const fxtmr::SimRun fxt_run = run_with_progress(fxt_cfg);
  const fxtmr::SimRun clf_run = run_with_progress(clf_cfg);
  write_outputs(fxt_run, out / "fxt");
  write_outputs(clf_run, out / "esclf");

  auto reach_c1 = [](const fxtmr::SimRun& run) {
    if (run.log.intervals.empty() || !run.log.intervals[0].mpc_feasible) return false;
    const fxtmr::IntervalRecord& r0 = run.log.intervals[0];
    return std::isfinite(r0.first_cross_t) || r0.reached_C;
  };
  const bool fxt_reached = reach_c1(fxt_run);
  const bool clf_reached = reach_c1(clf_run);
  const bool clf_mpc_infeasible_1T =
      clf_run.report.halted && clf_run.report.halt_interval == 1 &&
      !clf_run.report.recursive_feasibility;

  std::string verdict = "fxt: ";
  verdict += fxt_reached ? "reached C1" : "failed to reach C1";
  verdict += "; esclf: ";
  if (clf_mpc_infeasible_1T)
    verdict += "MPC infeasible at t=1T";
  else if (!clf_reached)
    verdict += "failed to reach C1";
  else
    verdict += "reached C1";

  std::filesystem::create_directories(out);
  {
    std::ofstream f(out / "comparison.txt");
    f << "verdict=" << verdict << "\n";
    f << "fxt_reached_C1=" << (fxt_reached ? "true" : "false") << "\n";
    f << "esclf_reached_C1=" << (clf_reached ? "true" : "false") << "\n";
    f << "esclf_mpc_infeasible_at_1T=" << (clf_mpc_infeasible_1T ? "true" : "false") << "\n";
    f << "separation=" << ((fxt_reached && !clf_reached) ? "true" : "false") << "\n";
  }
  if (verbosity() >= 1) std::printf("%s\n", verdict.c_str());
  return fxt_reached ? 0 : 2;
}

int mode_verify(const fxtmr::ScenarioConfig& cfg, const std::filesystem::path& out) {
  using namespace fxtmr;
  const std::unique_ptr<ControlAffinePlant> plant = make_plant(cfg);
  validate_scenario(cfg, *plant);
  const FxtParams fxt =
      derive_params(cfg.mu, cfg.k, cfg.r_check, cfg.T, cfg.c, cfg.d, cfg.slack_cost);
  const Linearization lin = linearize(*plant, Eigen::VectorXd::Zero(plant->nx()));
  const DiscreteLtiModel model = zoh_discretize(lin.A, lin.B, cfg.T);
  SolverSettings settings;
  settings.tolerance = cfg.qp_tolerance;
  settings.max_iterations = cfg.qp_max_iterations;
  const MpcConfig mpc_cfg(cfg.horizon, cfg.q_diag.asDiagonal(), cfg.r_diag.asDiagonal(),
                          cfg.qf_diag.asDiagonal(), box_polytope(Box(cfg.xt_lo, cfg.xt_hi)),
                          cfg.c, cfg.d, symmetric_box_polytope(cfg.um_max),
                          TerminalSet::origin(), model, cfg.coupling, settings);

  const MpcSolution probe = solve_ftocp(cfg.x0, mpc_cfg, settings);
  const Assumption3Result a3 = check_assumption3(mpc_cfg);
  const bool eq20 = check_eq20_consistency(fxt);

  bool a1_ok = true, a1_indeterminate = false;
  double a1_margin = std::numeric_limits<double>::quiet_NaN();
  if (probe.feasible) {
    const Eigen::VectorXd z_end = predict_z_end(model, reset_map(probe), probe.v_seq.front());
    const Assumption1Result a1 =
        check_assumption1({z_end, 0}, probe.v_seq.front(), fxt, *plant,
                          symmetric_box_polytope(cfg.u_max), cfg.assumption1_samples, cfg.seed,
                          settings);
    a1_ok = a1.ok;
    a1_indeterminate = a1.indeterminate;
    a1_margin = a1.worst_margin;
  }

  std::filesystem::create_directories(out);
  std::ofstream f(out / "verify.txt");
  auto line = [&](const char* key, const std::string& value) {
    f << key << "=" << value << "\n";
    if (verbosity() >= 1) std::printf("%s=%s\n", key, value.c_str());
  };
  line("ftocp_feasible_at_t0", probe.feasible ? "true" : "false");
  line("assumption3_invariant", a3.invariant ? "true" : "false");
  line("assumption3_rate_ok", a3.rate_ok ? "true" : "false");
  line("eq20_consistent", eq20 ? "true" : "false");
  line("assumption1_ok", a1_ok ? "true" : "false");
  line("assumption1_indeterminate", a1_indeterminate ? "true" : "false");
  line("assumption1_worst_margin", std::to_string(a1_margin));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", fxt.alpha);
  line("alpha", buf);
  std::snprintf(buf, sizeof(buf), "%.17g", fxt.r_bar);
  line("r_bar", buf);

  const bool ok = probe.feasible && a3.invariant && a3.rate_ok && eq20 && a1_ok;
  return ok ? 0 : 2;
}

int mode_selftest() {
  using namespace fxtmr;
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name);
    if (!ok) ++failures;
  };

  {  // exact discretization vs forward-Euler refinement
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    bool ok = true;
    for (int trial = 0; trial < 3 && ok; ++trial) {
      const int n = 2 + trial;
      Eigen::MatrixXd A(n, n), B(n, 1);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = 0.08 * n01(rng);
      A -= (A.cwiseAbs().rowwise().sum().maxCoeff() + 0.05) *
           Eigen::MatrixXd::Identity(n, n);
      for (int i = 0; i < n; ++i) B(i, 0) = n01(rng);
      const double T = 0.01;
      const DiscreteLtiModel m = zoh_discretize(A, B, T);
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, 1);
      const long steps = 1L << 20;
      const double dt = T / steps;
      for (long s = 0; s < steps; ++s) {
        const Eigen::MatrixXd dM = A * M;
        const Eigen::MatrixXd dY = A * Y + B;
        M += dt * dM;
        Y += dt * dY;
      }
      ok = (m.Abar - M).norm() < 1e-9 && (m.Bbar - Y).norm() < 1e-9;
    }
    report("zoh discretization vs Euler refinement", ok);
  }

  {  // QP solves are KKT-certified on random strictly convex problems
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n01;
    bool ok = true;
    for (int trial = 0; trial < 30 && ok; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 6);
      const int mi = static_cast<int>(rng() % 10);
      Eigen::MatrixXd L(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) L(i, j) = n01(rng);
      Eigen::MatrixXd P = L * L.transpose() + 0.3 * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd q(n), x_feas(n);
      for (int i = 0; i < n; ++i) {
        q(i) = n01(rng);
        x_feas(i) = n01(rng);
      }
      Eigen::MatrixXd G(mi, n);
      Eigen::VectorXd h(mi);
      for (int i = 0; i < mi; ++i) {
        for (int j = 0; j < n; ++j) G(i, j) = n01(rng);
        h(i) = G.row(i).dot(x_feas) + 0.1 + std::abs(n01(rng));
      }
      const QpSolution sol = solve_qp(QpProblem(P, q, G, h));
      ok = sol.status == QpStatus::Optimal && sol.kkt_residual <= 1e-8;
    }
    report("qp solver KKT certificates", ok);
  }

  {  // barrier gradient vs central differences
    std::mt19937_64 rng(37);
    std::normal_distribution<double> n01;
    const FxtParams p = derive_params(2.0, 0.5, 0.5, 0.2, 0.01, 0.5);
    bool ok = true;
    for (int trial = 0; trial < 100 && ok; ++trial) {
      Eigen::VectorXd x(3), z(3);
      for (int i = 0; i < 3; ++i) {
        x(i) = n01(rng);
        z(i) = n01(rng);
      }
      const BarrierContext ctx{z, 0};
      const BarrierValue bv = barrier(x, ctx, p);
      for (int j = 0; j < 3 && ok; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += 1e-6;
        xm(j) -= 1e-6;
        ok = std::abs(bv.grad(j) - (barrier(xp, ctx, p).h - barrier(xm, ctx, p).h) / 2e-6) < 1e-6;
      }
    }
    report("barrier gradient finite differences", ok);
  }

  {  // erosion/Minkowski duality sampling
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01;
    const Polytope box = box_polytope(
        Box(-Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)));
    const double r = 0.2;
    const Polytope eroded = polytope_erode_ball(box, r);
    bool ok = true;
    int kept = 0;
    while (kept < 200 && ok) {
      Eigen::VectorXd x(3);
      for (int i = 0; i < 3; ++i) x(i) = -1.0 + 2.0 * u01(rng);
      if (!eroded.contains(x, 0.0)) continue;
      ++kept;
      for (int d = 0; d < 20 && ok; ++d) {
        Eigen::VectorXd dir(3);
        for (int i = 0; i < 3; ++i) dir(i) = n01(rng);
        dir.normalize();
        ok = box.contains(x + r * dir, 1e-9);
      }
    }
    report("pontryagin erosion duality sampling", ok);
  }

  {  // FxT domain/time formulas
    const FxtParams p = derive_params(2.0, 0.5, 0.5, 0.2, 0.005, 0.6);
    bool ok = fxt_doa(p, 0.99).whole_space && !fxt_doa(p, 1.0).whole_space;
    double prev = std::abs(*fxt_doa(p, 1.0).level);
    for (int i = 1; i <= 1000 && ok; ++i) {
      const double cur = std::abs(*fxt_doa(p, 1.0 + 9.0 * i / 1000.0).level);
      ok = cur < prev;
      prev = cur;
    }
    ok = ok && fxt_time(p, 0.2) <= p.T + 1e-12 && fxt_time(p, 0.8) <= p.T + 1e-12;
    ok = ok && check_eq20_consistency(p) && !eq20_holds_at(p, p.r_bar * 1.5);
    report("fxt domain and settling-time formulas", ok);
  }

  {  // scalar fixed-time reach, closed loop
    const FxtParams p = derive_params(2.0, 0.5, 0.5, 0.2, 0.005, 0.6);
    const SingleIntegratorPlant plant = single_integrator(1);
    const Polytope bounds = symmetric_box_polytope(Eigen::VectorXd::Constant(1, 25.0));
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    bool ok = true;
    for (int trial = 0; trial < 10 && ok; ++trial) {
      Eigen::VectorXd x = Eigen::VectorXd::Constant(1, u(rng));
      const BarrierContext ctx{Eigen::VectorXd::Zero(1), 0};
      for (int tick = 0; tick < 400; ++tick) {
        const LowLevelOutput out =
            low_level_policy(x, Eigen::VectorXd::Zero(1), ctx, p, plant, bounds);
        if (out.status != QpStatus::Optimal) {
          ok = false;
          break;
        }
        x = rk4_step(plant, x, out.u_l, 1.0 / 2000.0);
      }
      ok = ok && barrier(x, {Eigen::VectorXd::Zero(1), 0}, p).h >= -1e-6;
    }
    report("scalar integrator fixed-time reach", ok);
  }

  std::printf("selftest: %d failure(s)\n", failures);
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-rate MPC + fixed-time barrier QP simulator"};
  std::string config_path, out_dir = ".", mode = "run";
  std::vector<std::string> overrides;
  long long seed = -1;
  app.add_option("--config", config_path, "scenario config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--mode", mode, "run | compare | verify | selftest")
      ->check(CLI::IsMember({"run", "compare", "verify", "selftest"}));
  app.add_option("--set", overrides, "override config entries, key=value");
  app.add_option("--seed", seed, "override [sim] seed");
  CLI11_PARSE(app, argc, argv);

  if (mode == "selftest") return mode_selftest();

  if (config_path.empty()) {
    std::fprintf(stderr, "error: --config is required for mode '%s'\n", mode.c_str());
    return 1;
  }

  try {
    fxtmr::ConfigMap cfg_map = fxtmr::ConfigMap::parse_file(config_path);
    for (const std::string& kv : overrides) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
        return 1;
      }
      cfg_map.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    fxtmr::ScenarioConfig cfg = fxtmr::scenario_from_config(cfg_map);
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);

    const std::filesystem::path out(out_dir);
    if (mode == "run") return mode_run(cfg, out);
    if (mode == "compare") return mode_compare(cfg, out);
    return mode_verify(cfg, out);
  } catch (const fxtmr::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
