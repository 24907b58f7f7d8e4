#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fxtmr/qp.hpp"
#include "support/qp_oracle.hpp"
#include "support/qp_random.hpp"

using namespace fxtmr;
using Catch::Approx;

TEST_CASE("solve_qp: single active constraint") {
  // min 1/2 u^2  s.t.  u >= 1
  Eigen::MatrixXd P(1, 1), G(1, 1);
  P << 1;
  G << -1;
  Eigen::VectorXd q(1), h(1);
  q << 0;
  h << -1;
  const QpSolution sol = solve_qp(QpProblem(P, q, G, h));
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x(0) == Approx(1.0).margin(1e-7));
  CHECK(sol.ineq_duals(0) == Approx(1.0).margin(1e-6));
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("solve_qp: symmetric equality split") {
  // min 1/2 ||x||^2  s.t.  x1 + x2 = 1
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd Aeq(1, 2);
  Aeq << 1, 1;
  Eigen::VectorXd beq(1);
  beq << 1;
  const QpSolution sol = solve_qp(QpProblem(P, q, Eigen::MatrixXd(), Eigen::VectorXd(), Aeq, beq));
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x(0) == Approx(0.5).margin(1e-9));
  CHECK(sol.x(1) == Approx(0.5).margin(1e-9));
}

TEST_CASE("solve_qp matches the active-set enumeration oracle") {
  std::mt19937_64 rng(2024);
  SolverSettings settings;
  settings.tolerance = 1e-10;
  for (int trial = 0; trial < 60; ++trial) {
    const QpProblem p = fxtmr_test::make_random_qp(rng);
    const QpSolution sol = solve_qp(p, settings);
    const fxtmr_test::OracleResult oracle = fxtmr_test::oracle_solve(p);
    REQUIRE(oracle.feasible);
    REQUIRE(sol.status == QpStatus::Optimal);
    REQUIRE((sol.x - oracle.x).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(std::abs(p.objective(sol.x) - oracle.objective) < 1e-8);
    // KKT stationarity invariant at every Optimal return
    Eigen::VectorXd stat = p.P * sol.x + p.q;
    if (p.num_ineq() > 0) stat += p.G.transpose() * sol.ineq_duals;
    if (p.num_eq() > 0) stat += p.Aeq.transpose() * sol.eq_duals;
    REQUIRE(stat.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("solve_qp: infeasible problems are certified") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const QpProblem p = fxtmr_test::make_infeasible_qp(rng);
    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::Infeasible);
    // Farkas certificate: lambda >= 0, G'lambda + Aeq'nu ~ 0, h'lambda + beq'nu < 0
    REQUIRE(sol.cert_ineq.size() == p.num_ineq());
    REQUIRE(sol.cert_ineq.minCoeff() >= -1e-12);
    Eigen::VectorXd combo = p.G.transpose() * sol.cert_ineq;
    double off = p.h.dot(sol.cert_ineq);
    if (p.num_eq() > 0 && sol.cert_eq.size() == p.num_eq()) {
      combo += p.Aeq.transpose() * sol.cert_eq;
      off += p.beq.dot(sol.cert_eq);
    }
    REQUIRE(combo.cwiseAbs().maxCoeff() < 1e-5);
    REQUIRE(off < 0.0);
  }
}

TEST_CASE("check_feasibility: trivial cases") {
  Eigen::MatrixXd G(2, 1);
  G << -1, 1;  // x >= 1, x <= 0
  Eigen::VectorXd h(2);
  h << -1, 0;
  const FeasibilityResult bad = check_feasibility(G, h, Eigen::MatrixXd(), Eigen::VectorXd());
  CHECK_FALSE(bad.feasible);
  CHECK_FALSE(bad.indeterminate);

  h << 0, 1;  // x >= 0, x <= 1
  const FeasibilityResult good = check_feasibility(G, h, Eigen::MatrixXd(), Eigen::VectorXd());
  REQUIRE(good.feasible);
  REQUIRE(good.witness.has_value());
  CHECK((*good.witness)(0) >= -1e-8);
  CHECK((*good.witness)(0) <= 1.0 + 1e-8);
}

TEST_CASE("check_feasibility: eroded-to-empty box rows are infeasible") {
  // box half-width 0.1 shrunk by r = 0.25 gives x <= -0.15, -x <= -0.15
  Eigen::MatrixXd G(2, 1);
  G << 1, -1;
  Eigen::VectorXd h(2);
  h << -0.15, -0.15;
  const FeasibilityResult r = check_feasibility(G, h, Eigen::MatrixXd(), Eigen::VectorXd());
  CHECK_FALSE(r.feasible);
  CHECK(r.max_violation > 0.1);
}

TEST_CASE("check_feasibility: inconsistent equalities give a certificate") {
  Eigen::MatrixXd Aeq(2, 2);
  Aeq << 1, 1, 1, 1;
  Eigen::VectorXd beq(2);
  beq << 1, 2;
  const FeasibilityResult r =
      check_feasibility(Eigen::MatrixXd(), Eigen::VectorXd(), Aeq, beq);
  REQUIRE_FALSE(r.feasible);
  REQUIRE(r.cert_eq.size() == 2);
  CHECK((Aeq.transpose() * r.cert_eq).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(beq.dot(r.cert_eq)) > 1e-6);
}

TEST_CASE("warm-started resolve takes no more iterations than cold start") {
  std::mt19937_64 rng(5);
  int warm_total = 0, cold_total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = fxtmr_test::make_random_qp(rng, 8, 12, 3);
    SolverSettings cold;
    const QpSolution s1 = solve_qp(p, cold);
    REQUIRE(s1.status == QpStatus::Optimal);
    SolverSettings warm;
    warm.warm_start = s1;
    const QpSolution s2 = solve_qp(p, warm);
    REQUIRE(s2.status == QpStatus::Optimal);
    REQUIRE(s2.iterations <= s1.iterations);
    warm_total += s2.iterations;
    cold_total += s1.iterations;
  }
  CHECK(warm_total <= cold_total);
}

TEST_CASE("optimal objective is within tolerance of any feasible point") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const QpProblem p = fxtmr_test::make_random_qp(rng, 6, 12, 0);
    const QpSolution sol = solve_qp(p, SolverSettings{1e-10, 10000, std::nullopt});
    REQUIRE(sol.status == QpStatus::Optimal);
    const double fstar = p.objective(sol.x);

    // hit-and-run samples of the feasible set, started at a strict interior point
    const FeasibilityResult feas =
        check_feasibility(p.G, p.h, Eigen::MatrixXd(), Eigen::VectorXd());
    REQUIRE(feas.feasible);
    Eigen::VectorXd x = *feas.witness;
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd dir(p.num_vars());
      for (int i = 0; i < dir.size(); ++i) dir(i) = n01(rng);
      dir.normalize();
      // max step in +/- dir keeping G(x+t d) <= h
      double t_lo = -1e9, t_hi = 1e9;
      const Eigen::VectorXd gd = p.G * dir;
      const Eigen::VectorXd slack = p.h - p.G * x;
      for (int i = 0; i < gd.size(); ++i) {
        if (gd(i) > 1e-12) t_hi = std::min(t_hi, slack(i) / gd(i));
        if (gd(i) < -1e-12) t_lo = std::max(t_lo, slack(i) / gd(i));
      }
      if (t_hi < t_lo) continue;
      x += (t_lo + (t_hi - t_lo) * u01(rng)) * dir;
      REQUIRE(fstar <= p.objective(x) + 1e-8);
    }
  }
}

TEST_CASE("iteration budget exhaustion reports MaxIterations, not Infeasible") {
  std::mt19937_64 rng(31);
  const QpProblem p = fxtmr_test::make_random_qp(rng, 8, 15, 3);
  SolverSettings s;
  s.max_iterations = 1;
  const QpSolution sol = solve_qp(p, s);
  CHECK(sol.status == QpStatus::MaxIterations);
}

TEST_CASE("solver is deterministic") {
  std::mt19937_64 rng(123);
  const QpProblem p = fxtmr_test::make_random_qp(rng);
  const QpSolution a = solve_qp(p);
  const QpSolution b = solve_qp(p);
  REQUIRE(a.status == b.status);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
}
