#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fxtmr/mpc.hpp"
#include "fxtmr/plant.hpp"

using namespace fxtmr;
using Catch::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<int>(v.size()));
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

// double integrator planner setup used across the tests
MpcConfig di_config(int N = 8, CouplingForm coupling = CouplingForm::L1) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const DiscreteLtiModel model = zoh_discretize(A, B, 0.5);
  const Polytope xt = box_polytope(Box(vec({-5, -5}), vec({5, 5})));
  const Polytope um = symmetric_box_polytope(Eigen::VectorXd::Constant(1, 3.0));
  return MpcConfig(N, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1),
                   Eigen::MatrixXd::Identity(2, 2), xt, 0.05, 0.5, um, TerminalSet::origin(),
                   model, coupling);
}

}  // namespace

TEST_CASE("build_ftocp: origin is a fixed point with zero objective") {
  const MpcConfig cfg = di_config();
  const MpcSolution sol = solve_ftocp(Eigen::VectorXd::Zero(2), cfg);
  REQUIRE(sol.feasible);
  CHECK(sol.objective == Approx(0.0).margin(1e-9));
  for (const auto& z : sol.z_seq) CHECK(z.cwiseAbs().maxCoeff() < 1e-6);
  for (const auto& v : sol.v_seq) CHECK(v.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(reset_map(sol).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("build_ftocp: N = 1 structural row count") {
  const MpcConfig cfg = di_config(1);
  const QpProblem qp = build_ftocp(vec({0.1, 0.0}), cfg);
  // variables: z0, z1 (2 each) + v0 (1)
  CHECK(qp.num_vars() == 5);
  // equalities: dynamics (2) + terminal z1 = 0 (2)
  CHECK(qp.num_eq() == 4);
  // inequalities: eroded XT on z0 (4) + Um on v0 (2) + rate box (4)
  //             + l1 coupling facets on z0 (2^2)
  CHECK(qp.num_ineq() == 4 + 2 + 4 + 4);

  const MpcConfig cfg_box = di_config(1, CouplingForm::Box);
  CHECK(build_ftocp(vec({0.1, 0.0}), cfg_box).num_ineq() == 4 + 2 + 4 + 4);
}

TEST_CASE("solve_ftocp: double integrator reaches the origin set") {
  const MpcConfig cfg = di_config();
  const MpcSolution sol = solve_ftocp(vec({1.0, 0.0}), cfg);
  REQUIRE(sol.feasible);
  CHECK(sol.z_seq.back().cwiseAbs().maxCoeff() < 1e-7);
  // planner output satisfies the eroded-set rows tightly
  for (int k = 0; k < cfg.N; ++k)
    CHECK(cfg.xt_eroded.violation(sol.z_seq[k]) <= 1e-8);
  // coupling: reset state within the c-ball of x (l1 inner set implies it)
  CHECK((reset_map(sol) - vec({1.0, 0.0})).norm() <= cfg.c + 1e-9);
  // and the full sequence passes the exact-form checker
  const SequenceCheck chk = check_sequences(sol.z_seq, sol.v_seq, vec({1.0, 0.0}), cfg);
  INFO(chk.first_failure);
  CHECK(chk.ok);
}

TEST_CASE("solve_ftocp: far initial coupling is certified infeasible") {
  const MpcConfig cfg = di_config();
  // dist(x, XT (-) C) = 5 - 0.05... far beyond c
  const MpcSolution sol = solve_ftocp(vec({7.0, 0.0}), cfg);
  CHECK_FALSE(sol.feasible);
  CHECK(sol.status == QpStatus::Infeasible);
  CHECK_THROWS_AS(reset_map(sol), std::logic_error);
}

TEST_CASE("solve_ftocp: deterministic across repeat solves") {
  const MpcConfig cfg = di_config();
  const MpcSolution a = solve_ftocp(vec({0.8, -0.2}), cfg);
  const MpcSolution b = solve_ftocp(vec({0.8, -0.2}), cfg);
  REQUIRE(a.feasible);
  REQUIRE(b.feasible);
  for (int k = 0; k <= cfg.N; ++k)
    CHECK((a.z_seq[k] - b.z_seq[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MpcConfig: validation errors") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const DiscreteLtiModel model = zoh_discretize(A, B, 0.5);
  const Polytope xt = box_polytope(Box(vec({-5, -5}), vec({5, 5})));
  const Polytope um = symmetric_box_polytope(Eigen::VectorXd::Constant(1, 3.0));
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd I1 = Eigen::MatrixXd::Identity(1, 1);

  // c >= d
  CHECK_THROWS_AS(MpcConfig(8, I2, I1, I2, xt, 0.6, 0.5, um, TerminalSet::origin(), model),
                  std::invalid_argument);
  // erosion empties the state set
  const Polytope tiny = box_polytope(Box(vec({-0.01, -0.01}), vec({0.01, 0.01})));
  CHECK_THROWS_AS(MpcConfig(8, I2, I1, I2, tiny, 0.05, 0.5, um, TerminalSet::origin(), model),
                  std::runtime_error);
  // indefinite weight
  Eigen::MatrixXd bad = I2;
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(MpcConfig(8, bad, I1, I2, xt, 0.05, 0.5, um, TerminalSet::origin(), model),
                  std::invalid_argument);
}

TEST_CASE("check_assumption3: origin and box terminal sets") {
  const MpcConfig cfg = di_config();
  const Assumption3Result origin_res = check_assumption3(cfg);
  CHECK(origin_res.invariant);
  CHECK(origin_res.rate_ok);

  // contractive dynamics keep a box invariant
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  DiscreteLtiModel model = zoh_discretize(A, B, 0.5);
  model.Abar = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  const Polytope xt = box_polytope(Box(vec({-5, -5}), vec({5, 5})));
  const Polytope um = symmetric_box_polytope(Eigen::VectorXd::Constant(1, 3.0));
  const TerminalSet xf = TerminalSet::from_box(Box(vec({-1, -1}), vec({1, 1})));
  const MpcConfig contractive(4, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1),
                              Eigen::MatrixXd::Identity(2, 2), xt, 0.05, 1.1, um, xf, model);
  const Assumption3Result res = check_assumption3(contractive);
  CHECK(res.invariant);
  CHECK(res.rate_ok);  // max ||v - 0.5 v|| = 0.5*sqrt(2) < d - c = 1.05

  model.Abar = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  const MpcConfig expanding(4, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(1, 1),
                            Eigen::MatrixXd::Identity(2, 2), xt, 0.05, 1.1, um, xf, model);
  CHECK_FALSE(check_assumption3(expanding).invariant);
}

TEST_CASE("shift-sequence feasibility mirrors the recursive-feasibility proof") {
  const MpcConfig cfg = di_config(8);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int tested = 0;
  while (tested < 20) {
    Eigen::VectorXd x(2);
    x << 2.0 * n01(rng), 0.5 * n01(rng);
    const MpcSolution sol = solve_ftocp(x, cfg);
    if (!sol.feasible) continue;
    ++tested;
    // synthetic next state anywhere in the c-ball around z*_{1|0}
    Eigen::VectorXd dir(2);
    dir << n01(rng), n01(rng);
    dir.normalize();
    const Eigen::VectorXd x_next = sol.z_seq[1] + cfg.c * u01(rng) * dir;

    std::vector<Eigen::VectorXd> z_shift(sol.z_seq.begin() + 1, sol.z_seq.end());
    z_shift.push_back(cfg.model.Abar * sol.z_seq.back());
    std::vector<Eigen::VectorXd> v_shift(sol.v_seq.begin() + 1, sol.v_seq.end());
    v_shift.push_back(Eigen::VectorXd::Zero(1));

    const SequenceCheck chk = check_sequences(z_shift, v_shift, x_next, cfg);
    INFO(chk.first_failure << " viol=" << chk.worst_violation);
    REQUIRE(chk.ok);
  }
}
