#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fxtmr/geometry.hpp"
#include "fxtmr/qp.hpp"

namespace fxtmr {

/// Terminal constraint: the origin (encoded as equalities) or a polytope
/// with an explicit vertex list (needed by the invariance check).
struct TerminalSet {
  enum class Kind { Origin, Poly };
  Kind kind = Kind::Origin;
  std::optional<Polytope> poly;
  std::vector<Eigen::VectorXd> vertices;

  static TerminalSet origin() { return {}; }

  static TerminalSet from_box(const Box& box) {
    TerminalSet t;
    t.kind = Kind::Poly;
    t.poly = box_polytope(box);
    const int n = box.dim();
    for (int mask = 0; mask < (1 << n); ++mask) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = (mask >> i) & 1 ? box.hi(i) : box.lo(i);
      t.vertices.push_back(std::move(v));
    }
    return t;
  }
};

/// Inner approximation used for the initial-coupling ball constraint:
/// the l1 cross-polytope ||z0 - x||_1 <= c (full radius along an axis) or
/// the axis-aligned box |z0 - x|_inf <= c/sqrt(n).
enum class CouplingForm { L1, Box };

struct MpcConfig {
  int N;
  Eigen::MatrixXd Q, R, Qf;
  Polytope XT;
  double c, d;
  Polytope Um;
  TerminalSet XF;
  DiscreteLtiModel model;
  CouplingForm coupling;
  Polytope xt_eroded;  // XT (-) Ball(c), computed once at construction

  MpcConfig(int N_, Eigen::MatrixXd Q_, Eigen::MatrixXd R_, Eigen::MatrixXd Qf_, Polytope XT_,
            double c_, double d_, Polytope Um_, TerminalSet XF_, DiscreteLtiModel model_,
            CouplingForm coupling_ = CouplingForm::L1, const SolverSettings& settings = {})
      : N(N_),
        Q(std::move(Q_)),
        R(std::move(R_)),
        Qf(std::move(Qf_)),
        XT(std::move(XT_)),
        c(c_),
        d(d_),
        Um(std::move(Um_)),
        XF(std::move(XF_)),
        model(std::move(model_)),
        coupling(coupling_),
        xt_eroded(polytope_erode_ball(XT, c_, settings)) {
    const int nx = model.nx();
    const int nu = model.nu();
    if (N < 1) throw std::invalid_argument("MpcConfig: horizon must be >= 1");
    if (!(c > 0.0 && c < d)) throw std::invalid_argument("MpcConfig: requires 0 < c < d");
    if (XT.dim() != nx || Um.dim() != nu)
      throw std::invalid_argument("MpcConfig: set dimensions do not match the model");
    if (coupling == CouplingForm::L1 && nx > 12)
      throw std::invalid_argument("MpcConfig: l1 coupling facets impractical beyond 12 states");
    auto check_psd = [](const Eigen::MatrixXd& M, int dim, const char* name) {
      if (M.rows() != dim || M.cols() != dim)
        throw std::invalid_argument(std::string("MpcConfig: ") + name + " has wrong size");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()),
                                                        Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, M.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string("MpcConfig: ") + name + " is not PSD");
    };
    check_psd(Q, nx, "Q");
    check_psd(Qf, nx, "Qf");
    check_psd(R, nu, "R");
    if (XF.kind == TerminalSet::Kind::Poly && (!XF.poly || XF.poly->dim() != nx))
      throw std::invalid_argument("MpcConfig: terminal polytope dimension mismatch");
  }

  int nx() const { return model.nx(); }
  int nu() const { return model.nu(); }
  int num_vars() const { return (N + 1) * nx() + N * nu(); }
  int z_offset(int k) const { return k * nx(); }
  int v_offset(int k) const { return (N + 1) * nx() + k * nu(); }
};

/// Finite-time optimal control problem (the planner QP) at state x_iT.
/// Decision variables [z_0..z_N, v_0..v_{N-1}]; cost sum z'Qz + v'Rv +
/// z_N'Qf z_N; dynamics equalities; per-step eroded state set, input set,
/// rate box |z_{k+1}-z_k|_inf <= (d-c)/sqrt(n); coupling polytope on
/// z_0 - x_iT; terminal set on z_N.
inline QpProblem build_ftocp(const Eigen::VectorXd& x_iT, const MpcConfig& cfg) {
  const int nx = cfg.nx();
  const int nu = cfg.nu();
  const int N = cfg.N;
  if (x_iT.size() != nx) throw std::invalid_argument("build_ftocp: state dimension mismatch");
  if (!x_iT.allFinite()) throw std::invalid_argument("build_ftocp: non-finite state");

  const int nv = cfg.num_vars();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nv, nv);
  for (int k = 0; k < N; ++k)
    P.block(cfg.z_offset(k), cfg.z_offset(k), nx, nx) = 2.0 * cfg.Q;
  P.block(cfg.z_offset(N), cfg.z_offset(N), nx, nx) = 2.0 * cfg.Qf;
  for (int k = 0; k < N; ++k)
    P.block(cfg.v_offset(k), cfg.v_offset(k), nu, nu) = 2.0 * cfg.R;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);

  const bool terminal_eq = cfg.XF.kind == TerminalSet::Kind::Origin;
  const int me = N * nx + (terminal_eq ? nx : 0);
  Eigen::MatrixXd Aeq = Eigen::MatrixXd::Zero(me, nv);
  Eigen::VectorXd beq = Eigen::VectorXd::Zero(me);
  for (int k = 0; k < N; ++k) {
    Aeq.block(k * nx, cfg.z_offset(k + 1), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    Aeq.block(k * nx, cfg.z_offset(k), nx, nx) = -cfg.model.Abar;
    Aeq.block(k * nx, cfg.v_offset(k), nx, nu) = -cfg.model.Bbar;
  }
  if (terminal_eq)
    Aeq.block(N * nx, cfg.z_offset(N), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);

  const int m_state = cfg.xt_eroded.num_rows();
  const int m_input = cfg.Um.num_rows();
  const int m_coupling = cfg.coupling == CouplingForm::L1 ? (1 << nx) : 2 * nx;
  const int m_terminal = terminal_eq ? 0 : cfg.XF.poly->num_rows();
  const int mi = N * m_state + N * m_input + N * 2 * nx + m_coupling + m_terminal;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(mi, nv);
  Eigen::VectorXd h(mi);
  int row = 0;

  for (int k = 0; k < N; ++k) {
    G.block(row, cfg.z_offset(k), m_state, nx) = cfg.xt_eroded.A;
    h.segment(row, m_state) = cfg.xt_eroded.b;
    row += m_state;
  }
  for (int k = 0; k < N; ++k) {
    G.block(row, cfg.v_offset(k), m_input, nu) = cfg.Um.A;
    h.segment(row, m_input) = cfg.Um.b;
    row += m_input;
  }
  const double rate_half = (cfg.d - cfg.c) / std::sqrt(static_cast<double>(nx));
  for (int k = 0; k < N; ++k) {
    G.block(row, cfg.z_offset(k + 1), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    G.block(row, cfg.z_offset(k), nx, nx) = -Eigen::MatrixXd::Identity(nx, nx);
    h.segment(row, nx).setConstant(rate_half);
    row += nx;
    G.block(row, cfg.z_offset(k + 1), nx, nx) = -Eigen::MatrixXd::Identity(nx, nx);
    G.block(row, cfg.z_offset(k), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    h.segment(row, nx).setConstant(rate_half);
    row += nx;
  }
  if (cfg.coupling == CouplingForm::L1) {
    for (int mask = 0; mask < (1 << nx); ++mask) {
      for (int i = 0; i < nx; ++i) G(row, cfg.z_offset(0) + i) = (mask >> i) & 1 ? 1.0 : -1.0;
      h(row) = cfg.c + G.row(row).segment(cfg.z_offset(0), nx).dot(x_iT);
      ++row;
    }
  } else {
    const double half = cfg.c / std::sqrt(static_cast<double>(nx));
    G.block(row, cfg.z_offset(0), nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
    h.segment(row, nx) = x_iT.array() + half;
    row += nx;
    G.block(row, cfg.z_offset(0), nx, nx) = -Eigen::MatrixXd::Identity(nx, nx);
    h.segment(row, nx) = -(x_iT.array() - half);
    row += nx;
  }
  if (!terminal_eq) {
    G.block(row, cfg.z_offset(N), m_terminal, nx) = cfg.XF.poly->A;
    h.segment(row, m_terminal) = cfg.XF.poly->b;
    row += m_terminal;
  }

  return QpProblem(std::move(P), std::move(q), std::move(G), std::move(h), std::move(Aeq),
                   std::move(beq));
}

struct MpcSolution {
  std::vector<Eigen::VectorXd> z_seq;  // N+1 states
  std::vector<Eigen::VectorXd> v_seq;  // N inputs
  bool feasible = false;
  QpStatus status = QpStatus::MaxIterations;
  double objective = 0.0;
  QpSolution raw;  // for warm starting the next solve
};

inline MpcSolution solve_ftocp(const Eigen::VectorXd& x_iT, const MpcConfig& cfg,
                               const SolverSettings& settings = {}) {
  const QpProblem qp = build_ftocp(x_iT, cfg);
  const QpSolution sol = solve_qp(qp, settings);
  MpcSolution out;
  out.status = sol.status;
  out.raw = sol;
  if (sol.status != QpStatus::Optimal) return out;
  out.feasible = true;
  out.z_seq.reserve(cfg.N + 1);
  out.v_seq.reserve(cfg.N);
  for (int k = 0; k <= cfg.N; ++k)
    out.z_seq.push_back(sol.x.segment(cfg.z_offset(k), cfg.nx()));
  for (int k = 0; k < cfg.N; ++k)
    out.v_seq.push_back(sol.x.segment(cfg.v_offset(k), cfg.nu()));
  double obj = out.z_seq[cfg.N].dot(cfg.Qf * out.z_seq[cfg.N]);
  for (int k = 0; k < cfg.N; ++k)
    obj += out.z_seq[k].dot(cfg.Q * out.z_seq[k]) + out.v_seq[k].dot(cfg.R * out.v_seq[k]);
  out.objective = obj;
  return out;
}

/// Reset map for the reference model: the optimized initial state z*_{i|i}.
inline Eigen::VectorXd reset_map(const MpcSolution& sol) {
  if (!sol.feasible) throw std::logic_error("reset_map: called on an infeasible solution");
  return sol.z_seq.front();
}

struct Assumption3Result {
  bool invariant = false;
  bool rate_ok = false;
};

/// Terminal-set conditions: XF invariant under z -> Abar z and
/// ||v - Abar v|| <= d - c on its vertices.
inline Assumption3Result check_assumption3(const MpcConfig& cfg, double tol = 1e-9) {
  if (cfg.XF.kind == TerminalSet::Kind::Origin) return {true, true};
  if (cfg.XF.vertices.empty())
    throw std::invalid_argument("check_assumption3: terminal set has no vertex list");
  Assumption3Result res{true, true};
  for (const Eigen::VectorXd& v : cfg.XF.vertices) {
    if (!cfg.XF.poly->contains(cfg.model.Abar * v, tol)) res.invariant = false;
    if ((v - cfg.model.Abar * v).norm() > cfg.d - cfg.c + tol) res.rate_ok = false;
  }
  return res;
}

struct SequenceCheck {
  bool ok = true;
  double worst_violation = 0.0;
  std::string first_failure;
};

/// Validate state/input sequences against the FTOCP constraints in their
/// exact form: dynamics and polytope rows as built, rate and coupling as
/// the Euclidean balls they approximate (the built rows imply these).
inline SequenceCheck check_sequences(const std::vector<Eigen::VectorXd>& z_seq,
                                     const std::vector<Eigen::VectorXd>& v_seq,
                                     const Eigen::VectorXd& x_iT, const MpcConfig& cfg,
                                     double tol = 1e-8) {
  SequenceCheck res;
  auto fail = [&](const std::string& what, double viol) {
    if (viol > tol) {
      res.ok = false;
      if (res.first_failure.empty()) res.first_failure = what;
    }
    res.worst_violation = std::max(res.worst_violation, viol);
  };
  if (z_seq.size() != static_cast<size_t>(cfg.N + 1) || v_seq.size() != static_cast<size_t>(cfg.N))
    throw std::invalid_argument("check_sequences: sequence lengths do not match the horizon");

  for (int k = 0; k < cfg.N; ++k) {
    fail("dynamics@" + std::to_string(k),
         (z_seq[k + 1] - cfg.model.Abar * z_seq[k] - cfg.model.Bbar * v_seq[k])
             .cwiseAbs()
             .maxCoeff());
    fail("state_set@" + std::to_string(k), std::max(0.0, cfg.xt_eroded.violation(z_seq[k])));
    fail("input_set@" + std::to_string(k), std::max(0.0, cfg.Um.violation(v_seq[k])));
    fail("rate@" + std::to_string(k),
         std::max(0.0, (z_seq[k + 1] - z_seq[k]).norm() - (cfg.d - cfg.c)));
  }
  fail("coupling", std::max(0.0, (z_seq[0] - x_iT).norm() - cfg.c));
  if (cfg.XF.kind == TerminalSet::Kind::Origin)
    fail("terminal", z_seq[cfg.N].cwiseAbs().maxCoeff());
  else
    fail("terminal", std::max(0.0, cfg.XF.poly->violation(z_seq[cfg.N])));
  return res;
}

}  // namespace fxtmr
