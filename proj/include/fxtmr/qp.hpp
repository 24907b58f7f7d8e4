#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fxtmr {

enum class QpStatus { Optimal, Infeasible, MaxIterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    default: return "max_iterations";
  }
}

/// Canonical convex QP
///   min 1/2 x'Px + q'x   s.t.  Gx <= h,  Aeq x = beq.
/// P is symmetrized on construction; inequality/equality blocks may be empty.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;

  QpProblem(Eigen::MatrixXd P_, Eigen::VectorXd q_, Eigen::MatrixXd G_, Eigen::VectorXd h_,
            Eigen::MatrixXd Aeq_ = Eigen::MatrixXd(), Eigen::VectorXd beq_ = Eigen::VectorXd())
      : P(std::move(P_)),
        q(std::move(q_)),
        G(std::move(G_)),
        h(std::move(h_)),
        Aeq(std::move(Aeq_)),
        beq(std::move(beq_)) {
    const int n = static_cast<int>(q.size());
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("QpProblem: P must be n x n");
    if (G.size() > 0 && G.cols() != n) throw std::invalid_argument("QpProblem: G column mismatch");
    if (G.rows() != h.size()) throw std::invalid_argument("QpProblem: G/h row mismatch");
    if (Aeq.size() > 0 && Aeq.cols() != n)
      throw std::invalid_argument("QpProblem: Aeq column mismatch");
    if (Aeq.rows() != beq.size()) throw std::invalid_argument("QpProblem: Aeq/beq row mismatch");
    if (!P.allFinite() || !q.allFinite() || (G.size() > 0 && !G.allFinite()) ||
        (h.size() > 0 && !h.allFinite()) || (Aeq.size() > 0 && !Aeq.allFinite()) ||
        (beq.size() > 0 && !beq.allFinite()))
      throw std::invalid_argument("QpProblem: non-finite data");
    P = ((P + P.transpose()) / 2.0).eval();
#ifndef NDEBUG
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
      const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
      if (es.eigenvalues().minCoeff() < -1e-9 * scale)
        throw std::invalid_argument("QpProblem: P is not positive semidefinite");
    }
#endif
  }

  int num_vars() const { return static_cast<int>(q.size()); }
  int num_ineq() const { return static_cast<int>(h.size()); }
  int num_eq() const { return static_cast<int>(beq.size()); }

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd ineq_duals;  // >= 0
  Eigen::VectorXd eq_duals;
  QpStatus status = QpStatus::MaxIterations;
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  // Farkas certificate when status == Infeasible:
  //   cert_ineq >= 0, G'cert_ineq + Aeq'cert_eq ~= 0, h'cert_ineq + beq'cert_eq < 0.
  Eigen::VectorXd cert_ineq;
  Eigen::VectorXd cert_eq;
};

struct SolverSettings {
  double tolerance = 1e-8;
  int max_iterations = 10000;
  std::optional<QpSolution> warm_start;
};

struct FeasibilityResult {
  bool feasible = false;
  bool indeterminate = false;
  std::optional<Eigen::VectorXd> witness;
  double max_violation = std::numeric_limits<double>::infinity();
  Eigen::VectorXd cert_ineq;
  Eigen::VectorXd cert_eq;
};

namespace detail {

inline double kkt_residual_at(const QpProblem& p, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
  Eigen::VectorXd stat = p.P * x + p.q;
  if (p.num_ineq() > 0) stat += p.G.transpose() * z;
  if (p.num_eq() > 0) stat += p.Aeq.transpose() * y;
  double res = stat.cwiseAbs().maxCoeff();
  if (p.num_eq() > 0) res = std::max(res, (p.Aeq * x - p.beq).cwiseAbs().maxCoeff());
  if (p.num_ineq() > 0) {
    const Eigen::VectorXd slack = p.h - p.G * x;
    res = std::max(res, std::max(0.0, -slack.minCoeff()));       // primal feasibility
    res = std::max(res, std::max(0.0, -z.minCoeff()));           // dual feasibility
    res = std::max(res, (z.array() * slack.array()).abs().maxCoeff());  // complementarity
  }
  return res;
}

// Crossover polish: treat the identified active set as equalities, solve the
// resulting KKT system directly, and accept only if the true KKT residual
// passes. Gives machine-precision solutions where the scaled IPM endgame
// cannot.
inline bool polish_active_set(const QpProblem& p, const std::vector<int>& active_in,
                              const SolverSettings& settings, QpSolution& sol) {
  const int n = p.num_vars();
  const int me = p.num_eq();

  // Keep only active rows independent of the equalities and of each other,
  // otherwise the KKT system is singular and the dual split is arbitrary.
  std::vector<int> active;
  {
    Eigen::MatrixXd basis(n, me + static_cast<int>(active_in.size()));
    int cols = 0;
    if (me > 0) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(p.Aeq.transpose());
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, std::min(n, me));
      basis.leftCols(q.cols()) = q;
      cols = static_cast<int>(q.cols());
    }
    for (int idx : active_in) {
      Eigen::VectorXd g = p.G.row(idx).transpose();
      const double norm0 = g.norm();
      if (cols > 0) g -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * g);
      if (g.norm() > 1e-9 * std::max(1.0, norm0)) {
        active.push_back(idx);
        if (cols < basis.cols()) {
          basis.col(cols) = g / g.norm();
          ++cols;
        }
      }
    }
  }
  const int na = static_cast<int>(active.size());
  const int dim = n + me + na;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  K.topLeftCorner(n, n) = p.P;
  rhs.head(n) = -p.q;
  if (me > 0) {
    K.block(0, n, n, me) = p.Aeq.transpose();
    K.block(n, 0, me, n) = p.Aeq;
    rhs.segment(n, me) = p.beq;
  }
  for (int j = 0; j < na; ++j) {
    K.block(0, n + me + j, n, 1) = p.G.row(active[j]).transpose();
    K.block(n + me + j, 0, 1, n) = p.G.row(active[j]);
    rhs(n + me + j) = p.h(active[j]);
  }
  // Rank-revealing factorization: LP-degenerate active sets make this KKT
  // system singular but consistent, and any solution on the face will do.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  lu.setThreshold(1e-12);
  Eigen::VectorXd sol_vec = lu.solve(rhs);
  for (int pass = 0; pass < 4; ++pass) {
    const Eigen::VectorXd resid = rhs - K * sol_vec;
    if (!resid.allFinite()) return false;
    if (resid.cwiseAbs().maxCoeff() < 1e-16 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
    sol_vec += lu.solve(resid);
  }
  if (!sol_vec.allFinite()) return false;

  const Eigen::VectorXd x = sol_vec.head(n);

  // The primal part is pinned by the KKT system, but at degenerate corners
  // (several dependent facets touching) the dual split is not. Reassign the
  // multipliers over every row that is active at the polished point by
  // nonnegative least squares: solve free-sign, drop the most negative row,
  // repeat. The full candidate set matters; the deflated one may not admit
  // a nonnegative combination.
  std::vector<int> kept;
  if (p.num_ineq() > 0) {
    const Eigen::VectorXd slack = p.h - p.G * x;
    const double gate = 1e-7 * (1.0 + p.h.cwiseAbs().maxCoeff());
    for (int i = 0; i < p.num_ineq(); ++i)
      if (slack(i) <= gate) kept.push_back(i);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p.num_ineq());
  const Eigen::VectorXd target = -(p.P * x + p.q);
  const int max_rounds = static_cast<int>(kept.size()) + 1;
  for (int round = 0; round < max_rounds; ++round) {
    const int nk = static_cast<int>(kept.size());
    Eigen::VectorXd duals;
    if (me + nk > 0) {
      Eigen::MatrixXd M(n, me + nk);
      if (me > 0) M.leftCols(me) = p.Aeq.transpose();
      for (int j = 0; j < nk; ++j) M.col(me + j) = p.G.row(kept[j]).transpose();
      duals = M.completeOrthogonalDecomposition().solve(target);
    }
    if (nk == 0 ||
        duals.tail(nk).minCoeff() >= -1e-9 * (1.0 + duals.cwiseAbs().maxCoeff())) {
      if (me > 0 && duals.size() >= me) y = duals.head(me);
      z.setZero();
      for (int j = 0; j < nk; ++j) z(kept[j]) = std::max(0.0, duals(me + j));
      break;
    }
    int worst = 0;
    for (int j = 1; j < nk; ++j)
      if (duals(me + j) < duals(me + worst)) worst = j;
    kept.erase(kept.begin() + worst);
  }

  const double res = kkt_residual_at(p, x, z, y);
  if (res > settings.tolerance) return false;
  sol.x = std::move(x);
  sol.eq_duals = std::move(y);
  sol.ineq_duals = std::move(z);
  sol.kkt_residual = res;
  sol.status = QpStatus::Optimal;
  return true;
}

// Mehrotra predictor-corrector primal-dual interior point method for the
// inequality-constrained case (mi >= 1). Equality residuals are driven to
// zero from an infeasible start. Returns Optimal or MaxIterations; the
// caller classifies MaxIterations via a phase-1 certificate.
inline QpSolution mehrotra_ipm(const QpProblem& p, const SolverSettings& settings,
                               const Eigen::VectorXd* x_init) {
  const int n = p.num_vars();
  const int mi = p.num_ineq();
  const int me = p.num_eq();

  QpSolution sol;
  Eigen::VectorXd x = (x_init && x_init->size() == n) ? *x_init : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(me);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(mi);
  Eigen::VectorXd s(mi);
  {
    const Eigen::VectorXd r0 = p.G * x - p.h;
    for (int i = 0; i < mi; ++i) s(i) = std::max(1.0, -r0(i));
  }

  const double scale =
      std::max({1.0, p.q.size() ? p.q.cwiseAbs().maxCoeff() : 0.0,
                p.h.size() ? p.h.cwiseAbs().maxCoeff() : 0.0,
                p.beq.size() ? p.beq.cwiseAbs().maxCoeff() : 0.0});
  const double reg = 1e-12 * std::max(1.0, p.P.cwiseAbs().maxCoeff());
  const int max_iter = std::min(settings.max_iterations, 10000);

  Eigen::MatrixXd K(n + me, n + me);
  Eigen::VectorXd rhs(n + me), dxy(n + me);
  double best_pinf = std::numeric_limits<double>::infinity();
  double best_kkt = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x, best_y = y, best_z = z;
  int stall = 0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd rd = p.P * x + p.q + p.G.transpose() * z +
                               (me > 0 ? (p.Aeq.transpose() * y).eval() : Eigen::VectorXd::Zero(n));
    const Eigen::VectorXd rp_in = p.G * x + s - p.h;
    const Eigen::VectorXd rp_eq = me > 0 ? (p.Aeq * x - p.beq).eval() : Eigen::VectorXd();

    sol.kkt_residual = kkt_residual_at(p, x, z, y);
    sol.iterations = iter;
    if (sol.kkt_residual <= settings.tolerance) {
      sol.status = QpStatus::Optimal;
      sol.x = x;
      sol.ineq_duals = z;
      sol.eq_duals = y;
      return sol;
    }
    if (!std::isfinite(sol.kkt_residual) || !x.allFinite() || !s.allFinite() || !z.allFinite())
      break;

    const double mu0 = s.dot(z) / mi;
    if (sol.kkt_residual < best_kkt) {
      best_kkt = sol.kkt_residual;
      best_x = x;
      best_y = y;
      best_z = z;
    }
    // Endgame: the scaled system turns ill-conditioned as mu collapses;
    // crossover to a direct solve on the identified active set instead.
    if (mu0 < 1e-8 * scale || sol.kkt_residual < 1e5 * settings.tolerance) {
      const Eigen::VectorXd slack = p.h - p.G * x;
      std::vector<int> active;
      for (int i = 0; i < mi; ++i)
        if (z(i) > s(i)) active.push_back(i);
      if (polish_active_set(p, active, settings, sol)) return sol;
      active.clear();  // slack-based split as a second guess
      const double slack_gate = 1e-7 * (1.0 + p.h.cwiseAbs().maxCoeff());
      for (int i = 0; i < mi; ++i)
        if (slack(i) < slack_gate) active.push_back(i);
      if (polish_active_set(p, active, settings, sol)) return sol;
    }
    if (mu0 < 1e-14 * scale && sol.kkt_residual > settings.tolerance * 10.0)
      break;  // complementarity at the floor but residuals stuck

    // Stall / divergence guards; classification happens in the caller.
    const double pinf = std::max(rp_in.cwiseAbs().maxCoeff(),
                                 me > 0 ? rp_eq.cwiseAbs().maxCoeff() : 0.0);
    if (pinf < best_pinf * 0.9) {
      best_pinf = pinf;
      stall = 0;
    } else if (++stall > 30 && pinf > 100.0 * settings.tolerance * scale) {
      break;
    }
    if (z.cwiseAbs().maxCoeff() > 1e14 || x.cwiseAbs().maxCoeff() > 1e14) break;

    const Eigen::ArrayXd d = z.array() / s.array();
    K.setZero();
    K.topLeftCorner(n, n) = p.P + p.G.transpose() * d.matrix().asDiagonal() * p.G;
    if (me > 0) {
      K.topRightCorner(n, me) = p.Aeq.transpose();
      K.bottomLeftCorner(me, n) = p.Aeq;
    }
    Eigen::MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += reg;
    if (me > 0) Kreg.bottomRightCorner(me, me).diagonal().array() -= reg;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);

    const double mu = s.dot(z) / mi;

    auto solve_step = [&](const Eigen::VectorXd& rc) {
      // rc is the centering/complementarity residual: S z - sigma*mu*1 (+ corr)
      rhs.head(n) = -rd - p.G.transpose() * (d * rp_in.array()).matrix() +
                    p.G.transpose() * (rc.array() / s.array()).matrix();
      if (me > 0) rhs.tail(me) = -rp_eq;
      dxy = lu.solve(rhs);
      // one step of iterative refinement
      dxy += lu.solve(rhs - K * dxy);
      const Eigen::VectorXd dx = dxy.head(n);
      const Eigen::VectorXd dz =
          (d * (p.G * dx + rp_in).array() - rc.array() / s.array()).matrix();
      const Eigen::VectorXd ds = -rp_in - p.G * dx;
      return std::make_tuple(dx, dxy.tail(me).eval(), dz, ds);
    };

    auto step_length = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
      double a = 1.0;
      for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    // predictor
    auto [dx_a, dy_a, dz_a, ds_a] = solve_step((s.array() * z.array()).matrix());
    const double alpha_aff =
        std::min(step_length(s, ds_a), step_length(z, dz_a));
    const double mu_aff = (s + alpha_aff * ds_a).dot(z + alpha_aff * dz_a) / mi;
    const double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);

    // corrector
    Eigen::VectorXd rc = (s.array() * z.array() + ds_a.array() * dz_a.array() - sigma * mu).matrix();
    auto [dx, dy, dz, ds] = solve_step(rc);

    // longer steps near the end, but never exactly to the boundary
    const double eta = std::min(1.0 - 1e-8, std::max(0.995, 1.0 - 10.0 * mu));
    const double alpha = eta * std::min(step_length(s, ds), step_length(z, dz));
    const double a = std::min(1.0, alpha);
    x += a * dx;
    y += a * dy;
    z += a * dz;
    s += a * ds;
  }

  // Last resort: polish from the best iterate's active-set split.
  if (best_kkt < std::numeric_limits<double>::infinity()) {
    std::vector<int> active;
    const Eigen::VectorXd slack = p.h - p.G * best_x;
    for (int i = 0; i < mi; ++i)
      if (best_z(i) > std::abs(slack(i))) active.push_back(i);
    if (polish_active_set(p, active, settings, sol)) return sol;
  }
  sol.status = QpStatus::MaxIterations;
  sol.x = best_x;
  sol.ineq_duals = best_z;
  sol.eq_duals = best_y;
  sol.kkt_residual = best_kkt;
  return sol;
}

struct Phase1Outcome {
  bool feasible = false;
  bool indeterminate = false;
  Eigen::VectorXd witness;
  double max_violation = std::numeric_limits<double>::infinity();
  Eigen::VectorXd cert_ineq;
  Eigen::VectorXd cert_eq;
};

// Phase-1 feasibility: handle equalities by least squares + null-space
// parameterization, then minimize the worst inequality violation t with the
// same interior-point core (min t s.t. G x - t 1 <= h, t >= -1).
inline Phase1Outcome phase1(const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                            const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                            const SolverSettings& settings) {
  Phase1Outcome out;
  const int n = static_cast<int>(std::max(G.cols(), Aeq.cols()));
  const int mi = static_cast<int>(h.size());
  const int me = static_cast<int>(beq.size());
  const double tol = settings.tolerance;

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
  if (me > 0) {
    x0 = Aeq.completeOrthogonalDecomposition().solve(beq);
    const Eigen::VectorXd res = beq - Aeq * x0;
    const double eq_scale = 1.0 + beq.cwiseAbs().maxCoeff();
    if (res.cwiseAbs().maxCoeff() > std::max(tol, 1e-10) * eq_scale) {
      // Inconsistent equalities: the least-squares residual is itself a
      // Farkas certificate (Aeq' res = 0, beq' res = ||res||^2 > 0).
      out.feasible = false;
      out.max_violation = res.cwiseAbs().maxCoeff();
      out.cert_eq = -res / res.norm();
      out.cert_ineq = Eigen::VectorXd::Zero(mi);
      return out;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Aeq);
    lu.setThreshold(1e-10);
    N = lu.kernel();
    if (lu.dimensionOfKernel() == 0) N = Eigen::MatrixXd::Zero(n, 0);
  }

  if (mi == 0) {
    out.feasible = true;
    out.witness = x0;
    out.max_violation = 0.0;
    return out;
  }

  const int k = static_cast<int>(N.cols());
  const Eigen::VectorXd h_red = h - G * x0;
  if (k == 0) {
    // x is pinned by the equalities; just evaluate the inequalities.
    out.max_violation = std::max(0.0, -h_red.minCoeff());
    out.feasible = out.max_violation <= tol * (1.0 + h.cwiseAbs().maxCoeff());
    if (out.feasible) out.witness = x0;
    return out;
  }

  const double h_scale = 1.0 + (mi > 0 ? h.cwiseAbs().maxCoeff() : 0.0);

  // Only range(G N) matters to the inequalities; compress to full column
  // rank so the LP below is never underdetermined.
  const Eigen::MatrixXd C = G * N;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  int r = 0;
  const double sv_max = sv.size() > 0 ? sv(0) : 0.0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-12 * std::max(1.0, sv_max)) ++r;
  if (r == 0) {
    // Inequalities do not depend on the free directions at all.
    out.max_violation = std::max(0.0, -h_red.minCoeff());
    out.feasible = out.max_violation <= tol * h_scale;
    if (out.feasible) out.witness = x0;
    return out;
  }
  const Eigen::MatrixXd Cr = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
  const Eigen::MatrixXd Wr = svd.matrixV().leftCols(r);

  // LP in (w, t): min t  s.t.  Cr w - t 1 <= h_red,  -t <= 1.
  Eigen::MatrixXd Glp(mi + 1, r + 1);
  Glp.topLeftCorner(mi, r) = Cr;
  Glp.topRightCorner(mi, 1) = -Eigen::VectorXd::Ones(mi);
  Glp.bottomLeftCorner(1, r).setZero();
  Glp(mi, r) = -1.0;
  Eigen::VectorXd hlp(mi + 1);
  hlp.head(mi) = h_red;
  hlp(mi) = 1.0;
  Eigen::VectorXd qlp = Eigen::VectorXd::Zero(r + 1);
  qlp(r) = 1.0;

  QpProblem lp(Eigen::MatrixXd::Zero(r + 1, r + 1), qlp, Glp, hlp);
  SolverSettings lp_settings = settings;
  lp_settings.warm_start.reset();
  QpSolution lps = mehrotra_ipm(lp, lp_settings, nullptr);
  if (!lps.x.allFinite() || lps.x.size() != r + 1) {
    out.indeterminate = true;
    return out;
  }

  // The decision does not rely on LP optimality: a feasible verdict needs a
  // witness that checks out against the original rows, an infeasible verdict
  // a Farkas certificate that does. Anything else stays indeterminate.
  const Eigen::VectorXd x_cand = x0 + N * (Wr * lps.x.head(r));
  const double viol = std::max(0.0, (G * x_cand - h).maxCoeff());
  out.max_violation = viol;
  if (viol <= tol * h_scale) {
    out.feasible = true;
    out.witness = x_cand;
    return out;
  }

  Eigen::VectorXd lambda = lps.ineq_duals.head(mi).cwiseMax(0.0);
  if (lambda.lpNorm<1>() > 1e-300) lambda /= lambda.lpNorm<1>();
  Eigen::VectorXd nu;
  Eigen::VectorXd combo = G.transpose() * lambda;
  double gap = h.dot(lambda);
  if (me > 0) {
    nu = Aeq.transpose().completeOrthogonalDecomposition().solve(-combo);
    combo += Aeq.transpose() * nu;
    gap += beq.dot(nu);
  }
  if (combo.cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, std::abs(gap)) &&
      gap < -1e-6 * h_scale) {
    out.feasible = false;
    out.cert_ineq = lambda;
    out.cert_eq = nu;
    return out;
  }
  out.indeterminate = true;
  return out;
}

}  // namespace detail

/// Feasibility of {Gx <= h, Aeq x = beq} by phase-1 construction.
/// indeterminate is set when the internal LP hits its iteration budget.
inline FeasibilityResult check_feasibility(const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                           const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                                           const SolverSettings& settings = {}) {
  if (G.rows() != h.size()) throw std::invalid_argument("check_feasibility: G/h mismatch");
  if (Aeq.rows() != beq.size()) throw std::invalid_argument("check_feasibility: Aeq/beq mismatch");
  if (G.size() > 0 && Aeq.size() > 0 && G.cols() != Aeq.cols())
    throw std::invalid_argument("check_feasibility: G/Aeq column mismatch");
  detail::Phase1Outcome out = detail::phase1(G, h, Aeq, beq, settings);
  FeasibilityResult r;
  r.feasible = out.feasible;
  r.indeterminate = out.indeterminate;
  r.max_violation = out.max_violation;
  if (out.feasible) r.witness = out.witness;
  r.cert_ineq = out.cert_ineq;
  r.cert_eq = out.cert_eq;
  return r;
}

/// Dense convex QP solver; holds no state between calls beyond what the
/// warm start carries, so one instance per concurrent task.
class QpSolver {
 public:
  QpSolution solve(const QpProblem& p, const SolverSettings& settings = {}) {
    const int n = p.num_vars();
    const int mi = p.num_ineq();
    const int me = p.num_eq();

    // Warm start: accept immediately when it already satisfies the KKT system.
    if (settings.warm_start && settings.warm_start->x.size() == n &&
        settings.warm_start->ineq_duals.size() == mi && settings.warm_start->eq_duals.size() == me) {
      const QpSolution& w = *settings.warm_start;
      const Eigen::VectorXd z = mi > 0 ? w.ineq_duals.cwiseMax(0.0).eval() : Eigen::VectorXd();
      const double res = detail::kkt_residual_at(p, w.x, z, w.eq_duals);
      if (res <= settings.tolerance) {
        QpSolution sol = w;
        sol.ineq_duals = z;
        sol.status = QpStatus::Optimal;
        sol.kkt_residual = res;
        sol.iterations = 0;
        return sol;
      }
    }

    if (mi == 0) return solve_equality_only(p, settings);

    const Eigen::VectorXd* x_init = nullptr;
    Eigen::VectorXd warm_x;
    if (settings.warm_start && settings.warm_start->x.size() == n) {
      warm_x = settings.warm_start->x;
      x_init = &warm_x;
    }
    QpSolution sol = detail::mehrotra_ipm(p, settings, x_init);
    if (sol.status == QpStatus::Optimal) return sol;

    // Recentered restart: a near-converged endgame often cleans up when
    // restarted from the best primal point with fresh slacks.
    if (sol.x.allFinite() && std::isfinite(sol.kkt_residual)) {
      const int first_iters = sol.iterations;
      QpSolution retry = detail::mehrotra_ipm(p, settings, &sol.x);
      retry.iterations += first_iters;
      if (retry.status == QpStatus::Optimal) return retry;
      if (retry.kkt_residual < sol.kkt_residual) sol = retry;
    }

    // Classify: infeasible only with a phase-1 certificate, never by timeout.
    detail::Phase1Outcome ph = detail::phase1(p.G, p.h, p.Aeq, p.beq, settings);
    if (!ph.indeterminate && !ph.feasible) {
      sol.status = QpStatus::Infeasible;
      sol.cert_ineq = ph.cert_ineq;
      sol.cert_eq = ph.cert_eq;
      return sol;
    }
    sol.status = QpStatus::MaxIterations;
    return sol;
  }

 private:
  static QpSolution solve_equality_only(const QpProblem& p, const SolverSettings& settings) {
    const int n = p.num_vars();
    const int me = p.num_eq();
    QpSolution sol;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = p.P;
    if (me > 0) {
      K.topRightCorner(n, me) = p.Aeq.transpose();
      K.bottomLeftCorner(me, n) = p.Aeq;
    }
    const double reg = 1e-12 * std::max(1.0, p.P.cwiseAbs().maxCoeff());
    Eigen::MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += reg;
    if (me > 0) Kreg.bottomRightCorner(me, me).diagonal().array() -= reg;
    Eigen::VectorXd rhs(n + me);
    rhs.head(n) = -p.q;
    if (me > 0) rhs.tail(me) = p.beq;
    // factor the regularized matrix, refine against the exact one
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Kreg);
    Eigen::VectorXd xy = lu.solve(rhs);
    for (int pass = 0; pass < 6; ++pass) {
      const Eigen::VectorXd resid = rhs - K * xy;
      if (resid.cwiseAbs().maxCoeff() < 1e-16 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
      xy += lu.solve(resid);
    }

    sol.x = xy.head(n);
    sol.eq_duals = xy.tail(me);
    sol.ineq_duals = Eigen::VectorXd();
    sol.iterations = 1;
    sol.kkt_residual = detail::kkt_residual_at(p, sol.x, Eigen::VectorXd(), sol.eq_duals);
    if (sol.kkt_residual <= settings.tolerance) {
      sol.status = QpStatus::Optimal;
      return sol;
    }
    if (me > 0) {
      detail::Phase1Outcome ph =
          detail::phase1(Eigen::MatrixXd(), Eigen::VectorXd(), p.Aeq, p.beq, settings);
      if (!ph.indeterminate && !ph.feasible) {
        sol.status = QpStatus::Infeasible;
        sol.cert_ineq = ph.cert_ineq;
        sol.cert_eq = ph.cert_eq;
        return sol;
      }
    }
    sol.status = QpStatus::MaxIterations;
    return sol;
  }
};

inline QpSolution solve_qp(const QpProblem& p, const SolverSettings& settings = {}) {
  QpSolver solver;
  return solver.solve(p, settings);
}

}  // namespace fxtmr
