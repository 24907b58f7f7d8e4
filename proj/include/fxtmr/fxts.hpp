#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "fxtmr/geometry.hpp"
#include "fxtmr/plant.hpp"
#include "fxtmr/qp.hpp"

namespace fxtmr {

/// Fixed-time controller parameters. Inputs (mu, k, r_check, T, c, d) and
/// the derived quantities:
///   alpha  = max{ mu k / ((1-k) T), mu pi / (T sqrt(1 - r_check^2)) }
///   gamma1 = 1 + 1/mu, gamma2 = 1 - 1/mu
///   r_bar  = s/(2k) + k/(2s) with s = ((d^2 - c^2)/2)^(1/mu)
struct FxtParams {
  double mu = 2.0;
  double k = 0.5;
  double r_check = 0.5;
  double T = 0.2;
  double c = 0.005;
  double d = 0.6;
  double alpha = 0.0;
  double gamma1 = 1.5;
  double gamma2 = 0.5;
  double r_bar = 0.0;
  double slack_cost = 0.005;  // linear delta cost in the QP, defaults to c
};

inline FxtParams derive_params(double mu, double k, double r_check, double T, double c, double d,
                               std::optional<double> slack_cost = std::nullopt) {
  if (!(mu > 1.0)) throw std::invalid_argument("derive_params: mu must be > 1");
  if (!(k > 0.0 && k < 1.0)) throw std::invalid_argument("derive_params: k must be in (0,1)");
  if (!(r_check > 0.0 && r_check < 1.0))
    throw std::invalid_argument("derive_params: r_check must be in (0,1)");
  if (!(T > 0.0)) throw std::invalid_argument("derive_params: T must be > 0");
  if (!(c > 0.0)) throw std::invalid_argument("derive_params: c must be > 0");
  if (!(d > c)) throw std::invalid_argument("derive_params: d must exceed c");

  FxtParams p;
  p.mu = mu;
  p.k = k;
  p.r_check = r_check;
  p.T = T;
  p.c = c;
  p.d = d;
  p.alpha = std::max(mu * k / ((1.0 - k) * T),
                     mu * M_PI / (T * std::sqrt(1.0 - r_check * r_check)));
  p.gamma1 = 1.0 + 1.0 / mu;
  p.gamma2 = 1.0 - 1.0 / mu;
  const double s = std::pow((d * d - c * c) / 2.0, 1.0 / mu);
  p.r_bar = s / (2.0 * k) + k / (2.0 * s);
  p.slack_cost = slack_cost.value_or(c);
  return p;
}

/// min{0, h}^gamma as a signed power: 0 for h >= 0, else -|h|^gamma.
inline double signed_deficiency_pow(double h, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("signed_deficiency_pow: gamma must be > 0");
  if (h >= 0.0) return 0.0;
  return -std::pow(-h, gamma);
}

/// Interval-local barrier data: the reference end-of-interval state the
/// barrier is centered on, plus the interval index for bookkeeping.
struct BarrierContext {
  Eigen::VectorXd z_end;
  int interval_index = 0;
};

struct BarrierValue {
  double h = 0.0;
  Eigen::VectorXd grad;
};

/// h(x) = c^2/2 - ||x - z_end||^2/2, grad = -(x - z_end).
/// h >= 0 exactly on the ball of radius c around z_end.
inline BarrierValue barrier(const Eigen::VectorXd& x, const BarrierContext& ctx,
                            const FxtParams& params) {
  if (x.size() != ctx.z_end.size()) throw std::invalid_argument("barrier: dimension mismatch");
  const Eigen::VectorXd e = x - ctx.z_end;
  return {0.5 * params.c * params.c - 0.5 * e.squaredNorm(), -e};
}

/// End-of-interval reference state under held input: Abar z_plus + Bbar u_m.
inline Eigen::VectorXd predict_z_end(const DiscreteLtiModel& model, const Eigen::VectorXd& z_plus,
                                     const Eigen::VectorXd& u_m) {
  if (z_plus.size() != model.nx() || u_m.size() != model.nu())
    throw std::invalid_argument("predict_z_end: dimension mismatch");
  return model.Abar * z_plus + model.Bbar * u_m;
}

/// Low-level QP in decision variables (u_l, delta):
///   min 1/2 ||u_l||^2 + 1/2 delta^2 + slack_cost * delta
///   s.t. A_u (u_l + u_m) <= b_u
///        hdot >= delta h + alpha |h|^g1 + alpha |h|^g2   (h < 0 powers)
/// The barrier row in <= form: -Lgh u_l + h delta <= Lfh + Lgh u_m
///                                + alpha (spow(h,g1) + spow(h,g2)).
/// At h = 0 it reduces to the boundary condition Lfh + Lgh (u_m + u_l) >= 0.
inline QpProblem assemble_lowlevel_qp(const Eigen::VectorXd& x, const Eigen::VectorXd& u_m,
                                      const BarrierContext& ctx, const FxtParams& params,
                                      const ControlAffinePlant& plant, const Polytope& input_set) {
  const int nu = plant.nu();
  if (x.size() != plant.nx() || u_m.size() != nu || input_set.dim() != nu)
    throw std::invalid_argument("assemble_lowlevel_qp: dimension mismatch");

  const BarrierValue bv = barrier(x, ctx, params);
  const double Lfh = bv.grad.dot(plant.f(x));
  const Eigen::RowVectorXd Lgh = bv.grad.transpose() * plant.g(x);

  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nu + 1, nu + 1);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nu + 1);
  q(nu) = params.slack_cost;

  const int m_in = input_set.num_rows();
  Eigen::MatrixXd G(m_in + 1, nu + 1);
  Eigen::VectorXd h(m_in + 1);
  G.topLeftCorner(m_in, nu) = input_set.A;
  G.topRightCorner(m_in, 1).setZero();
  h.head(m_in) = input_set.b - input_set.A * u_m;
  G.bottomLeftCorner(1, nu) = -Lgh;
  G(m_in, nu) = bv.h;
  h(m_in) = Lfh + Lgh.dot(u_m) +
            params.alpha * (signed_deficiency_pow(bv.h, params.gamma1) +
                            signed_deficiency_pow(bv.h, params.gamma2));
  return QpProblem(std::move(P), std::move(q), std::move(G), std::move(h));
}

struct LowLevelOutput {
  Eigen::VectorXd u_l;
  double delta = 0.0;
  double h = 0.0;      // barrier value (CLF value V for the baseline policy)
  double ratio = 0.0;  // delta / (2 alpha)
  QpStatus status = QpStatus::MaxIterations;
};

inline LowLevelOutput low_level_policy(const Eigen::VectorXd& x, const Eigen::VectorXd& u_m,
                                       const BarrierContext& ctx, const FxtParams& params,
                                       const ControlAffinePlant& plant, const Polytope& input_set,
                                       const SolverSettings& settings = {}) {
  const QpProblem qp = assemble_lowlevel_qp(x, u_m, ctx, params, plant, input_set);
  const QpSolution sol = solve_qp(qp, settings);
  LowLevelOutput out;
  out.status = sol.status;
  out.h = barrier(x, ctx, params).h;
  if (sol.status == QpStatus::Optimal) {
    out.u_l = sol.x.head(plant.nu());
    out.delta = sol.x(plant.nu());
    out.ratio = out.delta / (2.0 * params.alpha);
  }
  return out;
}

struct FxtDoa {
  bool whole_space = false;
  std::optional<double> level;  // h-threshold defining the DoA when r >= 1
};

/// Def.-3 fixed-time domain of attraction as a function of r = delta/(2 alpha):
/// whole space for r < 1, else {x | h(x) >= -k^mu (r - sqrt(r^2-1))^mu}.
inline FxtDoa fxt_doa(const FxtParams& params, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("fxt_doa: r must be >= 0");
  if (r < 1.0) return {true, std::nullopt};
  const double phi = r - std::sqrt(r * r - 1.0);
  return {false, -std::pow(params.k, params.mu) * std::pow(phi, params.mu)};
}

/// Def.-3 settling-time bound: mu pi / (alpha sqrt(1 - r_check^2)) for
/// r < r_check, else mu k / (alpha (1 - k)).
inline double fxt_time(const FxtParams& params, double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("fxt_time: r must be >= 0");
  if (r < params.r_check)
    return params.mu * M_PI / (params.alpha * std::sqrt(1.0 - params.r_check * params.r_check));
  return params.mu * params.k / (params.alpha * (1.0 - params.k));
}

/// Exponentially stabilizing CLF baseline:
///   min 1/2 ||u_l||^2 + 1/2 slack_weight delta^2
///   s.t. A_u (u_l + u_m) <= b_u,  LfV + LgV (u_m + u_l) <= -lambda V + delta
/// with V = 1/2 ||x - z_end||^2.
inline LowLevelOutput es_clf_policy(const Eigen::VectorXd& x, const Eigen::VectorXd& u_m,
                                    const BarrierContext& ctx, double lambda, double slack_weight,
                                    const ControlAffinePlant& plant, const Polytope& input_set,
                                    const SolverSettings& settings = {}) {
  if (!(lambda > 0.0)) throw std::invalid_argument("es_clf_policy: lambda must be > 0");
  if (!(slack_weight > 0.0)) throw std::invalid_argument("es_clf_policy: slack_weight must be > 0");
  const int nu = plant.nu();
  if (x.size() != plant.nx() || u_m.size() != nu || input_set.dim() != nu)
    throw std::invalid_argument("es_clf_policy: dimension mismatch");

  const Eigen::VectorXd e = x - ctx.z_end;
  const double V = 0.5 * e.squaredNorm();
  const double LfV = e.dot(plant.f(x));
  const Eigen::RowVectorXd LgV = e.transpose() * plant.g(x);

  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nu + 1, nu + 1);
  P(nu, nu) = slack_weight;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(nu + 1);

  const int m_in = input_set.num_rows();
  Eigen::MatrixXd G(m_in + 1, nu + 1);
  Eigen::VectorXd h(m_in + 1);
  G.topLeftCorner(m_in, nu) = input_set.A;
  G.topRightCorner(m_in, 1).setZero();
  h.head(m_in) = input_set.b - input_set.A * u_m;
  G.bottomLeftCorner(1, nu) = LgV;
  G(m_in, nu) = -1.0;
  h(m_in) = -lambda * V - LfV - LgV.dot(u_m);

  const QpSolution sol = solve_qp(QpProblem(std::move(P), std::move(q), std::move(G), std::move(h)),
                                  settings);
  LowLevelOutput out;
  out.status = sol.status;
  out.h = V;
  out.ratio = std::numeric_limits<double>::quiet_NaN();
  if (sol.status == QpStatus::Optimal) {
    out.u_l = sol.x.head(nu);
    out.delta = sol.x(nu);
  }
  return out;
}

}  // namespace fxtmr
