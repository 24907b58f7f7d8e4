#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "fxtmr/qp.hpp"

namespace fxtmr {

/// Halfspace-representation convex set {x | A x <= b}.
struct Polytope {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  Polytope(Eigen::MatrixXd A_, Eigen::VectorXd b_) : A(std::move(A_)), b(std::move(b_)) {
    if (A.rows() < 1) throw std::invalid_argument("Polytope: need at least one halfspace");
    if (A.rows() != b.size()) throw std::invalid_argument("Polytope: A rows must match b size");
    if (!A.allFinite() || !b.allFinite()) throw std::invalid_argument("Polytope: non-finite data");
  }

  int dim() const { return static_cast<int>(A.cols()); }
  int num_rows() const { return static_cast<int>(A.rows()); }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const {
    if (x.size() != A.cols()) throw std::invalid_argument("Polytope::contains: dimension mismatch");
    return ((A * x - b).array() <= tol).all();
  }

  // Largest constraint violation at x; <= 0 means inside.
  double violation(const Eigen::VectorXd& x) const { return (A * x - b).maxCoeff(); }
};

/// Euclidean ball {x | ||x - center|| <= radius}.
struct Ball {
  Eigen::VectorXd center;
  double radius = 0.0;

  Ball(Eigen::VectorXd c, double r) : center(std::move(c)), radius(r) {
    if (!(r >= 0.0)) throw std::invalid_argument("Ball: radius must be >= 0");
  }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const {
    return (x - center).norm() <= radius + tol;
  }
};

/// Axis-aligned box [lo, hi].
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Box(Eigen::VectorXd lo_, Eigen::VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Box: lo/hi size mismatch");
    if ((lo.array() > hi.array()).any()) throw std::invalid_argument("Box: requires lo <= hi");
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const {
    return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
  }
};

/// Polytope {x | x <= hi, -x <= -lo} from box bounds.
inline Polytope box_polytope(const Box& box) {
  const int n = box.dim();
  Eigen::MatrixXd A(2 * n, n);
  A << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(2 * n);
  b << box.hi, -box.lo;
  return Polytope(std::move(A), std::move(b));
}

/// Symmetric box |u_i| <= bound_i as a polytope.
inline Polytope symmetric_box_polytope(const Eigen::VectorXd& bound) {
  return box_polytope(Box(-bound, bound));
}

/// Continuous pair (A, B) with sampling period T and the exact ZOH pair
/// Abar = e^{AT}, Bbar = int_0^T e^{A(T-eta)} B deta.
struct DiscreteLtiModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double T = 0.0;
  Eigen::MatrixXd Abar;
  Eigen::MatrixXd Bbar;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
};

/// Exact zero-order-hold discretization via the augmented matrix exponential
/// exp([[A, B], [0, 0]] T) = [[Abar, Bbar], [0, I]].
inline DiscreteLtiModel zoh_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                       double T) {
  if (A.rows() != A.cols()) throw std::invalid_argument("zoh_discretize: A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("zoh_discretize: B row count must match A");
  if (!(T > 0.0)) throw std::invalid_argument("zoh_discretize: T must be positive");
  if (!A.allFinite() || !B.allFinite())
    throw std::invalid_argument("zoh_discretize: non-finite entries");

  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A;
  M.topRightCorner(n, m) = B;
  const Eigen::MatrixXd E = (M * T).exp();

  DiscreteLtiModel model;
  model.A = A;
  model.B = B;
  model.T = T;
  model.Abar = E.topLeftCorner(n, n);
  model.Bbar = E.topRightCorner(n, m);
  return model;
}

/// Exact Pontryagin difference P (-) Ball(0, r): each offset shrinks by
/// r * ||row||. Throws if the eroded set is empty (phase-1 LP check).
inline Polytope polytope_erode_ball(const Polytope& P, double r,
                                    const SolverSettings& settings = {}) {
  if (!(r >= 0.0)) throw std::invalid_argument("polytope_erode_ball: r must be >= 0");
  Eigen::VectorXd b = P.b;
  for (int i = 0; i < P.num_rows(); ++i) b(i) -= r * P.A.row(i).norm();
  Polytope eroded(P.A, b);
  if (r > 0.0) {
    const FeasibilityResult feas =
        check_feasibility(eroded.A, eroded.b, Eigen::MatrixXd(), Eigen::VectorXd(), settings);
    if (feas.indeterminate)
      throw std::runtime_error("polytope_erode_ball: feasibility check indeterminate");
    if (!feas.feasible) throw std::runtime_error("polytope_erode_ball: erosion empties set");
  }
  return eroded;
}

/// Largest axis-aligned box centered at 0 inscribed in Ball(0, r):
/// half-width r/sqrt(n), so every vertex has norm exactly r.
inline Box ball_inner_box(double r, int n) {
  if (!(r >= 0.0)) throw std::invalid_argument("ball_inner_box: r must be >= 0");
  if (n < 1) throw std::invalid_argument("ball_inner_box: n must be >= 1");
  const double half = r / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd hw = Eigen::VectorXd::Constant(n, half);
  return Box(-hw, hw);
}

/// Euclidean distance from x to the box (componentwise clamp, then norm).
inline double dist_to_box(const Eigen::VectorXd& x, const Box& box) {
  if (x.size() != box.dim()) throw std::invalid_argument("dist_to_box: dimension mismatch");
  const Eigen::VectorXd clamped = x.array().max(box.lo.array()).min(box.hi.array());
  return (x - clamped).norm();
}

}  // namespace fxtmr
