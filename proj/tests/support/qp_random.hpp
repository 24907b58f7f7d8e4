#pragma once

#include <random>

#include <Eigen/Dense>

#include "fxtmr/qp.hpp"

namespace fxtmr_test {

inline Eigen::MatrixXd randn_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n01(rng);
  return m;
}

inline Eigen::VectorXd randn_vector(std::mt19937_64& rng, int n) {
  return randn_matrix(rng, n, 1).col(0);
}

// Strictly convex QP, feasible by construction (an interior point exists).
inline fxtmr::QpProblem make_random_qp(std::mt19937_64& rng, int n_max = 10, int mi_max = 20,
                                       int me_max = 5) {
  std::uniform_int_distribution<int> un(1, n_max);
  const int n = un(rng);
  std::uniform_int_distribution<int> umi(0, mi_max);
  const int mi = umi(rng);
  std::uniform_int_distribution<int> ume(0, std::min(me_max, n - 1));
  const int me = ume(rng);

  Eigen::MatrixXd L = randn_matrix(rng, n, n);
  Eigen::MatrixXd P = L * L.transpose() + 0.2 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q = randn_vector(rng, n);
  Eigen::VectorXd x_feas = randn_vector(rng, n);

  Eigen::MatrixXd G = randn_matrix(rng, mi, n);
  std::uniform_real_distribution<double> margin(0.01, 1.0);
  Eigen::VectorXd h(mi);
  for (int i = 0; i < mi; ++i) h(i) = G.row(i).dot(x_feas) + margin(rng);

  Eigen::MatrixXd Aeq = randn_matrix(rng, me, n);
  Eigen::VectorXd beq = me > 0 ? (Aeq * x_feas).eval() : Eigen::VectorXd();

  return fxtmr::QpProblem(P, q, G, h, Aeq, beq);
}

// Infeasible variant: append a contradictory pair of parallel halfspaces.
inline fxtmr::QpProblem make_infeasible_qp(std::mt19937_64& rng, int n_max = 10) {
  fxtmr::QpProblem base = make_random_qp(rng, n_max, 10, 3);
  const int n = base.num_vars();
  const int mi = base.num_ineq();
  Eigen::VectorXd g = randn_vector(rng, n);
  if (g.norm() < 1e-6) g(0) = 1.0;
  std::uniform_real_distribution<double> gap(0.5, 2.0);
  const double a = randn_vector(rng, 1)(0);
  Eigen::MatrixXd G(mi + 2, n);
  G.topRows(mi) = base.G;
  G.row(mi) = g.transpose();
  G.row(mi + 1) = -g.transpose();
  Eigen::VectorXd h(mi + 2);
  h.head(mi) = base.h;
  h(mi) = a;              //  g'x <= a
  h(mi + 1) = -a - gap(rng);  // -g'x <= -a-gap  =>  g'x >= a+gap
  return fxtmr::QpProblem(base.P, base.q, G, h, base.Aeq, base.beq);
}

}  // namespace fxtmr_test
