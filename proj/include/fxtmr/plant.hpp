#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>

#include <Eigen/Dense>

namespace fxtmr {

/// Control-affine continuous-time model xdot = f(x) + g(x) u.
class ControlAffinePlant {
 public:
  virtual ~ControlAffinePlant() = default;
  virtual int nx() const = 0;
  virtual int nu() const = 0;
  virtual Eigen::VectorXd f(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd g(const Eigen::VectorXd& x) const = 0;

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return f(x) + g(x) * u;
  }
};

/// Wheeled-inverted-pendulum parameters. wheel_mass is the effective
/// translational mass (wheel plus reflected rotor inertia); body_inertia is
/// about the body CoM, com_length the axle-to-CoM distance.
struct SegwayParams {
  double wheel_mass = 5.0;        // kg
  double body_mass = 30.0;        // kg
  double body_inertia = 0.6;      // kg m^2
  double com_length = 0.25;       // m
  double wheel_radius = 0.2;      // m
  double motor_kt = 2.0;          // N m / A
  double motor_kb = 1.0;          // V s / rad
  double motor_resistance = 1.0;  // Ohm
  double gravity = 9.81;          // m / s^2
};

/// State (p, v, theta, omega), input = motor voltage. Torque
/// tau = kt (u - kb (v/rw - omega)) / Ra acts between wheel and body.
class SegwayPlant : public ControlAffinePlant {
 public:
  explicit SegwayPlant(const SegwayParams& p) : p_(p) {
    if (!(p.wheel_mass > 0 && p.body_mass > 0 && p.body_inertia > 0 && p.com_length > 0 &&
          p.wheel_radius > 0 && p.motor_kt > 0 && p.motor_resistance > 0 && p.gravity > 0 &&
          p.motor_kb >= 0))
      throw std::invalid_argument("SegwayPlant: parameters must be strictly positive");
    // worst-case mass matrix determinant (cos = 1)
    const double det0 = (p.wheel_mass + p.body_mass) * (p.body_inertia + body_ml2()) -
                        (p.body_mass * p.com_length) * (p.body_mass * p.com_length);
    if (det0 <= 1e-9) throw std::invalid_argument("SegwayPlant: singular mass matrix");
  }

  int nx() const override { return 4; }
  int nu() const override { return 1; }

  Eigen::VectorXd f(const Eigen::VectorXd& x) const override {
    check_dim(x);
    const double v = x(1), th = x(2), om = x(3);
    const Eigen::Matrix2d Minv = mass_inverse(th);
    const double tau0 = -p_.motor_kt * p_.motor_kb * (v / p_.wheel_radius - om) /
                        p_.motor_resistance;
    Eigen::Vector2d rhs;
    rhs << p_.body_mass * p_.com_length * om * om * std::sin(th) + tau0 / p_.wheel_radius,
        p_.body_mass * p_.gravity * p_.com_length * std::sin(th) - tau0;
    const Eigen::Vector2d acc = Minv * rhs;
    Eigen::VectorXd out(4);
    out << v, acc(0), om, acc(1);
    return out;
  }

  Eigen::MatrixXd g(const Eigen::VectorXd& x) const override {
    check_dim(x);
    const Eigen::Matrix2d Minv = mass_inverse(x(2));
    Eigen::Vector2d rhs;
    rhs << p_.motor_kt / (p_.motor_resistance * p_.wheel_radius),
        -p_.motor_kt / p_.motor_resistance;
    const Eigen::Vector2d acc = Minv * rhs;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(4, 1);
    out(1, 0) = acc(0);
    out(3, 0) = acc(1);
    return out;
  }

  const SegwayParams& params() const { return p_; }

 private:
  double body_ml2() const { return p_.body_mass * p_.com_length * p_.com_length; }

  Eigen::Matrix2d mass_inverse(double th) const {
    const double coupling = p_.body_mass * p_.com_length * std::cos(th);
    Eigen::Matrix2d M;
    M << p_.wheel_mass + p_.body_mass, coupling, coupling, p_.body_inertia + body_ml2();
    return M.inverse();
  }

  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != 4) throw std::invalid_argument("SegwayPlant: state must be 4-dimensional");
  }

  SegwayParams p_;
};

inline SegwayPlant segway(const SegwayParams& params) { return SegwayPlant(params); }

/// n independent double-integrator axes: per axis [position, velocity],
/// velocity driven directly by the input.
class DoubleIntegratorPlant : public ControlAffinePlant {
 public:
  explicit DoubleIntegratorPlant(int axes) : axes_(axes) {
    if (axes < 1) throw std::invalid_argument("double_integrator: axes must be >= 1");
  }
  int nx() const override { return 2 * axes_; }
  int nu() const override { return axes_; }
  Eigen::VectorXd f(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * axes_);
    for (int i = 0; i < axes_; ++i) out(2 * i) = x(2 * i + 1);
    return out;
  }
  Eigen::MatrixXd g(const Eigen::VectorXd&) const override {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * axes_, axes_);
    for (int i = 0; i < axes_; ++i) out(2 * i + 1, i) = 1.0;
    return out;
  }

 private:
  int axes_;
};

inline DoubleIntegratorPlant double_integrator(int axes) { return DoubleIntegratorPlant(axes); }

/// xdot = u (f = 0, g = I); the desk-scale verification plant.
class SingleIntegratorPlant : public ControlAffinePlant {
 public:
  explicit SingleIntegratorPlant(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("single_integrator: n must be >= 1");
  }
  int nx() const override { return n_; }
  int nu() const override { return n_; }
  Eigen::VectorXd f(const Eigen::VectorXd&) const override { return Eigen::VectorXd::Zero(n_); }
  Eigen::MatrixXd g(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Identity(n_, n_);
  }

 private:
  int n_;
};

inline SingleIntegratorPlant single_integrator(int n) { return SingleIntegratorPlant(n); }

/// Classical RK4 step with u held constant.
inline Eigen::VectorXd rk4_step(const ControlAffinePlant& plant, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const Eigen::VectorXd k1 = plant.dynamics(x, u);
  const Eigen::VectorXd k2 = plant.dynamics(x + 0.5 * dt * k1, u);
  const Eigen::VectorXd k3 = plant.dynamics(x + 0.5 * dt * k2, u);
  const Eigen::VectorXd k4 = plant.dynamics(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Jacobian linearization about (x0, u = 0): A by central differences of f,
/// B = g(x0) exactly (the model is control affine).
struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

inline Linearization linearize(const ControlAffinePlant& plant, const Eigen::VectorXd& x0) {
  const int n = plant.nx();
  Eigen::MatrixXd A(n, n);
  for (int j = 0; j < n; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(x0(j)));
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += step;
    xm(j) -= step;
    A.col(j) = (plant.f(xp) - plant.f(xm)) / (2.0 * step);
  }
  return {A, plant.g(x0)};
}

}  // namespace fxtmr
