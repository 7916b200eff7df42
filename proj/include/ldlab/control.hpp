#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ldlab/galerkin.hpp"
#include "ldlab/laplace.hpp"
#include "ldlab/noise.hpp"
#include "ldlab/simulate.hpp"

// Deterministic optimal control of the noiseless skeleton
//
//   X'(s) = -A X(s) + F(X(s)) + G(X(s)) Q^{1/2} w(s),   X(0) = x0,
//
// with running cost l(|w(s)|), the radial Legendre transform of the noise
// exponent. Controls are piecewise constant on a uniform grid and enter
// through Q^{1/2}, which keeps the running cost finite for every w. The value
// function and the rate function are multi-start quasi-Newton solves driven
// by the discrete adjoint of the exponential-Euler stepper, so gradients are
// exact for the objective actually evaluated.

namespace ldlab::control {

struct ControlPath {
  double horizon = 0.0;
  std::vector<Eigen::VectorXd> values;  // one w_k per uniform interval

  int intervals() const { return static_cast<int>(values.size()); }
  double dt_u() const { return horizon / intervals(); }
};

ControlPath zero_control(int dim, int intervals, double T);

// Running cost sum_k dt_u * l(|w_k|); zero exactly when every w_k is zero.
double cost(const ControlPath& u, const noise::NoiseModel& model);

// Exponential-Euler solve of the controlled skeleton on a uniform grid.
// dt < 0 means horizon/512; dt must subdivide the control intervals evenly.
simulate::Trajectory solve_state(const galerkin::GalerkinSystem& sys,
                                 const noise::NoiseModel& model,
                                 const Eigen::VectorXd& x0, const ControlPath& u,
                                 double dt = -1.0);

// J(x0; u) = -cost(u) + g(X(T)).
double objective(const galerkin::GalerkinSystem& sys,
                 const noise::NoiseModel& model, const laplace::TerminalCost& g,
                 const Eigen::VectorXd& x0, const ControlPath& u, double dt = -1.0);

// J and dJ/dw via one forward and one adjoint sweep of the implemented
// stepper. grad has one entry per control interval.
double objective_with_gradient(const galerkin::GalerkinSystem& sys,
                               const noise::NoiseModel& model,
                               const laplace::TerminalCost& g,
                               const Eigen::VectorXd& x0, const ControlPath& u,
                               std::vector<Eigen::VectorXd>& grad,
                               double dt = -1.0);

struct ValueResult {
  double value = 0.0;  // best J found: a feasible control attains it, so a
                       // certified lower bound on the true value
  ControlPath control;
  double cost = 0.0;
  double terminal_g = 0.0;
  Eigen::VectorXd terminal;
  bool converged = false;
  double cap = std::numeric_limits<double>::infinity();  // 2 |g|_inf when bounded
  bool cap_ok = true;  // running cost within the admissible-class cap
};

ValueResult maximize_value(const galerkin::GalerkinSystem& sys,
                           const noise::NoiseModel& model,
                           const laplace::TerminalCost& g,
                           const Eigen::VectorXd& x0, double T,
                           int intervals = 32, int restarts = 8,
                           std::uint64_t seed = 0, double dt = -1.0);

struct RateResult {
  double value = std::numeric_limits<double>::infinity();
  double mismatch = std::numeric_limits<double>::infinity();  // |X(T) - target|
  bool reachable = false;  // mismatch within 1e-3 (1 + |target|)
  bool converged = false;
  ControlPath control;
  std::string diagnostics;
};

// Minimal steering cost to the target via a quadratic-penalty homotopy
// (stage j penalty mu0 * 10^j), warm-started across stages. A stagnating
// mismatch with a growing penalty marks the target unreachable and returns
// the +infinity sentinel.
RateResult rate_function(const galerkin::GalerkinSystem& sys,
                         const noise::NoiseModel& model,
                         const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                         double T, int intervals = 32, int restarts = 8,
                         std::uint64_t seed = 0, double dt = -1.0,
                         double mu0 = 1.0, int stages = 6);

}  // namespace ldlab::control
