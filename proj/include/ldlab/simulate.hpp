#pragma once
// Pathwise integration of the jump SDE dX = (-AX + F(X)) dt + G(X-) dL_n and
// its Yosida-approximated variant.
//
// Scheme: exponential Euler X <- S(dt)(X + dt F(X)) between events, applied on
// the union of a uniform grid and the sampled jump times; at a jump time tau
// with (already 1/n-scaled) mark zeta, X(tau) = X(tau-) + G(X(tau-)) zeta.
// States are stored post-jump (cadlag convention). Everything is a pure
// function of (seed, sample_index), and the mild/Yosida variants share the
// identical jump path for the same pair so pathwise gaps are meaningful.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ldlab/galerkin.hpp"
#include "ldlab/noise.hpp"

namespace ldlab::simulate {

struct Trajectory {
  std::vector<double> times;            // 0 = t_0 < ... <= t_N ~ T
  std::vector<Eigen::VectorXd> states;  // post-jump values, one per time
  double sup_norm = 0.0;                // sup_k |X(t_k)|

  const Eigen::VectorXd& terminal() const { return states.back(); }
};

// Integrates the jump SDE; dt <= 0 selects the default T/512.
Trajectory simulate_mild(const galerkin::GalerkinSystem& sys,
                         const noise::NoiseModel& model,
                         const Eigen::VectorXd& x0, double n, double T,
                         double dt, std::uint64_t seed,
                         std::uint64_t sample_index);

// Same path, A replaced by its Yosida approximation A_lambda.
Trajectory simulate_yosida(const galerkin::GalerkinSystem& sys,
                           const noise::NoiseModel& model,
                           const Eigen::VectorXd& x0, double n, double T,
                           double dt, double lambda, std::uint64_t seed,
                           std::uint64_t sample_index);

struct SupGapRow {
  double lambda = 0.0;
  double mean_sq_gap = 0.0;  // empirical E sup_t |X^lambda(t) - X(t)|^2
  double std_error = 0.0;
};

// Coupled mean-square sup gaps, one row per lambda (given in increasing
// order). Each path simulates the mild solution once and every Yosida variant
// on the same jump path; the sup runs over the uniform grid times, which all
// runs share bitwise.
std::vector<SupGapRow> pathwise_sup_gap(const galerkin::GalerkinSystem& sys,
                                        const noise::NoiseModel& model,
                                        const Eigen::VectorXd& x0, double n,
                                        double T, double dt,
                                        const std::vector<double>& lambdas,
                                        int paths, std::uint64_t seed);

}  // namespace ldlab::simulate
