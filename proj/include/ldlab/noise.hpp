#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ldlab/util.hpp"

// Jump-noise models for the scaled processes L_n(t) = (1/n) L(nt).
//
// Both built-in variants are mean-zero Levy processes on R^d whose jump
// measure nu is a centered Gaussian mixture with diagonal covariance
// Q = diag(q_spectrum):
//
//   compound Poisson:     nu = N(0, Q), unit jump rate;
//   subordinated Wiener:  L = W o Z,  nu = integral of N(0, t Q) rho(dt),
//                         with Z a finite-activity driftless subordinator
//                         normalized so E Z(1) = 1.
//
// The cumulant H0(p) = integral of (e^{<p,z>} - 1 - <p,z>) nu(dz) is radial
// in the weighted norm |Q^{1/2} p|:  H0(p) = h(|Q^{1/2} p|), with
//   h(u) = e^{u^2/2} - 1                  (compound Poisson)
//   h(u) = integral (e^{t u^2/2} - 1) rho(dt)   (subordinated Wiener).
// Its Legendre transform L0(z) = sup_y { <z,y> - H0(y) } is likewise radial:
// L0(z) = l(|Q^{-1/2} z|) on the range of Q^{1/2}, +infinity elsewhere.

namespace ldlab::noise {

inline constexpr double kKernelTol = 1e-14;   // q_k below this counts as a kernel direction
inline constexpr double kDefaultEpsRho = 1e-3;  // small-jump cutoff for subordinator sampling

enum class Variant { CompoundPoissonGaussian, SubordinatedWiener };

// Cubic Hermite interpolant on uniform nodes; slopes are exact nodal values,
// so derivative queries stay accurate between nodes.
struct CubicTable {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> value, slope;
  bool empty() const { return value.empty(); }
  double x_max() const;
  double eval(double x) const;
  double eval_slope(double x) const;
};

struct SubordinatorSpec {
  enum class Kind { PointMass, Tabulated, Ne2Family };
  Kind kind = Kind::PointMass;
  double point_t = 1.0;     // PointMass: location of the single atom
  std::vector<double> knots;    // Tabulated: increasing grid, knots[0] >= 0
  std::vector<double> density;  // Tabulated: piecewise-linear density at knots
  double alpha = -1.0;      // Ne2Family: density ~ t^{-(1+alpha)} e^{-t^2}; alpha < 0
};

struct NoiseModel {
  Variant variant = Variant::CompoundPoissonGaussian;
  Eigen::VectorXd q_spectrum;  // eigenvalues of Q in the Galerkin basis
  SubordinatorSpec rho;        // subordinated variant only
  double eps_rho = kDefaultEpsRho;

  // Cached at construction (subordinated variant).
  double rho_scale = 1.0;      // multiplies the raw density so that E Z(1) = 1
  double rate_above_cut = 0.0;   // rho([eps_rho, inf)): arrival rate of kept jumps
  double mean_below_cut = 0.0;   // integral of t rho(dt) over [0, eps_rho)
  double support_cap = 0.0;      // upper truncation for sampling
  std::vector<double> cdf_t, cdf_p;  // sampling table for rho on [eps_rho, support_cap]
  CubicTable h_table, hslope_table;  // cached h and h' for the conjugation loops

  int dim() const { return static_cast<int>(q_spectrum.size()); }
  double trace_q() const { return q_spectrum.sum(); }
  double max_q() const { return q_spectrum.size() ? q_spectrum.maxCoeff() : 0.0; }
};

NoiseModel make_compound_poisson(Eigen::VectorXd q_spectrum);
NoiseModel make_subordinated(Eigen::VectorXd q_spectrum, SubordinatorSpec rho,
                             double eps_rho = kDefaultEpsRho);

// g(sigma) = sigma * e^{sigma^2/2}, the slope of the compound-Poisson h.
double radial_gain(double sigma);

// Inverse of radial_gain on [0, inf). Newton in log space; the residual
// |g(f(s)) - s| lands within a couple of ulps of s (<= 1e-12 absolute for
// s up to ~1e3). Bounds sqrt(a log s) <= f(s) <= sqrt(2 log s) hold for
// large s and any a < 2.
double radial_gain_inverse(double s);

// h(u), h'(u): the radial cumulant profile and its slope.
double radial_exponent(const NoiseModel& model, double u);
double radial_exponent_slope(const NoiseModel& model, double u);

// H0(p) = h(|Q^{1/2} p|).
double laplace_exponent(const NoiseModel& model, const Eigen::VectorXd& p);

// l(s): radial profile of the Legendre transform. Compound Poisson uses the
// closed form (f(s)^2 - 1) e^{f(s)^2/2} + 1; the subordinated variant
// conjugates h numerically (log-spaced grid + golden-section refinement).
double radial_cost(const NoiseModel& model, double s);

// l'(s) = argmax_u { s u - h(u) }, i.e. the inverse of h'.
double radial_cost_slope(const NoiseModel& model, double s);

// L0(z). Returns +infinity (the reachability sentinel, not an overflow) when
// z has a component along a kernel direction q_k < kKernelTol; the finite
// branch throws util::NumericalError instead of ever overflowing to inf.
double legendre_cost(const NoiseModel& model, const Eigen::VectorXd& z);

// N_eps = sup_{|y| = 1/eps} H0(y) = h(sqrt(max q) / eps), the constant in
// |z| <= eps * L0(z) + N_eps.
double norm_domination_constant(const NoiseModel& model, double eps);

// View over (h, l) with the tabulation the numeric conjugation rests on.
struct RadialHamiltonian {
  const NoiseModel* model = nullptr;
  Eigen::VectorXd grid_s;   // geometric grid where l was tabulated
  Eigen::VectorXd grid_l;
  double h(double u) const { return radial_exponent(*model, u); }
  double h_slope(double u) const { return radial_exponent_slope(*model, u); }
  double l(double s) const { return radial_cost(*model, s); }
  double l_slope(double s) const { return radial_cost_slope(*model, s); }
};
RadialHamiltonian radial_profile(const NoiseModel& model);

// One realized path of the scaled driver L_n on [0, T]: marks are the state
// increments applied at the paired times (strictly increasing, in (0, T]).
// For the subordinated variant the list also carries per-grid-step Gaussian
// increments that stand in for the truncated small jumps, so summing all
// marks reproduces L_n(T) in distribution.
struct JumpPath {
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> marks;

  Eigen::VectorXd terminal_value(int dim) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (const auto& m : marks) acc += m;
    return acc;
  }
};

// Draws the path for sample `sample_index` of stream `seed`. Pure function of
// (model, n, horizon, seed, sample_index, grid_steps): identical inputs give
// bit-identical paths. grid_steps only matters for the subordinated variant's
// compensation increments.
JumpPath sample_scaled_path(const NoiseModel& model, double n, double horizon,
                            std::uint64_t seed, std::uint64_t sample_index,
                            int grid_steps = 512);

}  // namespace ldlab::noise
