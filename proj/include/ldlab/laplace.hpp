#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ldlab/galerkin.hpp"
#include "ldlab/noise.hpp"
#include "ldlab/simulate.hpp"

// Monte Carlo estimation of the exponential functionals
//   v_n = (1/n) log E exp(n g(X_n(T)))
// together with the moment and continuity diagnostics that keep those
// estimates trustworthy. Everything is keyed per sample index, so results do
// not depend on the worker count.

namespace ldlab::laplace {

// Terminal cost g with gradient and sup bound. The exact linear form is
// unbounded and exists for oracle comparisons only; every other built-in is
// bounded with |g|_inf available in closed form.
struct TerminalCost {
  enum class Kind { Constant, Linear, ClippedLinear, GaussianBump };
  Kind kind = Kind::Constant;
  double c = 0.0;           // additive offset; the Constant kind is offset alone
  Eigen::VectorXd p;        // Linear / ClippedLinear direction
  double amp = 1.0;         // ClippedLinear: amp * tanh(<p,x>/amp)
  Eigen::VectorXd center;   // GaussianBump
  double width = 1.0;       // GaussianBump: height * exp(-|x-center|^2 / (2 width^2))
  double height = 1.0;

  double operator()(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  double sup_norm() const;  // upper bound |c| + kind bound; +infinity for Linear
  bool bounded() const { return kind != Kind::Linear; }
};

TerminalCost constant_cost(double c);
TerminalCost linear_cost(Eigen::VectorXd p);  // unbounded; oracle use only
TerminalCost clipped_linear_cost(Eigen::VectorXd p, double amp);
TerminalCost bump_cost(Eigen::VectorXd center, double width, double height);

struct ValueEstimate {
  double value = 0.0;
  double n = 0.0;
  int samples = 0;
  double ess = 0.0;        // (sum w)^2 / sum w^2 for w_k = e^{n g_k - max}
  double half_width = 0.0; // 95% CI via the delta method on the log mean
  bool degenerate = false; // ess < 10: the estimate rests on a handful of paths
  std::string warning;     // set when ess < 1% of samples
};

// v_n estimate from independent mild paths keyed (seed, 0..samples-1).
// dt < 0 uses the simulate default T/512; threads <= 0 picks a worker count
// automatically (the result is identical for any count).
ValueEstimate laplace_functional(const galerkin::GalerkinSystem& sys,
                                 const noise::NoiseModel& model,
                                 const TerminalCost& g, const Eigen::VectorXd& x0,
                                 double n, double T, int samples,
                                 std::uint64_t seed, double dt = -1.0,
                                 int threads = 0);

struct MomentRow {
  double n = 0.0;
  double value = 0.0;  // (1/n) log E sup_s exp(n c1 |X_n(s)|)
  double ess = 0.0;
  bool degenerate = false;
};

// The n-uniform exponential moment curve: bounded spread across ns is the
// numerical signature of the moment bound behind the Laplace limits.
std::vector<MomentRow> exp_moment_curve(const galerkin::GalerkinSystem& sys,
                                        const noise::NoiseModel& model,
                                        const Eigen::VectorXd& x0, double T,
                                        const std::vector<double>& ns, double c1,
                                        int samples, std::uint64_t seed,
                                        double dt = -1.0, int threads = 0);

struct ContinuityReport {
  struct PairRow {
    double weak_dist_sq = 0.0;  // |x - y|_{-1}^2
    double mean_gap_sq = 0.0;   // E |X(T) - Y(T)|_{-1}^2, same jump path
    double ratio = 0.0;
    double std_error = 0.0;
  };
  struct TimeRow {
    double s = 0.0;
    double weak_increment_sq = 0.0;    // E |X(s) - x|_{-1}^2
    double strong_increment_sq = 0.0;  // E |X(s) - x|^2
    double ratio = 0.0;                // weak_increment_sq / s
  };
  std::vector<PairRow> pairs;
  double pair_constant = 0.0;  // max pair ratio (excluding x = y rows)
  std::vector<TimeRow> times;
  double time_constant = 0.0;  // max weak ratio over the s grid
};

// Coupled two-point and time-increment second moments. Pairs are simulated on
// the same jump path; time rows restart from pairs[0].first.
ContinuityReport continuity_suite(
    const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
    double n, double T, int samples, std::uint64_t seed, double dt = -1.0);

}  // namespace ldlab::laplace
