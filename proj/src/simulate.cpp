#include "ldlab/simulate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ldlab/util.hpp"

namespace ldlab::simulate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Exponential-Euler drift stepper with a cached full-step propagator for
// systems that need a dense matrix exponential.
struct Stepper {
  const galerkin::GalerkinSystem* sys;
  double h;
  bool closed_form;
  MatrixXd s_h;

  Stepper(const galerkin::GalerkinSystem& s, double step)
      : sys(&s),
        h(step),
        closed_form(s.use_rotation_semigroup || s.is_diagonal) {
    if (!closed_form) s_h = galerkin::semigroup_matrix(s, step);
  }

  void advance(VectorXd& x, double delta) const {
    if (delta <= 0.0) return;
    VectorXd y = x;
    if (sys->f_kind != galerkin::DriftKind::Zero) y += delta * sys->drift(x);
    if (!closed_form && std::fabs(delta - h) <= 1e-12 * h)
      x.noalias() = s_h * y;
    else
      x = galerkin::semigroup_apply(*sys, delta, y);
  }
};

Trajectory run(const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
               const VectorXd& x0, double n, double T, double dt,
               std::uint64_t seed, std::uint64_t sample_index) {
  if (!(T > 0.0)) throw std::invalid_argument("simulate: T must be > 0");
  if (dt <= 0.0) dt = T / 512;
  if (dt > T) throw std::invalid_argument("simulate: dt must be <= T");
  if (model.dim() != sys.dim)
    throw std::invalid_argument("simulate: noise dimension does not match the system");
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const double h = T / steps;

  // The sampler places subordinated compensation increments at k*(T/steps),
  // the exact arithmetic used for the uniform grid below, so coincident
  // events merge bitwise.
  const auto path = noise::sample_scaled_path(model, n, T, seed, sample_index, steps);
  const Stepper stepper(sys, h);

  Trajectory tr;
  tr.times.reserve(steps + path.times.size() + 1);
  tr.states.reserve(steps + path.times.size() + 1);

  VectorXd x = x0;
  double t = 0.0;
  auto record = [&](double time) {
    if (!x.allFinite())
      throw util::NumericalError("simulate: state became non-finite at t = " +
                                 std::to_string(time));
    tr.times.push_back(time);
    tr.states.push_back(x);
    tr.sup_norm = std::max(tr.sup_norm, x.norm());
  };
  record(0.0);

  const double inf = std::numeric_limits<double>::infinity();
  int k = 1;
  size_t j = 0;
  while (k <= steps || j < path.times.size()) {
    const double tg = k <= steps ? k * h : inf;
    const double tj = j < path.times.size() ? path.times[j] : inf;
    if (tj < tg) {
      stepper.advance(x, tj - t);
      x += sys.diffusion_apply(x, path.marks[j]);
      record(tj);
      t = tj;
      ++j;
    } else if (tj == tg) {
      stepper.advance(x, tg - t);
      x += sys.diffusion_apply(x, path.marks[j]);
      record(tg);
      t = tg;
      ++j;
      ++k;
    } else {
      stepper.advance(x, tg - t);
      record(tg);
      t = tg;
      ++k;
    }
  }
  return tr;
}

}  // namespace

Trajectory simulate_mild(const galerkin::GalerkinSystem& sys,
                         const noise::NoiseModel& model, const VectorXd& x0,
                         double n, double T, double dt, std::uint64_t seed,
                         std::uint64_t sample_index) {
  return run(sys, model, x0, n, T, dt, seed, sample_index);
}

Trajectory simulate_yosida(const galerkin::GalerkinSystem& sys,
                           const noise::NoiseModel& model, const VectorXd& x0,
                           double n, double T, double dt, double lambda,
                           std::uint64_t seed, std::uint64_t sample_index) {
  return run(galerkin::yosida_system(sys, lambda), model, x0, n, T, dt, seed,
             sample_index);
}

std::vector<SupGapRow> pathwise_sup_gap(const galerkin::GalerkinSystem& sys,
                                        const noise::NoiseModel& model,
                                        const VectorXd& x0, double n, double T,
                                        double dt,
                                        const std::vector<double>& lambdas,
                                        int paths, std::uint64_t seed) {
  if (lambdas.empty()) throw std::invalid_argument("pathwise_sup_gap: no lambdas");
  for (size_t i = 1; i < lambdas.size(); ++i)
    if (lambdas[i] <= lambdas[i - 1])
      throw std::invalid_argument("pathwise_sup_gap: lambdas must be increasing");
  if (paths < 1) throw std::invalid_argument("pathwise_sup_gap: paths must be >= 1");

  std::vector<galerkin::GalerkinSystem> approx;
  approx.reserve(lambdas.size());
  for (double lam : lambdas) approx.push_back(galerkin::yosida_system(sys, lam));

  // Gaps are measured on the uniform grid only: those times are shared
  // bitwise by every run, so paths stay comparable across lambdas.
  if (dt <= 0.0) dt = T / 512;
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const double h = T / steps;

  std::vector<util::RunningStat> stats(lambdas.size());
  for (int p = 0; p < paths; ++p) {
    const auto base = run(sys, model, x0, n, T, dt, seed, p);
    for (size_t li = 0; li < lambdas.size(); ++li) {
      const auto yo = run(approx[li], model, x0, n, T, dt, seed, p);
      if (yo.times.size() != base.times.size())
        throw util::NumericalError("pathwise_sup_gap: coupled grids diverged");
      double sup = 0.0;
      size_t i = 0;
      for (int k = 1; k <= steps; ++k) {
        const double tg = k * h;
        while (i < base.times.size() && base.times[i] != tg) ++i;
        if (i == base.times.size())
          throw util::NumericalError("pathwise_sup_gap: grid time missing");
        sup = std::max(sup, (yo.states[i] - base.states[i]).squaredNorm());
      }
      stats[li].add(sup);
    }
  }

  std::vector<SupGapRow> rows;
  rows.reserve(lambdas.size());
  for (size_t li = 0; li < lambdas.size(); ++li)
    rows.push_back({lambdas[li], stats[li].mean(),
                    paths > 1 ? stats[li].std_error() : 0.0});
  return rows;
}

}  // namespace ldlab::simulate
