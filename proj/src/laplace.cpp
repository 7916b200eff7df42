#include "ldlab/laplace.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "ldlab/util.hpp"

namespace ldlab::laplace {

using Eigen::VectorXd;

// ---------- terminal costs ----------

double TerminalCost::operator()(const VectorXd& x) const {
  switch (kind) {
    case Kind::Constant:
      return c;
    case Kind::Linear:
      return c + p.dot(x);
    case Kind::ClippedLinear:
      return c + amp * std::tanh(p.dot(x) / amp);
    case Kind::GaussianBump: {
      const double r2 = (x - center).squaredNorm();
      return c + height * std::exp(-r2 / (2.0 * width * width));
    }
  }
  return c;
}

VectorXd TerminalCost::gradient(const VectorXd& x) const {
  switch (kind) {
    case Kind::Constant:
      return VectorXd::Zero(x.size());
    case Kind::Linear:
      return p;
    case Kind::ClippedLinear: {
      const double th = std::tanh(p.dot(x) / amp);
      return (1.0 - th * th) * p;
    }
    case Kind::GaussianBump: {
      const VectorXd d = x - center;
      const double v = height * std::exp(-d.squaredNorm() / (2.0 * width * width));
      return (-v / (width * width)) * d;
    }
  }
  return VectorXd::Zero(x.size());
}

double TerminalCost::sup_norm() const {
  switch (kind) {
    case Kind::Constant:
      return std::fabs(c);
    case Kind::Linear:
      return std::numeric_limits<double>::infinity();
    case Kind::ClippedLinear:
      return std::fabs(c) + std::fabs(amp);
    case Kind::GaussianBump:
      return std::fabs(c) + std::fabs(height);
  }
  return std::fabs(c);
}

TerminalCost constant_cost(double c) {
  TerminalCost g;
  g.kind = TerminalCost::Kind::Constant;
  g.c = c;
  return g;
}

TerminalCost linear_cost(VectorXd p) {
  TerminalCost g;
  g.kind = TerminalCost::Kind::Linear;
  g.p = std::move(p);
  return g;
}

TerminalCost clipped_linear_cost(VectorXd p, double amp) {
  if (!(amp > 0.0)) throw std::invalid_argument("clipped_linear_cost: amp must be > 0");
  TerminalCost g;
  g.kind = TerminalCost::Kind::ClippedLinear;
  g.p = std::move(p);
  g.amp = amp;
  return g;
}

TerminalCost bump_cost(VectorXd center, double width, double height) {
  if (!(width > 0.0)) throw std::invalid_argument("bump_cost: width must be > 0");
  TerminalCost g;
  g.kind = TerminalCost::Kind::GaussianBump;
  g.center = std::move(center);
  g.width = width;
  g.height = height;
  return g;
}

// ---------- sample-parallel map ----------

namespace {

// (1/n)(log sum_k e^{n(vals_k - max)} - log N) + max, with the weight
// diagnostics shared by every exponential estimator here.
struct ExpReduction {
  double value = 0.0;
  double ess = 0.0;
  double half_width = 0.0;
};

ExpReduction reduce_exponential(const std::vector<double>& vals, double n) {
  const int count = static_cast<int>(vals.size());
  const double m = *std::max_element(vals.begin(), vals.end());
  double s1 = 0.0, s2 = 0.0;
  for (double v : vals) {
    const double w = std::exp(n * (v - m));
    s1 += w;
    s2 += w * w;
  }
  ExpReduction out;
  out.value = m + (std::log(s1) - std::log(static_cast<double>(count))) / n;
  out.ess = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
  const double mean_w = s1 / count;
  const double var_w =
      count > 1 ? std::max(0.0, (s2 - count * mean_w * mean_w) / (count - 1)) : 0.0;
  // delta method on log(mean w): sd(v) = sd(w) / (mean w * sqrt(N) * n)
  out.half_width =
      mean_w > 0.0 ? 1.96 * std::sqrt(var_w / count) / (mean_w * n) : 0.0;
  return out;
}

}  // namespace

// ---------- estimators ----------

ValueEstimate laplace_functional(const galerkin::GalerkinSystem& sys,
                                 const noise::NoiseModel& model,
                                 const TerminalCost& g, const VectorXd& x0,
                                 double n, double T, int samples,
                                 std::uint64_t seed, double dt, int threads) {
  if (samples < 1) throw std::invalid_argument("laplace_functional: samples must be >= 1");
  if (!(n > 0.0)) throw std::invalid_argument("laplace_functional: n must be > 0");
  std::vector<double> gvals(samples);
  util::parallel_indexed(samples, threads, [&](int k) {
    const auto tr = simulate::simulate_mild(sys, model, x0, n, T, dt, seed, k);
    gvals[k] = g(tr.terminal());
  });
  const auto red = reduce_exponential(gvals, n);
  ValueEstimate est;
  est.value = red.value;
  est.n = n;
  est.samples = samples;
  est.ess = red.ess;
  est.half_width = red.half_width;
  // fewer than 10 effective paths counts as collapse only when weights
  // actually concentrated; a tiny balanced sample is small, not degenerate
  est.degenerate = red.ess < 10.0 && red.ess < 0.99 * samples;
  if (red.ess < 0.01 * samples)
    est.warning = "effective sample size below 1% of samples; the estimate rests on "
                  "few paths";
  return est;
}

std::vector<MomentRow> exp_moment_curve(const galerkin::GalerkinSystem& sys,
                                        const noise::NoiseModel& model,
                                        const VectorXd& x0, double T,
                                        const std::vector<double>& ns, double c1,
                                        int samples, std::uint64_t seed, double dt,
                                        int threads) {
  if (ns.empty()) throw std::invalid_argument("exp_moment_curve: ns is empty");
  for (size_t i = 1; i < ns.size(); ++i)
    if (ns[i] <= ns[i - 1])
      throw std::invalid_argument("exp_moment_curve: ns must be increasing");
  if (!(c1 > 0.0)) throw std::invalid_argument("exp_moment_curve: c1 must be > 0");

  std::vector<MomentRow> rows;
  rows.reserve(ns.size());
  std::vector<double> vals(samples);
  for (double n : ns) {
    util::parallel_indexed(samples, threads, [&](int k) {
      const auto tr = simulate::simulate_mild(sys, model, x0, n, T, dt, seed, k);
      vals[k] = c1 * tr.sup_norm;
    });
    const auto red = reduce_exponential(vals, n);
    rows.push_back({n, red.value, red.ess, red.ess < 10.0 && red.ess < 0.99 * samples});
  }
  return rows;
}

ContinuityReport continuity_suite(
    const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
    const std::vector<std::pair<VectorXd, VectorXd>>& pairs, double n, double T,
    int samples, std::uint64_t seed, double dt) {
  if (pairs.empty()) throw std::invalid_argument("continuity_suite: no pairs");
  if (samples < 1) throw std::invalid_argument("continuity_suite: samples must be >= 1");

  ContinuityReport rep;
  for (const auto& [x, y] : pairs) {
    util::RunningStat gap;
    for (int k = 0; k < samples; ++k) {
      const auto tx = simulate::simulate_mild(sys, model, x, n, T, dt, seed, k);
      const auto ty = simulate::simulate_mild(sys, model, y, n, T, dt, seed, k);
      const double d = galerkin::minus_one_norm(sys, tx.terminal() - ty.terminal());
      gap.add(d * d);
    }
    ContinuityReport::PairRow row;
    const double wd = galerkin::minus_one_norm(sys, x - y);
    row.weak_dist_sq = wd * wd;
    row.mean_gap_sq = gap.mean();
    row.ratio = row.weak_dist_sq > 0.0 ? row.mean_gap_sq / row.weak_dist_sq : 0.0;
    row.std_error = gap.std_error();
    rep.pairs.push_back(row);
    if (row.weak_dist_sq > 0.0)
      rep.pair_constant = std::max(rep.pair_constant, row.ratio);
  }

  // Time increments from the first pair's start, measured on the uniform grid
  // at s = T/8, T/4, T/2, T.
  const VectorXd& x = pairs.front().first;
  const double dt_eff = dt <= 0.0 ? T / 512 : dt;
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt_eff)));
  const double h = T / steps;
  std::vector<int> grid_index = {steps / 8, steps / 4, steps / 2, steps};
  for (int gi : grid_index)
    if (gi < 1) throw std::invalid_argument("continuity_suite: dt too coarse for the s grid");

  std::vector<util::RunningStat> weak(grid_index.size()), strong(grid_index.size());
  for (int k = 0; k < samples; ++k) {
    const auto tr = simulate::simulate_mild(sys, model, x, n, T, dt, seed, k);
    size_t pos = 0;
    for (size_t gi = 0; gi < grid_index.size(); ++gi) {
      const double target = grid_index[gi] * h;
      while (pos < tr.times.size() && tr.times[pos] != target) ++pos;
      if (pos == tr.times.size())
        throw util::NumericalError("continuity_suite: grid time missing");
      const VectorXd inc = tr.states[pos] - x;
      const double wnorm = galerkin::minus_one_norm(sys, inc);
      weak[gi].add(wnorm * wnorm);
      strong[gi].add(inc.squaredNorm());
    }
  }
  for (size_t gi = 0; gi < grid_index.size(); ++gi) {
    ContinuityReport::TimeRow row;
    row.s = grid_index[gi] * h;
    row.weak_increment_sq = weak[gi].mean();
    row.strong_increment_sq = strong[gi].mean();
    row.ratio = row.weak_increment_sq / row.s;
    rep.times.push_back(row);
    rep.time_constant = std::max(rep.time_constant, row.ratio);
  }
  return rep;
}

}  // namespace ldlab::laplace
