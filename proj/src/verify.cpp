#include "ldlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "ldlab/control.hpp"
#include "ldlab/rng.hpp"
#include "ldlab/simulate.hpp"
#include "ldlab/util.hpp"

namespace ldlab::verify {

using Eigen::VectorXd;

// ---------- tables ----------

std::size_t ValueTable::slice() const {
  std::size_t s = 1;
  for (const auto& ax : axes) s *= ax.size();
  return s;
}

double& ValueTable::at(int it, int i0, int i1) {
  const std::size_t n0 = axes[0].size();
  const std::size_t n1 = axes.size() == 2 ? axes[1].size() : 1;
  return values[(it * n0 + i0) * n1 + i1];
}

double ValueTable::at(int it, int i0, int i1) const {
  return const_cast<ValueTable*>(this)->at(it, i0, i1);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform_step(const std::vector<double>& grid, const char* what) {
  if (grid.size() < 3)
    throw std::invalid_argument(std::string(what) + ": need at least three nodes");
  const double step = grid[1] - grid[0];
  if (!(step > 0.0))
    throw std::invalid_argument(std::string(what) + ": grid must increase");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::fabs(grid[i] - grid[i - 1] - step) > 1e-9 * std::max(step, 1.0))
      throw std::invalid_argument(std::string(what) + ": grid must be uniform");
  return step;
}

void check_axes(std::size_t count) {
  if (count < 1 || count > 2)
    throw std::invalid_argument("value table: one or two space axes");
}

void check_table(const galerkin::GalerkinSystem& sys,
                 const noise::NoiseModel& model, const ValueTable& table) {
  check_axes(table.axes.size());
  if (sys.dim != table.dim() || model.dim() != table.dim())
    throw std::invalid_argument("value table: dimension mismatch");
  if (table.values.size() != table.ts.size() * table.slice())
    throw std::invalid_argument("value table: wrong number of values");
}

// <-Ax + F(x), Dv>, the first-order transport part of both equations.
double transport_term(const galerkin::GalerkinSystem& sys, const VectorXd& x,
                      const VectorXd& dv) {
  VectorXd field = -(sys.A * x);
  if (sys.f_kind != galerkin::DriftKind::Zero) field += sys.drift(x);
  return field.dot(dv);
}

int resolve_workers(int threads) {
  if (threads > 0) return threads;
  int w = static_cast<int>(std::thread::hardware_concurrency());
  if (w <= 0) w = 1;
  return std::min(w, 16);
}

}  // namespace

ValueTable tabulate_function(const ValueFn& v, std::vector<double> ts,
                             std::vector<std::vector<double>> axes) {
  check_axes(axes.size());
  if (ts.empty() || axes[0].empty() || (axes.size() == 2 && axes[1].empty()))
    throw std::invalid_argument("tabulate_function: empty grid");
  ValueTable out;
  out.ts = std::move(ts);
  out.axes = std::move(axes);
  out.values.resize(out.ts.size() * out.slice());
  const int n0 = static_cast<int>(out.axes[0].size());
  const int n1 = out.dim() == 2 ? static_cast<int>(out.axes[1].size()) : 1;
  VectorXd x(out.dim());
  for (int it = 0; it < static_cast<int>(out.ts.size()); ++it)
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1) {
        x[0] = out.axes[0][i0];
        if (out.dim() == 2) x[1] = out.axes[1][i1];
        out.at(it, i0, i1) = v(out.ts[it], x);
      }
  return out;
}

ValueTable tabulate_value(const galerkin::GalerkinSystem& sys,
                          const noise::NoiseModel& model,
                          const laplace::TerminalCost& g,
                          std::vector<double> ts,
                          std::vector<std::vector<double>> axes, int intervals,
                          int restarts, std::uint64_t seed, double dt,
                          int threads) {
  check_axes(axes.size());
  if (sys.dim != static_cast<int>(axes.size()) || model.dim() != sys.dim)
    throw std::invalid_argument("tabulate_value: dimension mismatch");
  if (ts.size() < 2 || !(ts.back() > ts.front()))
    throw std::invalid_argument("tabulate_value: need an increasing time grid");
  ValueTable out;
  out.ts = std::move(ts);
  out.axes = std::move(axes);
  out.values.resize(out.ts.size() * out.slice());
  const double T = out.ts.back();
  const int n0 = static_cast<int>(out.axes[0].size());
  const int n1 = out.dim() == 2 ? static_cast<int>(out.axes[1].size()) : 1;
  const int total = static_cast<int>(out.values.size());

  // nodes are expensive solves, so always spread them over a pool
  util::parallel_indexed(total, resolve_workers(threads), [&](int k) {
    const int i1 = k % n1;
    const int i0 = (k / n1) % n0;
    const int it = k / (n0 * n1);
    VectorXd x(out.dim());
    x[0] = out.axes[0][i0];
    if (out.dim() == 2) x[1] = out.axes[1][i1];
    const double horizon = T - out.ts[it];
    out.values[k] =
        horizon <= 1e-12
            ? g(x)
            : control::maximize_value(sys, model, g, x, horizon, intervals,
                                      restarts, seed, dt)
                  .value;
  });
  return out;
}

// ---------- limit equation residual ----------

ResidualReport hjb_residual(const galerkin::GalerkinSystem& sys,
                            const noise::NoiseModel& model,
                            const ValueTable& table, double kink_factor) {
  check_table(sys, model, table);
  const double ht = uniform_step(table.ts, "hjb_residual: time");
  const double h0 = uniform_step(table.axes[0], "hjb_residual: axis 0");
  const int d = table.dim();
  const double h1 = d == 2 ? uniform_step(table.axes[1], "hjb_residual: axis 1") : 1.0;
  const int nt = static_cast<int>(table.ts.size());
  const int n0 = static_cast<int>(table.axes[0].size());
  const int n1 = d == 2 ? static_cast<int>(table.axes[1].size()) : 1;

  struct Node {
    int it, i0, i1;
    double sd;
  };
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(nt) * n0 * (d == 2 ? n1 : 1));
  const int i1_lo = d == 2 ? 1 : 0;
  const int i1_hi = d == 2 ? n1 - 1 : 1;
  for (int it = 1; it + 1 < nt; ++it)
    for (int i0 = 1; i0 + 1 < n0; ++i0)
      for (int i1 = i1_lo; i1 < i1_hi; ++i1) {
        const double c = table.at(it, i0, i1);
        double sd = std::fabs(table.at(it + 1, i0, i1) - 2 * c +
                              table.at(it - 1, i0, i1));
        sd = std::max(sd, std::fabs(table.at(it, i0 + 1, i1) - 2 * c +
                                    table.at(it, i0 - 1, i1)));
        if (d == 2)
          sd = std::max(sd, std::fabs(table.at(it, i0, i1 + 1) - 2 * c +
                                      table.at(it, i0, i1 - 1)));
        nodes.push_back({it, i0, i1, sd});
      }

  std::vector<double> sds(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) sds[k] = nodes[k].sd;
  std::nth_element(sds.begin(), sds.begin() + sds.size() / 2, sds.end());
  const double median = sds[sds.size() / 2];

  ResidualReport rep;
  VectorXd x(d), dv(d);
  for (const auto& node : nodes) {
    if (node.sd > kink_factor * median) {
      ++rep.excluded;
      continue;
    }
    ++rep.points;
    const double vt =
        (table.at(node.it + 1, node.i0, node.i1) -
         table.at(node.it - 1, node.i0, node.i1)) /
        (2 * ht);
    dv[0] = (table.at(node.it, node.i0 + 1, node.i1) -
             table.at(node.it, node.i0 - 1, node.i1)) /
            (2 * h0);
    if (d == 2)
      dv[1] = (table.at(node.it, node.i0, node.i1 + 1) -
               table.at(node.it, node.i0, node.i1 - 1)) /
              (2 * h1);
    x[0] = table.axes[0][node.i0];
    if (d == 2) x[1] = table.axes[1][node.i1];
    const double residual =
        vt + transport_term(sys, x, dv) +
        noise::laplace_exponent(model, sys.diffusion_t(x, dv));
    rep.max_residual = std::max(rep.max_residual, std::fabs(residual));
    if (d == 1) {
      rep.node_t.push_back(table.ts[node.it]);
      rep.node_x.push_back(x[0]);
      rep.node_residual.push_back(residual);
    }
  }
  return rep;
}

// ---------- prelimit equation residual ----------

ResidualReport integro_pde_residual(const galerkin::GalerkinSystem& sys,
                                    const noise::NoiseModel& model,
                                    const ValueFn& v_n, double n,
                                    const std::vector<double>& ts,
                                    const std::vector<VectorXd>& xs,
                                    int samples, std::uint64_t seed) {
  if (model.variant != noise::Variant::CompoundPoissonGaussian)
    throw std::invalid_argument("integro_pde_residual: compound Poisson only");
  if (!(n > 0) || samples < 1 || ts.empty() || xs.empty())
    throw std::invalid_argument("integro_pde_residual: bad arguments");
  const int d = sys.dim;
  if (model.dim() != d)
    throw std::invalid_argument("integro_pde_residual: dimension mismatch");
  for (const auto& x : xs)
    if (x.size() != d)
      throw std::invalid_argument("integro_pde_residual: point dimension mismatch");

  const VectorXd q_sqrt = model.q_spectrum.cwiseSqrt();
  const double delta = 1e-4;  // difference step; the fields are smooth
  ResidualReport rep;
  rep.points = static_cast<int>(ts.size() * xs.size());

  for (std::size_t pi = 0; pi < ts.size() * xs.size(); ++pi) {
    const double t = ts[pi / xs.size()];
    const VectorXd& x = xs[pi % xs.size()];

    const double vt = (v_n(t + delta, x) - v_n(t - delta, x)) / (2 * delta);
    VectorXd dv(d), xp = x;
    for (int k = 0; k < d; ++k) {
      xp[k] = x[k] + delta;
      const double hi = v_n(t, xp);
      xp[k] = x[k] - delta;
      dv[k] = (hi - v_n(t, xp)) / (2 * delta);
      xp[k] = x[k];
    }

    const double v0 = v_n(t, x);
    rng::Substream rs(seed, pi);
    util::RunningStat stat;
    long clipped = 0;
    VectorXd z(d);
    for (int k = 0; k < samples; ++k) {
      for (int j = 0; j < d; ++j) z[j] = q_sqrt[j] * rs.normal();
      const VectorXd gz = sys.diffusion_apply(x, z);
      double expo = n * (v_n(t, x + gz / n) - v0);
      if (expo > 700.0) {
        expo = 700.0;
        ++clipped;
      }
      stat.add(std::exp(expo) - 1.0 - dv.dot(gz));
    }
    rep.clipped += clipped;

    const double residual = vt + transport_term(sys, x, dv) + stat.mean();
    if (pi == 0 || std::fabs(residual) > rep.max_residual) {
      rep.max_residual = std::fabs(residual);
      rep.std_error = stat.std_error();
    }
  }
  return rep;
}

// ---------- Monte Carlo vs control value ----------

LimitReport laplace_limit_convergence(
    const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
    const laplace::TerminalCost& g, const VectorXd& x0, double T,
    const std::vector<double>& ns, int samples, std::uint64_t seed,
    int intervals, int restarts, double dt, int threads) {
  if (ns.empty())
    throw std::invalid_argument("laplace_limit_convergence: no n values");
  const auto best =
      control::maximize_value(sys, model, g, x0, T, intervals, restarts, seed, dt);
  LimitReport rep;
  rep.v = best.value;
  rep.optimizer_converged = best.converged;
  rep.rows.reserve(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto est =
        laplace::laplace_functional(sys, model, g, x0, ns[i], T, samples,
                                    seed + 1000003ull * (i + 1), dt, threads);
    LimitRow row;
    row.n = ns[i];
    row.v_n = est.value;
    row.half_width = est.half_width;
    row.gap = std::fabs(est.value - rep.v);
    row.degenerate = est.degenerate;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------- duality suite ----------

SuiteReport legendre_duality_suite(const noise::NoiseModel& model, int points,
                                   std::uint64_t seed) {
  if (points < 1)
    throw std::invalid_argument("legendre_duality_suite: need sample points");
  const int d = model.dim();
  const VectorXd q_sqrt = model.q_spectrum.cwiseSqrt();
  const std::vector<double> epss = {1.0, 0.5, 0.1};
  std::vector<double> n_eps;
  for (double e : epss) n_eps.push_back(noise::norm_domination_constant(model, e));

  double fy = -kInf, growth = -kInf;
  std::vector<double> dom(epss.size(), -kInf);
  rng::Substream rs(seed, 0);
  VectorXd z(d), p(d);
  for (int k = 0; k < points; ++k) {
    const double zs = std::pow(10.0, 2.0 * rs.uniform() - 1.0);
    const double ps = std::pow(10.0, 2.0 * rs.uniform() - 1.0);
    for (int j = 0; j < d; ++j) z[j] = zs * q_sqrt[j] * rs.normal();
    for (int j = 0; j < d; ++j) p[j] = ps * rs.normal();
    // keep H0(p) inside double range; the inequality holds for every p, so
    // shrinking a too-hot probe loses nothing
    const double wp = (q_sqrt.array() * p.array()).matrix().norm();
    if (wp > 30.0) p *= 30.0 / wp;

    const double l0 = noise::legendre_cost(model, z);
    fy = std::max(fy, p.dot(z) - l0 - noise::laplace_exponent(model, p));
    const double zn = z.norm();
    if (zn > 0.0) {
      growth = std::max(
          growth, zn - noise::laplace_exponent(model, VectorXd(z / zn)) - l0);
      for (std::size_t e = 0; e < epss.size(); ++e)
        dom[e] = std::max(dom[e], zn - epss[e] * l0 - n_eps[e]);
    }
  }

  SuiteReport rep;
  rep.suite = "legendre";
  const auto push = [&rep](std::string name, double measured) {
    Check c;
    c.name = std::move(name);
    c.measured = measured;
    c.threshold = 1e-9;
    c.pass = measured <= c.threshold;
    rep.checks.push_back(std::move(c));
  };
  push("fenchel-young worst violation", fy);
  push("growth bound worst violation", growth);
  push("norm domination eps=1.0 worst violation", dom[0]);
  push("norm domination eps=0.5 worst violation", dom[1]);
  push("norm domination eps=0.1 worst violation", dom[2]);
  return rep;
}

// ---------- yosida suite ----------

SuiteReport yosida_convergence_suite(const galerkin::GalerkinSystem& sys,
                                     const noise::NoiseModel& model,
                                     const VectorXd& x0, double n, double T,
                                     const std::vector<double>& lambdas,
                                     int paths, std::uint64_t seed, double dt) {
  if (lambdas.size() < 2)
    throw std::invalid_argument("yosida_convergence_suite: need two lambdas");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1]))
      throw std::invalid_argument("yosida_convergence_suite: lambdas must increase");
  if (lambdas.back() < 100.0 * lambdas.front())
    throw std::invalid_argument(
        "yosida_convergence_suite: span at least two decades of lambda");

  const auto rows =
      simulate::pathwise_sup_gap(sys, model, x0, n, T, dt, lambdas, paths, seed);

  SuiteReport rep;
  rep.suite = "yosida";

  Check quarter;
  quarter.name = "pathwise mean-square sup gap quarters over the span";
  quarter.measured = rows.back().mean_sq_gap;
  quarter.threshold = rows.front().mean_sq_gap / 4.0;
  quarter.ci = 2.0 * (rows.back().std_error + rows.front().std_error / 4.0);
  quarter.pass = quarter.measured <= quarter.threshold + quarter.ci;
  rep.checks.push_back(quarter);

  Check monotone;
  monotone.name = "pathwise gap decreasing within noise";
  monotone.measured = 0.0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double slackless = rows[i + 1].mean_sq_gap - rows[i].mean_sq_gap -
                             2.0 * (rows[i].std_error + rows[i + 1].std_error);
    monotone.measured = std::max(monotone.measured, slackless);
  }
  monotone.threshold = 0.0;
  monotone.pass = monotone.measured <= 0.0;
  rep.checks.push_back(monotone);

  // noiseless counterpart: exact semigroups on a fixed comparison grid
  const auto det_gap = [&](double lambda) {
    const auto approx = galerkin::yosida_system(sys, lambda);
    double worst = 0.0;
    for (int k = 1; k <= 64; ++k) {
      const double t = T * k / 64.0;
      worst = std::max(worst, (galerkin::semigroup_apply(approx, t, x0) -
                               galerkin::semigroup_apply(sys, t, x0))
                                  .norm());
    }
    return worst;
  };
  Check det;
  det.name = "deterministic semigroup gap quarters over the span";
  det.measured = det_gap(lambdas.back());
  det.threshold = det_gap(lambdas.front()) / 4.0;
  det.pass = det.measured <= det.threshold;
  rep.checks.push_back(det);
  return rep;
}

// ---------- ldp bracketing ----------

bool ldp_bracket_holds(const std::vector<LdpRow>& rows, double inf_closed,
                       double inf_open, bool feasible) {
  if (!feasible) return false;
  bool any = false;
  for (const auto& row : rows) {
    if (row.flagged) continue;
    any = true;
    if (row.rate < inf_closed - 2.0 * row.ci || row.rate > inf_open + 2.0 * row.ci)
      return false;
  }
  return any;
}

LdpReport ldp_probability_check(const galerkin::GalerkinSystem& sys,
                                const noise::NoiseModel& model,
                                const VectorXd& x0, double T, double center,
                                double radius, const std::vector<double>& ns,
                                int samples, std::uint64_t seed, double dt,
                                int grid_points, int threads) {
  if (sys.dim != 1 || model.dim() != 1)
    throw std::invalid_argument("ldp_probability_check: one-dimensional only");
  if (ns.empty() || samples < 1 || !(radius > 0.0) || grid_points < 3)
    throw std::invalid_argument("ldp_probability_check: bad arguments");

  LdpReport rep;
  rep.rows.reserve(ns.size());
  for (std::size_t a = 0; a < ns.size(); ++a) {
    const double n = ns[a];
    std::vector<unsigned char> hit(samples, 0);
    const std::uint64_t row_seed = seed + 1000003ull * a;
    util::parallel_indexed(samples, threads, [&](int k) {
      const auto tr = simulate::simulate_mild(sys, model, x0, n, T, dt, row_seed,
                                              static_cast<std::uint64_t>(k));
      hit[k] = std::fabs(tr.terminal()[0] - center) <= radius ? 1 : 0;
    });
    LdpRow row;
    row.n = n;
    for (unsigned char h : hit) row.hits += h;
    row.p_hat = static_cast<double>(row.hits) / samples;
    if (row.hits == 0) {
      row.flagged = true;
      row.rate = kInf;
    } else {
      row.rate = -std::log(row.p_hat) / n;
      row.ci = (1.96 / n) * std::sqrt((1.0 - row.p_hat) / (samples * row.p_hat));
    }
    rep.rows.push_back(row);
  }

  std::size_t smallest = 0;
  for (std::size_t a = 1; a < ns.size(); ++a)
    if (ns[a] < ns[smallest]) smallest = a;
  rep.feasible = rep.rows[smallest].p_hat > 10.0 / samples;

  const auto targets = util::linspace(center - radius, center + radius, grid_points);
  rep.inf_closed = kInf;
  rep.inf_open = kInf;
  for (int j = 0; j < grid_points; ++j) {
    VectorXd y(1);
    y << targets[j];
    const auto rr = control::rate_function(sys, model, x0, y, T, 16, 2, seed);
    rep.inf_closed = std::min(rep.inf_closed, rr.value);
    if (j > 0 && j + 1 < grid_points)
      rep.inf_open = std::min(rep.inf_open, rr.value);
  }

  rep.pass = ldp_bracket_holds(rep.rows, rep.inf_closed, rep.inf_open, rep.feasible);
  return rep;
}

}  // namespace ldlab::verify
