#include "ldlab/experiments.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <cstdio>
#include <string>
#include <vector>

#include "ldlab/control.hpp"
#include "ldlab/galerkin.hpp"
#include "ldlab/laplace.hpp"
#include "ldlab/noise.hpp"
#include "ldlab/simulate.hpp"
#include "ldlab/util.hpp"
#include "ldlab/verify.hpp"

namespace ldlab::experiments {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

template <class... Args>
std::string fmt(const char* f, Args... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

// A = 0, F = 0, G = identity: the skeleton is frozen and every endpoint
// statement has a closed form.
galerkin::GalerkinSystem free_system(int d) {
  return galerkin::make_generic(MatrixXd::Zero(d, d));
}

// -------------------------------------------------------------------------
// 1. linear-oracle: Monte Carlo and the control solver against T H0(p).

Outcome linear_oracle(std::uint64_t seed, int threads) {
  Outcome out{"linear-oracle", 1, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.5);
  const auto g = laplace::linear_cost(p);
  const VectorXd x0 = VectorXd::Zero(1);
  const double T = 1.0;
  const double v_true = T * noise::laplace_exponent(model, p);

  double worst_dev = 0.0;
  json rows = json::array();
  for (double n : {1.0, 5.0, 20.0}) {
    const auto est =
        laplace::laplace_functional(sys, model, g, x0, n, T, 100000, seed,
                                    -1.0, threads);
    const double dev = est.half_width > 0.0
                           ? std::fabs(est.value - v_true) / est.half_width
                           : std::numeric_limits<double>::infinity();
    worst_dev = std::max(worst_dev, dev);
    rows.push_back({{"n", n},
                    {"v_n", est.value},
                    {"ci", est.half_width},
                    {"gap", std::fabs(est.value - v_true)}});
  }

  const auto opt = control::maximize_value(sys, model, g, x0, T, 16, 4, seed);
  const double opt_rel = std::fabs(opt.value - v_true) / v_true;

  out.pass = worst_dev <= 3.0 && opt_rel <= 1e-3;
  out.details = fmt("v*=%.6f, worst |v_n-v*| = %.2f half-widths (<=3), "
                    "control solve rel err %.2e (<=1e-3)",
                    v_true, worst_dev, opt_rel);
  out.artifacts = {{"v", v_true},
                   {"rows", rows},
                   {"optimizer_value", opt.value},
                   {"optimizer_rel_err", opt_rel}};
  return out;
}

// -------------------------------------------------------------------------
// 2. legendre-closed-form: independent conjugation of h against l.

Outcome legendre_closed_form(std::uint64_t, int) {
  Outcome out{"legendre-closed-form", 2, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(1.0));

  // sup_u (s u - h(u)) by ternary search: the objective is strictly concave,
  // and h'(8) is astronomically larger than the top of the s grid, so the
  // maximizer lies inside [0, 8].
  const auto conjugate = [&](double s) {
    double lo = 0.0, hi = 8.0;
    for (int i = 0; i < 200; ++i) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      const double f1 = s * m1 - noise::radial_exponent(model, m1);
      const double f2 = s * m2 - noise::radial_exponent(model, m2);
      if (f1 < f2)
        lo = m1;
      else
        hi = m2;
    }
    const double u = 0.5 * (lo + hi);
    return s * u - noise::radial_exponent(model, u);
  };

  double worst = 0.0;
  json rows = json::array();
  const auto grid = util::linspace(0.0, 10.0, 200);
  for (double s : grid) {
    const double closed = noise::radial_cost(model, s);
    const double num = conjugate(s);
    worst = std::max(worst, std::fabs(closed - num));
    rows.push_back({{"s", s}, {"closed", closed}, {"conjugated", num}});
  }

  const bool zero_exact = noise::legendre_cost(model, vec1(0.0)) == 0.0;
  const auto kernel_model = noise::make_compound_poisson(vec2(1.0, 1e-16));
  const bool kernel_inf =
      std::isinf(noise::legendre_cost(kernel_model, vec2(0.0, 1.0)));

  out.pass = worst <= 1e-5 && zero_exact && kernel_inf;
  out.details = fmt("max |closed - conjugated| = %.2e over 200 points (<=1e-5), "
                    "L0(0)=0 %s, kernel direction +inf %s",
                    worst, zero_exact ? "exact" : "VIOLATED",
                    kernel_inf ? "ok" : "VIOLATED");
  out.artifacts = {{"rows", rows}, {"worst_gap", worst}};
  return out;
}

// -------------------------------------------------------------------------
// 3. duality-bounds: Fenchel-Young, growth, and norm domination on samples.

Outcome duality_bounds(std::uint64_t seed, int) {
  Outcome out{"duality-bounds", 3, false, "", {}};
  const auto model = noise::make_compound_poisson(vec2(1.0, 4.0));
  const auto rep = verify::legendre_duality_suite(model, 10000, seed);

  json checks = json::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"measured", c.measured},
                      {"threshold", c.threshold}});
    worst = std::max(worst, c.measured);
  }
  out.pass = rep.pass();
  out.details = fmt("%zu checks on 10^4 sampled z, worst violation %.2e "
                    "(threshold 1e-9)",
                    rep.checks.size(), worst);
  out.artifacts = {{"checks", checks}};
  return out;
}

// -------------------------------------------------------------------------
// 4. laplace-limit: the n=20 estimate sits within 0.05 of the control value
//    and within CI slack of the n=2 gap.

Outcome laplace_limit(std::uint64_t seed, int threads) {
  Outcome out{"laplace-limit", 4, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(0.6));
  const auto sys = galerkin::make_diagonal_system(vec1(1.0));
  const auto g = laplace::bump_cost(vec1(0.3), 0.5, 0.8);
  const auto rep = verify::laplace_limit_convergence(
      sys, model, g, vec1(0.2), 1.0, {2.0, 20.0}, 100000, seed, 16, 4, -1.0,
      threads);

  const auto& lo = rep.rows[0];
  const auto& hi = rep.rows[1];
  const double slack = 3.0 * (lo.half_width + hi.half_width);
  const bool healthy =
      rep.optimizer_converged && !lo.degenerate && !hi.degenerate;
  out.pass = healthy && hi.gap < 0.05 && hi.gap <= lo.gap + slack;
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"n", r.n},
                    {"v_n", r.v_n},
                    {"ci", r.half_width},
                    {"gap", r.gap},
                    {"degenerate", r.degenerate}});
  out.details = fmt("v=%.5f; |v_n - v|: n=2 %.4f, n=20 %.4f (<0.05 and "
                    "<= n=2 gap + %.4f slack)%s",
                    rep.v, lo.gap, hi.gap, slack,
                    healthy ? "" : "; DEGENERATE estimate or optimizer failure");
  out.artifacts = {{"v", rep.v}, {"rows", rows}};
  return out;
}

// -------------------------------------------------------------------------
// 5. pde-residuals: zero-residual solutions and perturbed negative controls.

Outcome pde_residuals(std::uint64_t seed, int) {
  Outcome out{"pde-residuals", 5, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(0.8));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.5);
  const double T = 1.0;
  const double h0p = noise::laplace_exponent(model, p);
  const verify::ValueFn linear = [&](double t, const VectorXd& x) {
    return p.dot(x) + (T - t) * h0p;
  };
  const verify::ValueFn bent = [&](double t, const VectorXd& x) {
    return linear(t, x) + 0.1 * std::sin(4.0 * x[0]);
  };

  const auto ts = util::linspace(0.0, 1.0, 17);
  const auto xs = util::linspace(-1.0, 1.0, 17);
  const auto clean = verify::hjb_residual(
      sys, model, verify::tabulate_function(linear, ts, {xs}));
  const auto bad = verify::hjb_residual(
      sys, model, verify::tabulate_function(bent, ts, {xs}));
  // The grid residual is deterministic, so "below noise" means below 1e-6
  // here and the negative control must exceed ten times the clean level.
  const bool hjb_ok = clean.max_residual < 1e-6 &&
                      bad.max_residual > 10.0 * std::max(clean.max_residual, 1e-8);

  std::vector<VectorXd> points = {vec1(-0.5), vec1(0.2), vec1(1.0)};
  const auto ic = verify::integro_pde_residual(sys, model, linear, 5.0,
                                               {0.25, 0.5, 0.75}, points, 20000,
                                               seed);
  const auto ib = verify::integro_pde_residual(sys, model, bent, 5.0,
                                               {0.25, 0.5, 0.75}, points, 20000,
                                               seed);
  const bool integro_ok = ic.max_residual < 3.0 * ic.std_error &&
                          ib.max_residual > 10.0 * ib.std_error;

  out.pass = hjb_ok && integro_ok;
  out.details = fmt("hjb: analytic %.1e, perturbed %.2f (>10x); prelimit: "
                    "analytic %.4f vs 3se=%.4f, perturbed %.3f vs 10se=%.4f",
                    clean.max_residual, bad.max_residual, ic.max_residual,
                    3.0 * ic.std_error, ib.max_residual, 10.0 * ib.std_error);
  json nodes = json::array();
  for (std::size_t k = 0; k < clean.node_t.size(); ++k)
    nodes.push_back({{"t", clean.node_t[k]},
                     {"x", clean.node_x[k]},
                     {"residual", clean.node_residual[k]}});
  out.artifacts = {{"hjb_analytic", clean.max_residual},
                   {"hjb_perturbed", bad.max_residual},
                   {"integro_analytic", ic.max_residual},
                   {"integro_analytic_se", ic.std_error},
                   {"integro_perturbed", ib.max_residual},
                   {"integro_perturbed_se", ib.std_error},
                   {"hjb_nodes", nodes}};
  return out;
}

// -------------------------------------------------------------------------
// 6. rate-oracle: steering costs against T l(|y - x0|/T) in the frozen case.

Outcome rate_oracle(std::uint64_t seed, int) {
  Outcome out{"rate-oracle", 6, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  const VectorXd x0 = VectorXd::Zero(1);
  const double T = 1.0;
  const double root_e = std::exp(0.5);

  double worst_rel = 0.0;
  json rows = json::array();
  bool all_reachable = true;
  for (double y : {0.2, -0.2, 0.5, -0.5, 0.8, -0.8, 1.2, -1.2, root_e, -root_e}) {
    const auto res = control::rate_function(sys, model, x0, vec1(y), T, 16, 2, seed);
    const double oracle = T * noise::radial_cost(model, std::fabs(y) / T);
    const double rel = std::fabs(res.value - oracle) / oracle;
    worst_rel = std::max(worst_rel, rel);
    all_reachable = all_reachable && res.reachable;
    rows.push_back({{"target", y},
                    {"rate", res.value},
                    {"oracle", oracle},
                    {"reachable", res.reachable}});
  }

  const auto trivial = control::rate_function(sys, model, x0, x0, T, 16, 2, seed);
  const auto kernel_model = noise::make_compound_poisson(vec2(1.0, 1e-16));
  const auto kernel = control::rate_function(free_system(2), kernel_model,
                                             VectorXd::Zero(2), vec2(0.3, 0.4),
                                             T, 16, 2, seed);

  out.pass = worst_rel <= 1e-3 && all_reachable && trivial.value < 1e-6 &&
             std::isinf(kernel.value);
  out.details = fmt("worst rel err %.2e over 10 targets (<=1e-3), "
                    "uncontrolled endpoint I=%.1e (<1e-6), kernel target %s",
                    worst_rel, trivial.value,
                    std::isinf(kernel.value) ? "+inf" : "FINITE");
  out.artifacts = {{"rows", rows},
                   {"uncontrolled", trivial.value},
                   {"kernel_is_inf", std::isinf(kernel.value)}};
  return out;
}

// -------------------------------------------------------------------------
// 7. ldp-bracket: empirical decay rates of a ball probability against the
//    rate function. The one-sided (Chernoff) comparison is solid at these n;
//    the two-sided bracket carries the log-prefactor/n term, reported as
//    measured.

Outcome ldp_bracket(std::uint64_t seed, int threads) {
  Outcome out{"ldp-bracket", 7, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  // Ball chosen so inf_B I is about 0.5: inner edge 1.0879, l(1.0879) ~ 0.493.
  // The frozen system has an exact endpoint law for any grid, so a coarse
  // recording grid keeps 3x10^6 paths affordable.
  const auto rep = verify::ldp_probability_check(sys, model, VectorXd::Zero(1),
                                                 1.0, 1.4379, 0.35,
                                                 {5.0, 10.0, 20.0}, 1000000,
                                                 seed, 0.125, 21, threads);

  json rows = json::array();
  std::string per_n;
  bool chernoff_ok = rep.feasible;
  for (const auto& r : rep.rows) {
    rows.push_back({{"n", r.n},
                    {"rate", r.rate},
                    {"ci", r.ci},
                    {"hits", r.hits},
                    {"p_hat", r.p_hat},
                    {"flagged", r.flagged}});
    if (!r.flagged) {
      chernoff_ok = chernoff_ok && r.rate >= rep.inf_closed - 2.0 * r.ci;
      per_n += fmt(" n=%g: %+.3f,", r.n,
                   r.rate - (rep.inf_open + 2.0 * r.ci));
    }
  }
  if (!per_n.empty()) per_n.pop_back();

  out.pass = rep.pass;
  out.details = fmt("inf I: closed %.3f, open %.3f; rate minus upper bracket "
                    "edge:%s; lower (Chernoff) side %s",
                    rep.inf_closed, rep.inf_open, per_n.c_str(),
                    chernoff_ok ? "holds" : "VIOLATED");
  out.artifacts = {{"rows", rows},
                   {"inf_closed", rep.inf_closed},
                   {"inf_open", rep.inf_open},
                   {"feasible", rep.feasible},
                   {"chernoff_side", chernoff_ok}};
  return out;
}

// -------------------------------------------------------------------------
// 8. yosida-gap: coupled mean-square sup gap quarters from lambda=1 to 10^3.

Outcome yosida_gap(std::uint64_t seed, int) {
  Outcome out{"yosida-gap", 8, false, "", {}};
  VectorXd q(8), x0(8);
  for (int k = 0; k < 4; ++k) {
    q[2 * k] = std::pow(0.5, 2 * k);
    q[2 * k + 1] = std::pow(0.5, 2 * k + 1);
    x0[2 * k] = 0.5 / (k + 1);
    x0[2 * k + 1] = -0.2 / (k + 1);
  }
  const auto model = noise::make_compound_poisson(q);
  const auto sys = galerkin::build_wave_system(4);
  const auto rows = simulate::pathwise_sup_gap(sys, model, x0, 2.0, 1.0,
                                               1.0 / 64.0, {1.0, 1000.0}, 1000,
                                               seed);

  const double g1 = rows[0].mean_sq_gap, g3 = rows[1].mean_sq_gap;
  out.pass = g3 < 0.25 * g1;
  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"lambda", r.lambda},
                     {"mean_sq_gap", r.mean_sq_gap},
                     {"ci", 2.0 * r.std_error}});
  out.details = fmt("mean-square sup gap: lambda=1 %.3e, lambda=10^3 %.3e "
                    "(ratio %.2e, need <0.25) over 10^3 coupled paths",
                    g1, g3, g3 / g1);
  out.artifacts = {{"rows", jrows}};
  return out;
}

// -------------------------------------------------------------------------
// 9. moment-uniformity: the exponential-moment curve stays flat across n.

Outcome moment_uniformity(std::uint64_t seed, int threads) {
  Outcome out{"moment-uniformity", 9, false, "", {}};
  const auto model = noise::make_compound_poisson(vec1(0.6));
  const auto sys = galerkin::make_diagonal_system(vec1(1.0));
  const auto rows = laplace::exp_moment_curve(sys, model, vec1(0.2), 1.0,
                                              {5.0, 10.0, 20.0}, 0.1, 20000,
                                              seed, -1.0, threads);

  double lo = rows[0].value, hi = rows[0].value;
  bool healthy = true;
  json jrows = json::array();
  for (const auto& r : rows) {
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
    healthy = healthy && !r.degenerate;
    jrows.push_back({{"n", r.n},
                     {"value", r.value},
                     {"ess", r.ess},
                     {"degenerate", r.degenerate}});
  }
  out.pass = healthy && (hi - lo) < 0.5;
  out.details = fmt("(1/n) log E sup e^{0.1 n |X|} across n=5,10,20: spread "
                    "%.4f (<0.5)%s",
                    hi - lo, healthy ? "" : "; DEGENERATE estimate");
  out.artifacts = {{"rows", jrows}, {"spread", hi - lo}};
  return out;
}

// -------------------------------------------------------------------------
// 10. wave-certificates: skewness, the unit coercivity constant, and energy
//     conservation of the noiseless flow across truncation levels.

Outcome wave_certificates(std::uint64_t seed, int) {
  Outcome out{"wave-certificates", 10, false, "", {}};
  double worst_skew = 0.0, worst_energy = 0.0;
  bool bcond_ok = true;
  json rows = json::array();
  for (int modes : {1, 4, 16}) {
    const auto sys = galerkin::build_wave_system(modes);
    const auto rep = galerkin::check_structural(sys, 10000, seed);
    VectorXd x0(sys.dim);
    for (int i = 0; i < sys.dim; ++i) x0[i] = (i % 2 ? -0.4 : 0.7) / (1 + i / 2);
    const double e0 = x0.squaredNorm();
    double drift = 0.0;
    for (int k = 1; k <= 64; ++k) {
      const double t = k / 64.0;
      drift = std::max(drift, std::fabs(galerkin::semigroup_apply(sys, t, x0)
                                            .squaredNorm() -
                                        e0));
    }
    drift /= std::max(1.0, e0);
    worst_skew = std::max(worst_skew, rep.skew_defect);
    worst_energy = std::max(worst_energy, drift);
    bcond_ok = bcond_ok && rep.bcond_pass && sys.c0 == 1.0;
    rows.push_back({{"modes", modes},
                    {"skew", rep.skew_defect},
                    {"energy_drift", drift},
                    {"c0", sys.c0},
                    {"bcond", rep.bcond_pass}});
  }
  out.pass = worst_skew <= 1e-10 && worst_energy <= 1e-10 && bcond_ok;
  out.details = fmt("K=1,4,16: max skew defect %.1e (<=1e-10), max relative "
                    "energy drift %.1e (<=1e-10), coercivity with c0=1 %s",
                    worst_skew, worst_energy, bcond_ok ? "holds" : "VIOLATED");
  out.artifacts = {{"rows", rows}};
  return out;
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {
      "linear-oracle",  "legendre-closed-form", "duality-bounds",
      "laplace-limit",  "pde-residuals",        "rate-oracle",
      "ldp-bracket",    "yosida-gap",           "moment-uniformity",
      "wave-certificates"};
  return ids;
}

Outcome run_criterion(int criterion, std::uint64_t seed, int threads) {
  switch (criterion) {
    case 1: return linear_oracle(seed, threads);
    case 2: return legendre_closed_form(seed, threads);
    case 3: return duality_bounds(seed, threads);
    case 4: return laplace_limit(seed, threads);
    case 5: return pde_residuals(seed, threads);
    case 6: return rate_oracle(seed, threads);
    case 7: return ldp_bracket(seed, threads);
    case 8: return yosida_gap(seed, threads);
    case 9: return moment_uniformity(seed, threads);
    case 10: return wave_certificates(seed, threads);
    default: throw std::invalid_argument("criterion must be 1..10");
  }
}

Outcome run_experiment(const std::string& id, std::uint64_t seed, int threads) {
  const auto& ids = experiment_ids();
  for (int i = 0; i < static_cast<int>(ids.size()); ++i)
    if (ids[i] == id) return run_criterion(i + 1, seed, threads);
  throw std::invalid_argument("unknown experiment '" + id + "'");
}

}  // namespace ldlab::experiments
