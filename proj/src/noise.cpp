#include "ldlab/noise.hpp"

#include <algorithm>
#include <cmath>

#include "ldlab/rng.hpp"

namespace ldlab::noise {
namespace {

using util::NumericalError;

// ---------- Gauss-Legendre 16 panel quadrature ----------

constexpr double kGlNode[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kGlWeight[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

template <typename F>
double gl16(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 8; ++i)
    acc += kGlWeight[i] * (f(c - h * kGlNode[i]) + f(c + h * kGlNode[i]));
  return acc * h;
}

template <typename F>
double composite(F&& f, double a, double b, int panels) {
  const double w = (b - a) / panels;
  double acc = 0.0;
  for (int k = 0; k < panels; ++k) acc += gl16(f, a + k * w, a + (k + 1) * w);
  return acc;
}

// Doubles the panel count until two successive composites agree.
template <typename F>
double integrate_refined(F&& f, double a, double b, const char* name) {
  if (b <= a) return 0.0;
  double prev = composite(f, a, b, 8);
  for (int panels = 16; panels <= 8192; panels *= 2) {
    const double cur = composite(f, a, b, panels);
    if (std::fabs(cur - prev) <= 1e-11 * (1.0 + std::fabs(cur))) return cur;
    prev = cur;
  }
  throw NumericalError(std::string("quadrature did not converge: ") + name);
}

// ---------- subordinator density machinery ----------

// Scaled density of rho at t > 0 (PointMass excluded; it has no density).
double rho_density(const NoiseModel& m, double t) {
  switch (m.rho.kind) {
    case SubordinatorSpec::Kind::Tabulated: {
      const auto& k = m.rho.knots;
      const auto& d = m.rho.density;
      if (t <= k.front() || t >= k.back()) {
        if (t == k.front()) return m.rho_scale * d.front();
        if (t == k.back()) return m.rho_scale * d.back();
        return 0.0;
      }
      const auto it = std::upper_bound(k.begin(), k.end(), t);
      const size_t i = static_cast<size_t>(it - k.begin());
      const double w = (t - k[i - 1]) / (k[i] - k[i - 1]);
      return m.rho_scale * ((1 - w) * d[i - 1] + w * d[i]);
    }
    case SubordinatorSpec::Kind::Ne2Family: {
      const double delta = -m.rho.alpha;
      return m.rho_scale * std::pow(t, delta - 1.0) * std::exp(-t * t);
    }
    case SubordinatorSpec::Kind::PointMass:
      return 0.0;
  }
  return 0.0;
}

// integral of F(t) rho(dt) over (0, t_upper]. The Ne2 family is integrated
// in tau = t^delta coordinates, which removes the t^{delta-1} endpoint
// behavior for every delta > 0.
template <typename F>
double rho_integral(const NoiseModel& m, F&& fn, double t_upper, const char* name) {
  switch (m.rho.kind) {
    case SubordinatorSpec::Kind::PointMass: {
      const double t0 = m.rho.point_t;
      const double weight = m.rho_scale;  // scale = 1/t0 so E Z(1) = 1
      return t0 <= t_upper ? weight * fn(t0) : 0.0;
    }
    case SubordinatorSpec::Kind::Tabulated: {
      const double lo = m.rho.knots.front();
      const double hi = std::min(m.rho.knots.back(), t_upper);
      if (hi <= lo) return 0.0;
      auto g = [&](double t) { return fn(t) * rho_density(m, t); };
      double acc = 0.0;  // integrate per segment so density kinks align with panels
      for (size_t i = 1; i < m.rho.knots.size(); ++i) {
        const double a = std::max(lo, m.rho.knots[i - 1]);
        const double b = std::min(hi, m.rho.knots[i]);
        if (b > a) acc += integrate_refined(g, a, b, name);
      }
      return acc;
    }
    case SubordinatorSpec::Kind::Ne2Family: {
      const double delta = -m.rho.alpha;
      auto g = [&](double tau) {
        const double t = std::pow(tau, 1.0 / delta);
        return fn(t) * std::exp(-t * t);
      };
      const double tau_cap = std::pow(t_upper, delta);
      return (m.rho_scale / delta) * integrate_refined(g, 0.0, tau_cap, name);
    }
  }
  return 0.0;
}

// Effective upper end of the support for integration/sampling purposes.
double rho_support_cap(const NoiseModel& m) {
  switch (m.rho.kind) {
    case SubordinatorSpec::Kind::PointMass:
      return m.rho.point_t;
    case SubordinatorSpec::Kind::Tabulated:
      return m.rho.knots.back();
    case SubordinatorSpec::Kind::Ne2Family:
      return 8.0;  // e^{-64} tail, negligible against every tolerance used
  }
  return 0.0;
}

// h(u) by direct quadrature, extending the range until the tail stops
// contributing. Throws if the value would overflow a double.
double subordinated_exponent(const NoiseModel& m, double u, bool slope) {
  if (u == 0.0) return 0.0;
  const double half_u2 = 0.5 * u * u;
  const bool unbounded = m.rho.kind == SubordinatorSpec::Kind::Ne2Family;
  const double support = rho_support_cap(m);

  // Peak exponent of e^{t u^2/2} (times e^{-t^2} for the unbounded family,
  // whose peak sits at t = u^2/4 independent of the sampling support cap).
  const double peak = unbounded ? half_u2 * half_u2 / 4.0 : half_u2 * support;
  if (peak > 690.0)
    throw NumericalError("radial exponent overflows double range (tail integral)");

  const char* name = slope ? "subordinator slope integral" : "subordinator exponent integral";
  if (!unbounded) {
    auto fn = [&](double t) {
      return slope ? t * u * std::exp(half_u2 * t) : std::expm1(half_u2 * t);
    };
    return rho_integral(m, fn, support, name);
  }

  // Ne2 family: fuse the e^{-t^2} density factor into the exponent so large-t
  // probes never hit inf * 0, and integrate in tau = t^delta coordinates.
  const double delta = -m.rho.alpha;
  auto weighted = [&](double tau) {
    const double t = std::pow(tau, 1.0 / delta);
    const double e1 = half_u2 * t - t * t;  // bounded above by the peak guard
    if (slope) return t * u * std::exp(e1);
    return half_u2 * t > 700.0 ? std::exp(e1)
                               : std::exp(-t * t) * std::expm1(half_u2 * t);
  };
  auto integral_to = [&](double t_upper) {
    return (m.rho_scale / delta) *
           integrate_refined(weighted, 0.0, std::pow(t_upper, delta), name);
  };

  double upper = std::max(8.0, half_u2 + 8.0);
  double val = integral_to(upper);
  for (int i = 0; i < 6; ++i) {
    const double wider = integral_to(upper * 2);
    if (std::fabs(wider - val) <= 1e-12 * (1.0 + std::fabs(wider))) return wider;
    upper *= 2;
    val = wider;
  }
  throw NumericalError("subordinator exponent tail did not settle");
}

double table_or_direct_h(const NoiseModel& m, double u);

// ---------- Legendre machinery ----------

// Evaluate h for conjugation purposes: cheap cached path when available.
double conj_h(const NoiseModel& m, double u) {
  if (m.variant == Variant::CompoundPoissonGaussian) return std::expm1(0.5 * u * u);
  if (m.rho.kind == SubordinatorSpec::Kind::PointMass)
    return m.rho_scale * std::expm1(0.5 * m.rho.point_t * u * u);
  return table_or_direct_h(m, u);
}

}  // namespace

// ---------- cubic Hermite tables ----------

double CubicTable::eval(double x) const {
  const int n = static_cast<int>(value.size());
  if (x <= x0) return value.front();
  const double pos = (x - x0) / dx;
  const int i = std::min(static_cast<int>(pos), n - 2);
  const double t = pos - i;
  const double y0 = value[i], y1 = value[i + 1];
  const double d0 = slope[i] * dx, d1 = slope[i + 1] * dx;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 +
         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1;
}

double CubicTable::eval_slope(double x) const {
  const int n = static_cast<int>(value.size());
  if (x <= x0) return slope.front();
  const double pos = (x - x0) / dx;
  const int i = std::min(static_cast<int>(pos), n - 2);
  const double t = pos - i;
  const double y0 = value[i], y1 = value[i + 1];
  const double d0 = slope[i] * dx, d1 = slope[i + 1] * dx;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * d0 +
          (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * d1) / dx;
}

double CubicTable::x_max() const {
  return x0 + dx * (static_cast<double>(value.size()) - 1.0);
}

namespace {

double table_or_direct_h(const NoiseModel& m, double u) {
  if (!m.h_table.empty() && u <= m.h_table.x_max()) return m.h_table.eval(u);
  return subordinated_exponent(m, u, /*slope=*/false);
}

double table_or_direct_h_slope(const NoiseModel& m, double u) {
  if (!m.hslope_table.empty() && u <= m.hslope_table.x_max())
    return m.hslope_table.eval(u);
  return subordinated_exponent(m, u, /*slope=*/true);
}

void validate_spectrum(const Eigen::VectorXd& q) {
  if (q.size() == 0) throw std::invalid_argument("q_spectrum must be nonempty");
  bool any_positive = false;
  for (int i = 0; i < q.size(); ++i) {
    if (!(q[i] >= 0.0))
      throw std::invalid_argument("q_spectrum entries must be nonnegative");
    any_positive |= q[i] > 0.0;
  }
  if (!any_positive)
    throw std::invalid_argument("q_spectrum must have at least one positive entry");
}

void build_sampling_table(NoiseModel& m) {
  const double cap = rho_support_cap(m);
  m.support_cap = cap;
  if (m.rho.kind == SubordinatorSpec::Kind::PointMass) {
    m.rate_above_cut = m.rho.point_t >= m.eps_rho ? m.rho_scale : 0.0;
    m.mean_below_cut = m.rho.point_t < m.eps_rho ? 1.0 : 0.0;
    return;
  }
  m.mean_below_cut =
      rho_integral(m, [](double t) { return t; }, std::min(m.eps_rho, cap),
                   "small-jump mean integral");
  if (m.eps_rho >= cap) {
    m.rate_above_cut = 0.0;
    return;
  }

  // Per-cell masses of rho on [eps_rho, cap]; cumulative sums feed the
  // inverse-CDF sampler. Cells are fine enough that linear interpolation
  // within a cell is below Monte Carlo resolution.
  const int cells = 4096;
  const double lo = m.eps_rho;
  const double width = (cap - lo) / cells;
  m.cdf_t.resize(cells + 1);
  m.cdf_p.resize(cells + 1);
  m.cdf_t[0] = lo;
  m.cdf_p[0] = 0.0;
  for (int i = 0; i < cells; ++i) {
    const double a = lo + i * width;
    const double b = a + width;
    const double mass = gl16([&](double t) { return rho_density(m, t); }, a, b);
    m.cdf_t[i + 1] = b;
    m.cdf_p[i + 1] = m.cdf_p[i] + std::max(mass, 0.0);
  }
  m.rate_above_cut = m.cdf_p.back();
  if (!(m.rate_above_cut > 0.0) || !std::isfinite(m.rate_above_cut))
    throw std::invalid_argument("subordinator tail mass above the cutoff is not computable");
}

void build_exponent_tables(NoiseModel& m) {
  if (m.rho.kind == SubordinatorSpec::Kind::PointMass) return;  // closed form

  double u_hi = 2.0;
  while (subordinated_exponent(m, u_hi, true) < 1e6 && u_hi < 40.0) u_hi *= 1.25;

  const double du = 0.005;
  const int nodes = static_cast<int>(std::ceil(u_hi / du)) + 1;
  auto fill = [&](CubicTable& tab, bool slope_of_slope) {
    tab.x0 = 0.0;
    tab.dx = du;
    tab.value.resize(nodes);
    tab.slope.resize(nodes);
    for (int i = 0; i < nodes; ++i) {
      const double u = i * du;
      if (!slope_of_slope) {
        tab.value[i] = i == 0 ? 0.0 : subordinated_exponent(m, u, false);
        tab.slope[i] = i == 0 ? 0.0 : subordinated_exponent(m, u, true);
      } else {
        tab.value[i] = i == 0 ? 0.0 : subordinated_exponent(m, u, true);
        // h''(u) = integral t (1 + t u^2) e^{t u^2 / 2} rho(dt)
        const double half_u2 = 0.5 * u * u;
        tab.slope[i] = rho_integral(
            m,
            [&](double t) { return t * (1.0 + t * u * u) * std::exp(half_u2 * t); },
            m.rho.kind == SubordinatorSpec::Kind::Ne2Family
                ? std::max(8.0, half_u2 + 12.0)
                : rho_support_cap(m),
            "subordinator curvature integral");
      }
    }
  };
  fill(m.h_table, false);
  fill(m.hslope_table, true);
}

}  // namespace

// ---------- factories ----------

NoiseModel make_compound_poisson(Eigen::VectorXd q_spectrum) {
  validate_spectrum(q_spectrum);
  NoiseModel m;
  m.variant = Variant::CompoundPoissonGaussian;
  m.q_spectrum = std::move(q_spectrum);
  return m;
}

NoiseModel make_subordinated(Eigen::VectorXd q_spectrum, SubordinatorSpec rho,
                             double eps_rho) {
  validate_spectrum(q_spectrum);
  if (!(eps_rho > 0.0)) throw std::invalid_argument("eps_rho must be positive");

  NoiseModel m;
  m.variant = Variant::SubordinatedWiener;
  m.q_spectrum = std::move(q_spectrum);
  m.rho = std::move(rho);
  m.eps_rho = eps_rho;
  m.rho_scale = 1.0;

  switch (m.rho.kind) {
    case SubordinatorSpec::Kind::PointMass:
      if (!(m.rho.point_t > 0.0))
        throw std::invalid_argument("point-mass subordinator location must be positive");
      m.rho_scale = 1.0 / m.rho.point_t;  // atom weight; makes E Z(1) = 1
      break;
    case SubordinatorSpec::Kind::Tabulated: {
      const auto& k = m.rho.knots;
      const auto& d = m.rho.density;
      if (k.size() < 2 || k.size() != d.size())
        throw std::invalid_argument("tabulated subordinator needs matching knot/density lists");
      if (k.front() < 0.0)
        throw std::invalid_argument("tabulated subordinator knots must be nonnegative");
      for (size_t i = 1; i < k.size(); ++i)
        if (!(k[i] > k[i - 1]))
          throw std::invalid_argument("tabulated subordinator knots must be increasing");
      for (double v : d)
        if (!(v >= 0.0))
          throw std::invalid_argument("tabulated subordinator density must be nonnegative");
      const double raw_mean = rho_integral(m, [](double t) { return t; },
                                           k.back(), "subordinator mean integral");
      if (!(raw_mean > 0.0))
        throw std::invalid_argument("tabulated subordinator density must have positive mean");
      m.rho_scale = 1.0 / raw_mean;
      break;
    }
    case SubordinatorSpec::Kind::Ne2Family: {
      if (!(m.rho.alpha < 0.0))
        throw std::invalid_argument(
            "the t^{-(1+alpha)} e^{-t^2} family requires alpha < 0 (finite activity)");
      const double delta = -m.rho.alpha;
      // E Z_raw(1) = integral t^{delta} e^{-t^2} dt = Gamma((delta+1)/2) / 2.
      const double raw_mean = 0.5 * std::tgamma(0.5 * (delta + 1.0));
      m.rho_scale = 1.0 / raw_mean;
      const double check = rho_integral(m, [](double t) { return t; }, 8.0,
                                        "subordinator mean cross-check");
      if (std::fabs(check - 1.0) > 1e-8)
        throw NumericalError("subordinator normalization cross-check failed");
      break;
    }
  }

  // Exponential-moment certificate: finite integral of e^{lambda t} rho(dt)
  // for a moderate lambda. Built-in densities decay fast enough for any
  // lambda; this guards tabulated input against silent divergence.
  const double lam = 10.0;
  const double expmom = rho_integral(
      m, [&](double t) { return std::exp(lam * t); },
      rho_support_cap(m), "exponential moment integral");
  if (!std::isfinite(expmom))
    throw NumericalError("exponential moment integral of the subordinator density diverges");

  build_sampling_table(m);
  build_exponent_tables(m);
  return m;
}

// ---------- scalar profile ----------

double radial_gain(double sigma) { return sigma * std::exp(0.5 * sigma * sigma); }

double radial_gain_inverse(double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("radial_gain_inverse: s must be >= 0");
  if (s == 0.0) return 0.0;
  const double c = std::log(s);
  double sigma = s < 1.0 ? s : std::sqrt(2.0 * std::max(c, 0.5));
  // Newton on log(sigma) + sigma^2/2 = log(s): well conditioned for all s.
  for (int i = 0; i < 80; ++i) {
    const double phi = std::log(sigma) + 0.5 * sigma * sigma - c;
    const double step = phi / (1.0 / sigma + sigma);
    sigma -= step;
    if (sigma <= 0.0) sigma = 0.5 * (sigma + step);  // stay positive
    if (std::fabs(step) <= 1e-15 * sigma) break;
  }
  // Two linear-space polishes push the residual to a couple of ulps of s,
  // then snap to the neighboring representable with the smallest computed
  // residual: the attainable |g(f)-s| is quantized in steps of ulp(f) g'(f).
  if (0.5 * sigma * sigma < 600.0) {
    for (int i = 0; i < 2; ++i) {
      const double e = std::exp(0.5 * sigma * sigma);
      sigma -= (sigma * e - s) / ((1.0 + sigma * sigma) * e);
    }
    double best = sigma;
    double best_r = std::fabs(radial_gain(sigma) - s);
    for (int dir = -2; dir <= 2; ++dir) {
      double cand = sigma;
      for (int k = 0; k < std::abs(dir); ++k)
        cand = std::nextafter(cand, dir < 0 ? 0.0 : HUGE_VAL);
      const double r = std::fabs(radial_gain(cand) - s);
      if (r < best_r) {
        best_r = r;
        best = cand;
      }
    }
    sigma = best;
  }
  return sigma;
}

double radial_exponent(const NoiseModel& model, double u) {
  u = std::fabs(u);
  if (model.variant == Variant::CompoundPoissonGaussian) {
    if (0.5 * u * u > 700.0)
      throw NumericalError("radial exponent overflows double range");
    return std::expm1(0.5 * u * u);
  }
  if (model.rho.kind == SubordinatorSpec::Kind::PointMass) {
    if (0.5 * model.rho.point_t * u * u > 700.0)
      throw NumericalError("radial exponent overflows double range");
    return model.rho_scale * std::expm1(0.5 * model.rho.point_t * u * u);
  }
  return subordinated_exponent(model, u, /*slope=*/false);
}

double radial_exponent_slope(const NoiseModel& model, double u) {
  u = std::fabs(u);
  if (model.variant == Variant::CompoundPoissonGaussian) return radial_gain(u);
  if (model.rho.kind == SubordinatorSpec::Kind::PointMass) {
    const double t0 = model.rho.point_t;
    return model.rho_scale * t0 * u * std::exp(0.5 * t0 * u * u);
  }
  return subordinated_exponent(model, u, /*slope=*/true);
}

double laplace_exponent(const NoiseModel& model, const Eigen::VectorXd& p) {
  if (p.size() != model.dim())
    throw std::invalid_argument("laplace_exponent: dimension mismatch");
  double u2 = 0.0;
  for (int k = 0; k < p.size(); ++k) u2 += model.q_spectrum[k] * p[k] * p[k];
  return radial_exponent(model, std::sqrt(u2));
}

// ---------- Legendre transform ----------

double radial_cost(const NoiseModel& model, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("radial_cost: s must be >= 0");
  if (s == 0.0) return 0.0;

  if (model.variant == Variant::CompoundPoissonGaussian) {
    // Closed form (f^2 - 1) e^{f^2/2} + 1 with e^{f^2/2} = s/f; the expm1
    // form keeps relative accuracy near s = 0 where l(s) ~ s^2/2.
    const double f = radial_gain_inverse(s);
    return f <= 0.5 ? s * f - std::expm1(0.5 * f * f) : s * f - s / f + 1.0;
  }

  // Supremum of s*u - h(u) on a log-spaced grid, then golden-section.
  const double u_lo = 1e-6;
  double u_hi = model.h_table.empty() ? rho_support_cap(model)
                                      : model.h_table.x_max();
  if (model.rho.kind == SubordinatorSpec::Kind::PointMass) {
    // Bracket: the maximizer solves w t0 u e^{t0 u^2/2} = s.
    u_hi = 1.0;
    while (radial_exponent_slope(model, u_hi) < s && u_hi < 80.0) u_hi *= 2.0;
    if (u_hi >= 80.0) throw NumericalError("radial cost query out of range");
    u_hi *= 2.0;  // keep the maximizer strictly interior to the grid
  }

  const int steps = 400;
  const double ratio = std::log(u_hi / u_lo) / steps;
  double best_u = 0.0, best_val = 0.0;  // u = 0 gives value 0
  int best_i = -1;
  for (int i = 0; i <= steps; ++i) {
    const double u = u_lo * std::exp(ratio * i);
    const double val = s * u - conj_h(model, u);
    if (val > best_val) {
      best_val = val;
      best_u = u;
      best_i = i;
    }
  }
  if (best_i == steps)
    throw NumericalError("radial cost maximizer beyond tabulated slope range");
  const double lo = best_i <= 0 ? 0.0 : u_lo * std::exp(ratio * (best_i - 1));
  const double hi = best_i < 0 ? u_lo : u_lo * std::exp(ratio * (best_i + 1));
  const double u_star = util::golden_section_max(
      [&](double u) { return s * u - conj_h(model, u); }, lo, hi, 1e-10);
  (void)best_u;
  return std::max(0.0, s * u_star - conj_h(model, u_star));
}

double radial_cost_slope(const NoiseModel& model, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("radial_cost_slope: s must be >= 0");
  if (s == 0.0) return 0.0;
  if (model.variant == Variant::CompoundPoissonGaussian) return radial_gain_inverse(s);

  // l'(s) = (h')^{-1}(s) by conjugate stationarity.
  auto slope = [&](double u) { return table_or_direct_h_slope(model, u); };
  double hi = 1.0;
  while (slope(hi) < s && hi < 80.0) hi *= 2.0;
  if (hi >= 80.0) throw NumericalError("radial cost slope query out of range");
  return util::solve_increasing(slope, s, 0.0, hi, 1e-12 * (1.0 + hi));
}

double legendre_cost(const NoiseModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.dim())
    throw std::invalid_argument("legendre_cost: dimension mismatch");
  double s2 = 0.0;
  for (int k = 0; k < z.size(); ++k) {
    if (model.q_spectrum[k] < kKernelTol) {
      if (z[k] != 0.0) return std::numeric_limits<double>::infinity();
    } else {
      s2 += z[k] * z[k] / model.q_spectrum[k];
    }
  }
  const double value = radial_cost(model, std::sqrt(s2));
  if (!std::isfinite(value))
    throw NumericalError("legendre_cost overflowed on a reachable direction");
  return value;
}

double norm_domination_constant(const NoiseModel& model, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("norm_domination_constant: eps > 0 required");
  return radial_exponent(model, std::sqrt(model.max_q()) / eps);
}

RadialHamiltonian radial_profile(const NoiseModel& model) {
  RadialHamiltonian prof;
  prof.model = &model;
  const int per_decade = 16;
  const int decades = 6;  // s in [1e-3, 1e3]
  const int count = per_decade * decades + 1;
  prof.grid_s.resize(count);
  prof.grid_l.resize(count);
  for (int i = 0; i < count; ++i) {
    const double s = 1e-3 * std::pow(10.0, static_cast<double>(i) / per_decade);
    prof.grid_s[i] = s;
    prof.grid_l[i] = radial_cost(model, s);
  }
  return prof;
}

// ---------- path sampling ----------

namespace {

// Inverse CDF over the tabulated cells; linear inside a cell.
double sample_jump_size(const NoiseModel& m, double u01) {
  const double target = u01 * m.cdf_p.back();
  const auto it = std::upper_bound(m.cdf_p.begin(), m.cdf_p.end(), target);
  size_t i = static_cast<size_t>(it - m.cdf_p.begin());
  i = std::min(std::max<size_t>(i, 1), m.cdf_p.size() - 1);
  const double p0 = m.cdf_p[i - 1], p1 = m.cdf_p[i];
  const double w = p1 > p0 ? (target - p0) / (p1 - p0) : 0.5;
  return m.cdf_t[i - 1] + w * (m.cdf_t[i] - m.cdf_t[i - 1]);
}

void sort_and_separate(std::vector<double>& times) {
  std::sort(times.begin(), times.end());
  for (size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1])
      times[i] = std::nextafter(times[i - 1], std::numeric_limits<double>::infinity());
}

}  // namespace

JumpPath sample_scaled_path(const NoiseModel& model, double n, double horizon,
                            std::uint64_t seed, std::uint64_t sample_index,
                            int grid_steps) {
  if (!(n >= 1.0)) throw std::invalid_argument("sample_scaled_path: n must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("sample_scaled_path: T must be > 0");
  rng::Substream stream(seed, sample_index);
  const int d = model.dim();

  JumpPath path;
  path.horizon = horizon;

  if (model.variant == Variant::CompoundPoissonGaussian) {
    const long long count = stream.poisson(n * horizon);
    path.times.resize(count);
    for (auto& t : path.times) t = stream.uniform() * horizon;
    sort_and_separate(path.times);
    path.marks.reserve(count);
    for (long long j = 0; j < count; ++j) {
      Eigen::VectorXd mark(d);
      for (int k = 0; k < d; ++k)
        mark[k] = std::sqrt(model.q_spectrum[k]) * stream.normal() / n;
      path.marks.push_back(std::move(mark));
    }
    return path;
  }

  // Subordinated Wiener: kept jumps arrive at rate n * rho([eps, inf)).
  const long long count =
      model.rate_above_cut > 0.0 ? stream.poisson(n * horizon * model.rate_above_cut) : 0;
  std::vector<double> jump_times(count);
  for (auto& t : jump_times) t = stream.uniform() * horizon;
  sort_and_separate(jump_times);
  std::vector<double> sizes(count);
  for (auto& sz : sizes)
    sz = model.rho.kind == SubordinatorSpec::Kind::PointMass
             ? model.rho.point_t
             : sample_jump_size(model, stream.uniform());
  std::vector<Eigen::VectorXd> jump_marks;
  jump_marks.reserve(count);
  for (long long j = 0; j < count; ++j) {
    Eigen::VectorXd mark(d);
    for (int k = 0; k < d; ++k)
      mark[k] = std::sqrt(sizes[j] * model.q_spectrum[k]) * stream.normal() / n;
    jump_marks.push_back(std::move(mark));
  }

  // Truncated small jumps: per-grid-step Gaussian increments whose variance
  // restores E|L_n(t)|^2 = (t/n) tr Q exactly.
  std::vector<double> grid_times;
  std::vector<Eigen::VectorXd> grid_marks;
  if (model.mean_below_cut > 0.0 && grid_steps > 0) {
    const double dt = horizon / grid_steps;
    const double coef = dt * model.mean_below_cut / n;
    grid_times.reserve(grid_steps);
    grid_marks.reserve(grid_steps);
    for (int k = 1; k <= grid_steps; ++k) {
      grid_times.push_back(k * dt);
      Eigen::VectorXd mark(d);
      for (int j = 0; j < d; ++j)
        mark[j] = std::sqrt(coef * model.q_spectrum[j]) * stream.normal();
      grid_marks.push_back(std::move(mark));
    }
  }

  // Merge the two sorted streams.
  path.times.reserve(jump_times.size() + grid_times.size());
  path.marks.reserve(jump_times.size() + grid_times.size());
  size_t a = 0, b = 0;
  double last = 0.0;
  while (a < jump_times.size() || b < grid_times.size()) {
    const bool take_jump =
        b >= grid_times.size() || (a < jump_times.size() && jump_times[a] <= grid_times[b]);
    double t = take_jump ? jump_times[a] : grid_times[b];
    if (t <= last) t = std::nextafter(last, std::numeric_limits<double>::infinity());
    path.times.push_back(t);
    path.marks.push_back(take_jump ? std::move(jump_marks[a]) : std::move(grid_marks[b]));
    (take_jump ? a : b) += 1;
    last = t;
  }
  return path;
}

}  // namespace ldlab::noise
