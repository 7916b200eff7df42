#include "ldlab/control.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "ldlab/rng.hpp"
#include "ldlab/util.hpp"

namespace ldlab::control {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ControlPath zero_control(int dim, int intervals, double T) {
  if (dim < 1 || intervals < 1 || !(T > 0.0))
    throw std::invalid_argument("zero_control: bad shape");
  ControlPath u;
  u.horizon = T;
  u.values.assign(intervals, VectorXd::Zero(dim));
  return u;
}

double cost(const ControlPath& u, const noise::NoiseModel& model) {
  if (u.intervals() < 1) throw std::invalid_argument("cost: empty control");
  const double du = u.dt_u();
  double acc = 0.0;
  for (const auto& w : u.values) acc += du * noise::radial_cost(model, w.norm());
  return acc;
}

namespace {

// Cached full-step propagator; closed-form systems skip the dense matrix.
struct Propagator {
  const galerkin::GalerkinSystem* sys;
  double h;
  bool closed;
  MatrixXd E, Et;

  Propagator(const galerkin::GalerkinSystem& s, double step)
      : sys(&s), h(step), closed(s.use_rotation_semigroup || s.is_diagonal) {
    if (!closed) {
      E = galerkin::semigroup_matrix(s, step);
      Et = E.transpose();
    }
  }
  VectorXd fwd(const VectorXd& x) const {
    return closed ? galerkin::semigroup_apply(*sys, h, x) : VectorXd(E * x);
  }
  VectorXd adj(const VectorXd& x) const {
    return closed ? galerkin::semigroup_apply_adjoint(*sys, h, x) : VectorXd(Et * x);
  }
};

struct GridSpec {
  int steps = 0;
  int per = 0;  // state steps per control interval
  double h = 0.0;
};

GridSpec make_grid(double T, int intervals, double dt) {
  if (!(T > 0.0)) throw std::invalid_argument("control: horizon must be > 0");
  if (intervals < 1) throw std::invalid_argument("control: need at least one interval");
  if (dt <= 0.0) dt = T / 512;
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  if (steps % intervals != 0)
    throw std::invalid_argument("control: dt must subdivide the control intervals evenly");
  return {steps, steps / intervals, T / steps};
}

void check_shapes(const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
                  const VectorXd& x0, const ControlPath& u) {
  if (model.dim() != sys.dim || x0.size() != sys.dim)
    throw std::invalid_argument("control: dimension mismatch");
  for (const auto& w : u.values)
    if (w.size() != sys.dim || !w.allFinite())
      throw std::invalid_argument("control: control values must be finite, dim d");
}

// Terminal functional and (optionally) its gradient at X(T).
using Terminal = std::function<double(const VectorXd&, VectorXd*)>;

// P(w) = sum_k du l(|w_k|) + term(X_T) and dP/dw via the discrete adjoint of
// the stepper X <- S(h)(X + h F(X) + h G(X) Q^{1/2} w).
double penalized_eval(const galerkin::GalerkinSystem& sys,
                      const noise::NoiseModel& model, const VectorXd& x0,
                      const ControlPath& u, double dt, const Terminal& term,
                      std::vector<VectorXd>* grad) {
  check_shapes(sys, model, x0, u);
  const auto gs = make_grid(u.horizon, u.intervals(), dt);
  const Propagator prop(sys, gs.h);
  const VectorXd q_sqrt = model.q_spectrum.cwiseSqrt();
  const double du = u.dt_u();

  std::vector<VectorXd> c(u.values.size());
  for (size_t i = 0; i < u.values.size(); ++i)
    c[i] = (q_sqrt.array() * u.values[i].array()).matrix();

  std::vector<VectorXd> xs(gs.steps + 1);
  xs[0] = x0;
  for (int j = 0; j < gs.steps; ++j) {
    const int i = j / gs.per;
    VectorXd y = xs[j];
    if (sys.f_kind != galerkin::DriftKind::Zero) y += gs.h * sys.drift(xs[j]);
    y += gs.h * sys.diffusion_apply(xs[j], c[i]);
    xs[j + 1] = prop.fwd(y);
    if (!xs[j + 1].allFinite())
      throw util::NumericalError("control: state became non-finite at t = " +
                                 std::to_string((j + 1) * gs.h));
  }

  double run_cost = 0.0;
  for (const auto& w : u.values) run_cost += du * noise::radial_cost(model, w.norm());

  VectorXd gterm;
  const double tv = term(xs[gs.steps], grad ? &gterm : nullptr);

  if (grad) {
    grad->assign(u.values.size(), VectorXd::Zero(sys.dim));
    VectorXd lambda = gterm;
    for (int j = gs.steps - 1; j >= 0; --j) {
      const VectorXd v = prop.adj(lambda);
      const int i = j / gs.per;
      (*grad)[i] += gs.h * (q_sqrt.array() * sys.diffusion_t(xs[j], v).array()).matrix();
      lambda = v;
      if (sys.f_kind != galerkin::DriftKind::Zero)
        lambda += gs.h * sys.drift_jacobian_t(xs[j], v);
      lambda += gs.h * sys.diffusion_dx_t(xs[j], c[i], v);
    }
    for (size_t i = 0; i < u.values.size(); ++i) {
      const double s = u.values[i].norm();
      if (s > 0.0)
        (*grad)[i] += (du * noise::radial_cost_slope(model, s) / s) * u.values[i];
    }
  }
  return run_cost + tv;
}

struct Packer {
  int d = 0, n_u = 0;
  double T = 0.0;
  VectorXd pack(const ControlPath& u) const {
    VectorXd W(d * n_u);
    for (int i = 0; i < n_u; ++i) W.segment(i * d, d) = u.values[i];
    return W;
  }
  ControlPath unpack(const VectorXd& W) const {
    ControlPath u;
    u.horizon = T;
    u.values.reserve(n_u);
    for (int i = 0; i < n_u; ++i) u.values.push_back(W.segment(i * d, d));
    return u;
  }
};

// Minimizes P over stacked controls; non-finite trial points turn into
// +infinity so the line search backs off instead of propagating the throw.
util::LbfgsResult minimize_packed(const galerkin::GalerkinSystem& sys,
                                  const noise::NoiseModel& model,
                                  const VectorXd& x0, const Packer& pk, double dt,
                                  const Terminal& term, const VectorXd& start) {
  auto fg = [&](const VectorXd& W, VectorXd& gradW) -> double {
    std::vector<VectorXd> gi;
    double value;
    try {
      value = penalized_eval(sys, model, x0, pk.unpack(W), dt, term, &gi);
    } catch (const util::NumericalError&) {
      gradW.setZero();
      return std::numeric_limits<double>::infinity();
    }
    for (int i = 0; i < pk.n_u; ++i) gradW.segment(i * pk.d, pk.d) = gi[i];
    return value;
  };
  util::LbfgsOptions opts;
  opts.max_iterations = 500;
  // 1e-9 sits below the gradient floor of the time-discretized objective and
  // buys hundreds of no-op polish iterations; the value is already stable to
  // twelve digits at 1e-8.
  opts.grad_tolerance = 1e-8;
  return util::lbfgs_minimize(fg, start, opts);
}

}  // namespace

simulate::Trajectory solve_state(const galerkin::GalerkinSystem& sys,
                                 const noise::NoiseModel& model,
                                 const VectorXd& x0, const ControlPath& u,
                                 double dt) {
  check_shapes(sys, model, x0, u);
  const auto gs = make_grid(u.horizon, u.intervals(), dt);
  const Propagator prop(sys, gs.h);
  const VectorXd q_sqrt = model.q_spectrum.cwiseSqrt();

  simulate::Trajectory tr;
  tr.times.reserve(gs.steps + 1);
  tr.states.reserve(gs.steps + 1);
  VectorXd x = x0;
  auto record = [&](double time) {
    if (!x.allFinite())
      throw util::NumericalError("solve_state: state became non-finite at t = " +
                                 std::to_string(time));
    tr.times.push_back(time);
    tr.states.push_back(x);
    tr.sup_norm = std::max(tr.sup_norm, x.norm());
  };
  record(0.0);
  for (int j = 0; j < gs.steps; ++j) {
    const int i = j / gs.per;
    const VectorXd c = (q_sqrt.array() * u.values[i].array()).matrix();
    VectorXd y = x;
    if (sys.f_kind != galerkin::DriftKind::Zero) y += gs.h * sys.drift(x);
    y += gs.h * sys.diffusion_apply(x, c);
    x = prop.fwd(y);
    record((j + 1) * gs.h);
  }
  return tr;
}

double objective(const galerkin::GalerkinSystem& sys, const noise::NoiseModel& model,
                 const laplace::TerminalCost& g, const VectorXd& x0,
                 const ControlPath& u, double dt) {
  const Terminal term = [&](const VectorXd& x, VectorXd* gout) {
    if (gout) *gout = -g.gradient(x);
    return -g(x);
  };
  return -penalized_eval(sys, model, x0, u, dt, term, nullptr);
}

double objective_with_gradient(const galerkin::GalerkinSystem& sys,
                               const noise::NoiseModel& model,
                               const laplace::TerminalCost& g, const VectorXd& x0,
                               const ControlPath& u, std::vector<VectorXd>& grad,
                               double dt) {
  const Terminal term = [&](const VectorXd& x, VectorXd* gout) {
    if (gout) *gout = -g.gradient(x);
    return -g(x);
  };
  const double p = penalized_eval(sys, model, x0, u, dt, term, &grad);
  for (auto& gi : grad) gi = -gi;
  return -p;
}

ValueResult maximize_value(const galerkin::GalerkinSystem& sys,
                           const noise::NoiseModel& model,
                           const laplace::TerminalCost& g, const VectorXd& x0,
                           double T, int intervals, int restarts,
                           std::uint64_t seed, double dt) {
  if (restarts < 1) throw std::invalid_argument("maximize_value: restarts must be >= 1");
  make_grid(T, intervals, dt);  // validate early
  const Packer pk{sys.dim, intervals, T};
  const Terminal term = [&](const VectorXd& x, VectorXd* gout) {
    if (gout) *gout = -g.gradient(x);
    return -g(x);
  };

  auto best = minimize_packed(sys, model, x0, pk, dt, term,
                              VectorXd::Zero(sys.dim * intervals));
  const VectorXd anchor = best.x;
  for (int r = 1; r < restarts; ++r) {
    rng::Substream rs(seed, r);
    VectorXd start = anchor;
    for (int k = 0; k < start.size(); ++k) start[k] += 0.5 * rs.normal();
    auto cand = minimize_packed(sys, model, x0, pk, dt, term, start);
    if (cand.f < best.f) best = std::move(cand);
  }

  ValueResult out;
  out.control = pk.unpack(best.x);
  out.cost = cost(out.control, model);
  out.terminal = solve_state(sys, model, x0, out.control, dt).terminal();
  out.terminal_g = g(out.terminal);
  out.value = -out.cost + out.terminal_g;
  out.converged = best.converged;
  if (g.bounded()) {
    out.cap = 2.0 * g.sup_norm();
    out.cap_ok = out.cost <= out.cap + 1e-9;
  }
  return out;
}

RateResult rate_function(const galerkin::GalerkinSystem& sys,
                         const noise::NoiseModel& model, const VectorXd& x0,
                         const VectorXd& target, double T, int intervals,
                         int restarts, std::uint64_t seed, double dt, double mu0,
                         int stages) {
  if (!target.allFinite()) throw std::invalid_argument("rate_function: target not finite");
  if (restarts < 1 || stages < 1)
    throw std::invalid_argument("rate_function: restarts and stages must be >= 1");
  make_grid(T, intervals, dt);
  const Packer pk{sys.dim, intervals, T};
  const double tol = 1e-3 * (1.0 + target.norm());

  struct Run {
    VectorXd W;
    double cost = 0.0;
    double mismatch = 0.0;
    std::vector<double> stage_mismatch;
    bool converged = false;
  };
  std::vector<Run> runs;
  runs.reserve(restarts);

  for (int r = 0; r < restarts; ++r) {
    VectorXd W = VectorXd::Zero(sys.dim * intervals);
    if (r > 0) {
      rng::Substream rs(seed, r);
      for (int k = 0; k < W.size(); ++k) W[k] = 0.5 * rs.normal();
    }
    Run run;
    bool conv = false;
    for (int j = 0; j < stages; ++j) {
      const double mu = mu0 * std::pow(10.0, j);
      const Terminal term = [&](const VectorXd& x, VectorXd* gout) {
        const VectorXd diff = x - target;
        if (gout) *gout = mu * diff;
        return 0.5 * mu * diff.squaredNorm();
      };
      auto res = minimize_packed(sys, model, x0, pk, dt, term, W);
      W = res.x;
      conv = res.converged;
      const VectorXd xt = solve_state(sys, model, x0, pk.unpack(W), dt).terminal();
      run.stage_mismatch.push_back((xt - target).norm());
    }
    run.W = W;
    run.cost = cost(pk.unpack(W), model);
    run.mismatch = run.stage_mismatch.back();
    run.converged = conv;
    runs.push_back(std::move(run));
  }

  // prefer feasible runs by cost; otherwise the closest miss
  const Run* pick = nullptr;
  for (const auto& run : runs)
    if (run.mismatch < tol && (!pick || run.cost < pick->cost)) pick = &run;
  const bool feasible = pick != nullptr;
  if (!pick)
    for (const auto& run : runs)
      if (!pick || run.mismatch < pick->mismatch) pick = &run;

  RateResult out;
  out.control = pk.unpack(pick->W);
  out.mismatch = pick->mismatch;
  if (feasible) {
    out.value = pick->cost;
    out.reachable = true;
    out.converged = pick->converged;
    return out;
  }

  // stagnation test: the mismatch refuses to shrink while the penalty grows
  // by orders of magnitude
  const auto& ms = pick->stage_mismatch;
  bool stagnant = ms.back() > 100.0 * tol && ms.size() >= 3;
  if (stagnant)
    for (size_t j = ms.size() - 3; j + 1 < ms.size(); ++j)
      if (ms[j + 1] <= 0.9 * ms[j]) stagnant = false;
  std::ostringstream diag;
  if (stagnant) {
    diag << "terminal mismatch stagnated at " << ms.back()
         << " across penalty stages up to mu = "
         << mu0 * std::pow(10.0, stages - 1)
         << "; the target appears unreachable through G Q^{1/2}";
    out.value = std::numeric_limits<double>::infinity();
  } else {
    diag << "terminal mismatch " << ms.back() << " above tolerance " << tol
         << " after the penalty schedule; more stages or intervals needed";
    out.value = pick->cost;
  }
  out.diagnostics = diag.str();
  return out;
}

}  // namespace ldlab::control
