#include "ldlab/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ldlab::config {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& reason) {
  throw ConfigError(path, reason);
}

std::string item(const std::string& path, int i) {
  return path + "[" + std::to_string(i) + "]";
}

std::string child(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

const json& member(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(child(path, key), "required field is missing");
  return *it;
}

const json* opt(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

// Strict schema: a key outside the allowed set is an error at that key, so
// typos fail loudly instead of silently keeping a default.
void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(child(path, key.c_str()), "unknown field");
  }
}

const json& as_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double as_positive(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (v <= 0.0) fail(path, "must be positive");
  return v;
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    fail(path, "out of range");
  return static_cast<int>(v);
}

int as_int_min(const json& j, const std::string& path, int lo) {
  const int v = as_int(j, path);
  if (v < lo) fail(path, "must be at least " + std::to_string(lo));
  return v;
}

std::string as_text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> as_number_list(const json& j, const std::string& path,
                                   bool nonneg = false) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (int i = 0; i < static_cast<int>(j.size()); ++i) {
    const double v = as_number(j[i], item(path, i));
    if (nonneg && v < 0.0) fail(item(path, i), "must be non-negative");
    out.push_back(v);
  }
  return out;
}

Eigen::VectorXd as_vector(const json& j, const std::string& path, int expected) {
  const auto vals = as_number_list(j, path);
  if (expected >= 0 && static_cast<int>(vals.size()) != expected)
    fail(path, "expected length " + std::to_string(expected) + ", got " +
                   std::to_string(vals.size()));
  Eigen::VectorXd v(static_cast<int>(vals.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = vals[i];
  return v;
}

Eigen::MatrixXd as_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const int rows = static_cast<int>(j.size());
  Eigen::MatrixXd m;
  for (int r = 0; r < rows; ++r) {
    const auto row = as_number_list(j[r], item(path, r));
    if (r == 0) {
      m.resize(rows, static_cast<int>(row.size()));
    } else if (static_cast<int>(row.size()) != m.cols()) {
      fail(item(path, r), "rows have inconsistent lengths");
    }
    for (int c = 0; c < m.cols(); ++c) m(r, c) = row[c];
  }
  if (m.rows() != m.cols()) fail(path, "expected a square matrix");
  return m;
}

noise::SubordinatorSpec read_rho(const json& j, const std::string& path) {
  as_object(j, path);
  noise::SubordinatorSpec spec;
  const std::string kind = as_text(member(j, path, "kind"), child(path, "kind"));
  if (kind == "point-mass") {
    reject_unknown(j, path, {"kind", "t"});
    spec.kind = noise::SubordinatorSpec::Kind::PointMass;
    spec.point_t = as_positive(member(j, path, "t"), child(path, "t"));
  } else if (kind == "tabulated") {
    reject_unknown(j, path, {"kind", "knots", "density"});
    spec.kind = noise::SubordinatorSpec::Kind::Tabulated;
    spec.knots = as_number_list(member(j, path, "knots"), child(path, "knots"));
    spec.density =
        as_number_list(member(j, path, "density"), child(path, "density"), true);
    if (spec.knots.size() != spec.density.size())
      fail(child(path, "density"), "must match the length of knots");
  } else if (kind == "ne2") {
    reject_unknown(j, path, {"kind", "alpha"});
    spec.kind = noise::SubordinatorSpec::Kind::Ne2Family;
    spec.alpha = as_number(member(j, path, "alpha"), child(path, "alpha"));
    if (spec.alpha >= 0.0) fail(child(path, "alpha"), "must be negative");
  } else {
    fail(child(path, "kind"), "unknown subordinator kind '" + kind + "'");
  }
  return spec;
}

noise::NoiseModel build_noise(const json& doc) {
  const auto& j = as_object(member(doc, "", "noise"), "noise");
  reject_unknown(j, "noise", {"variant", "q", "rho", "eps_rho"});
  const std::string variant =
      as_text(member(j, "noise", "variant"), "noise.variant");
  Eigen::VectorXd q(as_vector(member(j, "noise", "q"), "noise.q", -1));
  for (int i = 0; i < q.size(); ++i)
    if (q[i] < 0.0) fail(item("noise.q", i), "eigenvalues of Q must be non-negative");

  if (variant == "compound-poisson") {
    if (opt(j, "rho"))
      fail("noise.rho", "only valid for the subordinated-wiener variant");
    if (opt(j, "eps_rho"))
      fail("noise.eps_rho", "only valid for the subordinated-wiener variant");
    return noise::make_compound_poisson(std::move(q));
  }
  if (variant == "subordinated-wiener") {
    const json* rho = opt(j, "rho");
    if (!rho) fail("noise.rho", "required for the subordinated-wiener variant");
    const auto spec = read_rho(*rho, "noise.rho");
    double eps_rho = noise::kDefaultEpsRho;
    if (const json* e = opt(j, "eps_rho"))
      eps_rho = as_positive(*e, "noise.eps_rho");
    try {
      return noise::make_subordinated(std::move(q), spec, eps_rho);
    } catch (const std::exception& e) {
      fail("noise.rho", e.what());
    }
  }
  fail("noise.variant", "unknown variant '" + variant + "'");
}

galerkin::GalerkinSystem read_wave(const json& j) {
  const int modes = as_int_min(member(j, "system", "modes"), "system.modes", 1);
  const json* nl = opt(j, "nonlinearity");
  if (!nl) return galerkin::build_wave_system(modes);

  as_object(*nl, "system.nonlinearity");
  reject_unknown(*nl, "system.nonlinearity", {"kind", "scale"});
  const std::string kind = as_text(member(*nl, "system.nonlinearity", "kind"),
                                   "system.nonlinearity.kind");
  double scale = 1.0;
  if (const json* s = opt(*nl, "scale"))
    scale = as_positive(*s, "system.nonlinearity.scale");
  if (kind == "sine")
    return galerkin::build_wave_system(
        modes, [scale](double v) { return scale * std::sin(v); },
        [scale](double v) { return scale * std::cos(v); }, scale);
  if (kind == "tanh")
    return galerkin::build_wave_system(
        modes, [scale](double v) { return scale * std::tanh(v); },
        [scale](double v) {
          const double c = std::cosh(v);
          return scale / (c * c);
        },
        scale);
  fail("system.nonlinearity.kind", "unknown nonlinearity '" + kind + "'");
}

galerkin::GalerkinSystem build_system(const json& doc) {
  const auto& j = as_object(member(doc, "", "system"), "system");
  const std::string kind = as_text(member(j, "system", "kind"), "system.kind");
  if (kind == "diagonal") {
    reject_unknown(j, "system", {"kind", "a"});
    return galerkin::make_diagonal_system(
        as_vector(member(j, "system", "a"), "system.a", -1));
  }
  if (kind == "generic") {
    reject_unknown(j, "system", {"kind", "a_matrix"});
    auto A = as_matrix(member(j, "system", "a_matrix"), "system.a_matrix");
    try {
      return galerkin::make_generic(std::move(A));
    } catch (const std::exception& e) {
      fail("system.a_matrix", e.what());
    }
  }
  if (kind == "wave") {
    reject_unknown(j, "system", {"kind", "modes", "nonlinearity"});
    return read_wave(j);
  }
  fail("system.kind", "unknown system kind '" + kind + "'");
}

laplace::TerminalCost build_terminal(const json& doc, int dim) {
  const json* t = opt(doc, "terminal");
  if (!t) return laplace::constant_cost(0.0);
  const auto& j = as_object(*t, "terminal");
  const std::string kind = as_text(member(j, "terminal", "kind"), "terminal.kind");
  if (kind == "constant") {
    reject_unknown(j, "terminal", {"kind", "c"});
    return laplace::constant_cost(
        as_number(member(j, "terminal", "c"), "terminal.c"));
  }
  if (kind == "linear") {
    reject_unknown(j, "terminal", {"kind", "p"});
    return laplace::linear_cost(
        as_vector(member(j, "terminal", "p"), "terminal.p", dim));
  }
  if (kind == "clipped-linear") {
    reject_unknown(j, "terminal", {"kind", "p", "amp"});
    return laplace::clipped_linear_cost(
        as_vector(member(j, "terminal", "p"), "terminal.p", dim),
        as_positive(member(j, "terminal", "amp"), "terminal.amp"));
  }
  if (kind == "bump") {
    reject_unknown(j, "terminal", {"kind", "center", "width", "height"});
    return laplace::bump_cost(
        as_vector(member(j, "terminal", "center"), "terminal.center", dim),
        as_positive(member(j, "terminal", "width"), "terminal.width"),
        as_number(member(j, "terminal", "height"), "terminal.height"));
  }
  fail("terminal.kind", "unknown terminal kind '" + kind + "'");
}

void check_version(const json& doc) {
  as_object(doc, "(document)");
  reject_unknown(doc, "",
                 {"schema_version", "noise", "system", "terminal", "x0",
                  "horizon", "run"});
  const json& v = member(doc, "", "schema_version");
  if (!v.is_number_integer() || v.get<int>() != 1)
    fail("schema_version", "this build reads schema version 1");
}

GridRange read_grid(const json& j, const std::string& path) {
  as_object(j, path);
  reject_unknown(j, path, {"lo", "hi", "count"});
  GridRange g;
  g.lo = as_number(member(j, path, "lo"), child(path, "lo"));
  g.hi = as_number(member(j, path, "hi"), child(path, "hi"));
  g.count = as_int_min(member(j, path, "count"), child(path, "count"), 2);
  if (!(g.lo < g.hi)) fail(child(path, "lo"), "must be below hi");
  return g;
}

}  // namespace

ConfigError::ConfigError(std::string path, std::string reason)
    : std::runtime_error(path + ": " + reason),
      path_(std::move(path)),
      reason_(std::move(reason)) {}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("(file)", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() carries "at line L, column C"; keep it verbatim.
    fail("(document)", e.what());
  }
}

Config build(const json& doc) {
  check_version(doc);
  Config cfg;
  cfg.doc = doc;
  cfg.model = build_noise(doc);
  cfg.system = build_system(doc);
  if (cfg.model.dim() != cfg.system.dim)
    fail("noise.q", "length " + std::to_string(cfg.model.dim()) +
                        " does not match the system dimension " +
                        std::to_string(cfg.system.dim));
  cfg.terminal = build_terminal(doc, cfg.system.dim);
  if (const json* x0 = opt(doc, "x0"))
    cfg.x0 = as_vector(*x0, "x0", cfg.system.dim);
  else
    cfg.x0 = Eigen::VectorXd::Zero(cfg.system.dim);
  if (const json* h = opt(doc, "horizon"))
    cfg.horizon = as_positive(*h, "horizon");
  return cfg;
}

RunParams run_params(const json& doc, int dim) {
  RunParams rp;
  const json* r = opt(doc, "run");
  if (!r) return rp;
  const auto& j = as_object(*r, "run");
  reject_unknown(j, "run",
                 {"samples", "n", "dt", "intervals", "restarts", "stages",
                  "mu0", "target", "targets", "center", "radius",
                  "grid_points", "lambdas", "paths", "t_grid", "x_grid"});

  if (const json* v = opt(j, "samples")) rp.samples = as_int_min(*v, "run.samples", 1);
  if (const json* v = opt(j, "n")) {
    rp.n_levels.clear();
    if (v->is_array()) {
      for (int i = 0; i < static_cast<int>(v->size()); ++i)
        rp.n_levels.push_back(as_int_min((*v)[i], item("run.n", i), 1));
      if (rp.n_levels.empty()) fail("run.n", "expected a non-empty array");
    } else {
      rp.n_levels.push_back(as_int_min(*v, "run.n", 1));
    }
  }
  if (const json* v = opt(j, "dt")) rp.dt = as_number(*v, "run.dt");
  if (const json* v = opt(j, "intervals"))
    rp.intervals = as_int_min(*v, "run.intervals", 1);
  if (const json* v = opt(j, "restarts"))
    rp.restarts = as_int_min(*v, "run.restarts", 0);
  if (const json* v = opt(j, "stages")) rp.stages = as_int_min(*v, "run.stages", 1);
  if (const json* v = opt(j, "mu0")) rp.mu0 = as_positive(*v, "run.mu0");
  if (const json* v = opt(j, "target")) rp.target = as_vector(*v, "run.target", dim);
  if (const json* v = opt(j, "targets")) {
    if (!v->is_array() || v->empty())
      fail("run.targets", "expected a non-empty array of vectors");
    for (int i = 0; i < static_cast<int>(v->size()); ++i)
      rp.targets.push_back(as_vector((*v)[i], item("run.targets", i), dim));
  }
  if (const json* v = opt(j, "center")) rp.center = as_vector(*v, "run.center", dim);
  if (const json* v = opt(j, "radius")) rp.radius = as_positive(*v, "run.radius");
  if (const json* v = opt(j, "grid_points"))
    rp.grid_points = as_int_min(*v, "run.grid_points", 2);
  if (const json* v = opt(j, "lambdas")) {
    rp.lambdas = as_number_list(*v, "run.lambdas");
    for (int i = 0; i < static_cast<int>(rp.lambdas.size()); ++i)
      if (rp.lambdas[i] <= 0.0) fail(item("run.lambdas", i), "must be positive");
  }
  if (const json* v = opt(j, "paths")) rp.paths = as_int_min(*v, "run.paths", 1);
  if (const json* v = opt(j, "t_grid")) rp.t_grid = read_grid(*v, "run.t_grid");
  if (const json* v = opt(j, "x_grid")) rp.x_grid = read_grid(*v, "run.x_grid");
  return rp;
}

ValidationReport validate(const json& doc) {
  ValidationReport rep;
  auto attempt = [&rep](const std::function<void()>& fn) {
    try {
      fn();
      return true;
    } catch (const ConfigError& e) {
      rep.issues.push_back({e.path(), e.reason()});
      return false;
    }
  };

  if (!attempt([&] { check_version(doc); })) {
    rep.valid = false;
    return rep;
  }

  noise::NoiseModel model;
  galerkin::GalerkinSystem system;
  const bool noise_ok = attempt([&] { model = build_noise(doc); });
  const bool system_ok = attempt([&] { system = build_system(doc); });

  if (noise_ok && system_ok) {
    attempt([&] {
      if (model.dim() != system.dim)
        fail("noise.q", "length " + std::to_string(model.dim()) +
                            " does not match the system dimension " +
                            std::to_string(system.dim));
    });
    attempt([&] { (void)build_terminal(doc, system.dim); });
    attempt([&] {
      if (const json* x0 = opt(doc, "x0")) (void)as_vector(*x0, "x0", system.dim);
    });
    attempt([&] { (void)run_params(doc, system.dim); });
  }
  attempt([&] {
    if (const json* h = opt(doc, "horizon")) (void)as_positive(*h, "horizon");
  });

  if (system_ok) {
    // Algebraic certification of the standing hypotheses; samples points,
    // integrates nothing.
    rep.structural = galerkin::check_structural(system);
    rep.structural_ran = true;
    if (!rep.structural.monotone_pass)
      rep.issues.push_back({"system", "generator monotonicity fails"});
    if (!rep.structural.bcond_pass)
      rep.issues.push_back({"system", "weak-norm coercivity (B condition) fails"});
    if (!rep.structural.as1_pass)
      rep.issues.push_back({"system", "drift Lipschitz bound fails"});
    if (!rep.structural.as3_pass)
      rep.issues.push_back({"system", "diffusion bound fails"});
  }

  rep.valid = rep.issues.empty();
  return rep;
}

std::string canonical_dump(const json& doc) {
  // nlohmann objects iterate in sorted key order, so dump() is canonical
  // already; pinning it here keeps the hash contract explicit.
  return doc.dump();
}

std::string config_hash(const json& doc) {
  const std::string s = canonical_dump(doc);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "fnv1a-%016" PRIx64, h);
  return buf;
}

std::string version() {
#ifdef LDLAB_VERSION_STRING
  return LDLAB_VERSION_STRING;
#else
  return "0.1.0+untagged";
#endif
}

}  // namespace ldlab::config
