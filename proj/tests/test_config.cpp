#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>

#include "ldlab/config.hpp"
#include "ldlab/laplace.hpp"

using Eigen::VectorXd;
namespace cf = ldlab::config;

namespace {

// Reference FNV-1a 64, written out from the published constants so the
// library hash is checked against an independent implementation.
std::uint64_t fnv1a_reference(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* kDiagonalDoc = R"({
  "schema_version": 1,
  "noise": {"variant": "compound-poisson", "q": [1.0, 0.5]},
  "system": {"kind": "diagonal", "a": [1.0, 2.0]},
  "terminal": {"kind": "bump", "center": [0.3, 0.0], "width": 0.5, "height": 0.8},
  "x0": [0.1, -0.2],
  "horizon": 2.0
})";

const char* kWaveDoc = R"({
  "schema_version": 1,
  "noise": {"variant": "compound-poisson", "q": [1.0, 0.5, 0.25, 0.125]},
  "system": {"kind": "wave", "modes": 2},
  "x0": [0.5, -0.2, 0.3, 0.1]
})";

std::string path_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const cf::ConfigError& e) {
    return e.path();
  }
  return "(no error)";
}

}  // namespace

// ==================== parsing and building ====================

TEST_CASE("build: diagonal document maps onto the library builders") {
  const auto doc = cf::parse_text(kDiagonalDoc);
  const auto cfg = cf::build(doc);

  CHECK(cfg.model.variant == ldlab::noise::Variant::CompoundPoissonGaussian);
  REQUIRE(cfg.model.dim() == 2);
  CHECK(cfg.model.q_spectrum[0] == 1.0);
  CHECK(cfg.model.q_spectrum[1] == 0.5);

  CHECK(cfg.system.dim == 2);
  CHECK(cfg.system.is_diagonal);
  CHECK(cfg.system.A(0, 0) == 1.0);
  CHECK(cfg.system.A(1, 1) == 2.0);

  CHECK(cfg.horizon == 2.0);
  REQUIRE(cfg.x0.size() == 2);
  CHECK(cfg.x0[0] == 0.1);
  CHECK(cfg.x0[1] == -0.2);

  // Dispatch check: the built terminal agrees with a direct builder call.
  VectorXd c(2);
  c << 0.3, 0.0;
  const auto direct = ldlab::laplace::bump_cost(c, 0.5, 0.8);
  VectorXd probe(2);
  probe << 0.4, -0.1;
  CHECK(cfg.terminal(probe) == direct(probe));
  CHECK(cfg.terminal.bounded());
}

TEST_CASE("build: wave document with defaulted terminal and horizon") {
  const auto cfg = cf::build(cf::parse_text(kWaveDoc));
  CHECK(cfg.system.is_wave);
  CHECK(cfg.system.dim == 4);
  CHECK(cfg.system.c0 == 1.0);
  CHECK(cfg.horizon == 1.0);
  VectorXd z = VectorXd::Ones(4);
  CHECK(cfg.terminal(z) == 0.0);
  CHECK(cfg.x0[0] == 0.5);
}

TEST_CASE("build: every terminal kind dispatches to its builder") {
  VectorXd p(1);
  p << 0.7;
  VectorXd probe(1);
  probe << 1.3;

  auto doc = cf::parse_text(R"({
    "schema_version": 1,
    "noise": {"variant": "compound-poisson", "q": [1.0]},
    "system": {"kind": "diagonal", "a": [0.5]}
  })");

  doc["terminal"] = {{"kind", "constant"}, {"c", 0.7}};
  CHECK(cf::build(doc).terminal(probe) == ldlab::laplace::constant_cost(0.7)(probe));

  doc["terminal"] = {{"kind", "linear"}, {"p", {0.7}}};
  CHECK(cf::build(doc).terminal(probe) == ldlab::laplace::linear_cost(p)(probe));
  CHECK(!cf::build(doc).terminal.bounded());

  doc["terminal"] = {{"kind", "clipped-linear"}, {"p", {0.7}}, {"amp", 0.4}};
  CHECK(cf::build(doc).terminal(probe) ==
        ldlab::laplace::clipped_linear_cost(p, 0.4)(probe));

  doc["terminal"] = {{"kind", "bump"}, {"center", {0.7}}, {"width", 0.3}, {"height", 2.0}};
  CHECK(cf::build(doc).terminal(probe) ==
        ldlab::laplace::bump_cost(p, 0.3, 2.0)(probe));
}

TEST_CASE("build: generic system and subordinated noise") {
  const auto doc = cf::parse_text(R"({
    "schema_version": 1,
    "noise": {
      "variant": "subordinated-wiener",
      "q": [1.0, 0.5],
      "rho": {"kind": "point-mass", "t": 1.0}
    },
    "system": {"kind": "generic", "a_matrix": [[1.0, 0.2], [0.0, 2.0]]}
  })");
  const auto cfg = cf::build(doc);
  CHECK(cfg.model.variant == ldlab::noise::Variant::SubordinatedWiener);
  CHECK(cfg.system.A(0, 1) == 0.2);
  CHECK(!cfg.system.is_diagonal);
}

TEST_CASE("build: wave nonlinearities by name") {
  auto doc = cf::parse_text(kWaveDoc);
  doc["system"]["nonlinearity"] = {{"kind", "sine"}, {"scale", 0.3}};
  const auto sine = cf::build(doc);
  REQUIRE(sine.system.f_scalar != nullptr);
  CHECK(sine.system.f_scalar(0.7) == 0.3 * std::sin(0.7));
  CHECK(sine.system.f_lipschitz == 0.3);

  doc["system"]["nonlinearity"] = {{"kind", "tanh"}, {"scale", 0.5}};
  const auto th = cf::build(doc);
  // volatile keeps the oracle on the runtime libm path, matching the lambda
  volatile double arg = 0.7;
  CHECK(th.system.f_scalar(0.7) == 0.5 * std::tanh(arg));
  CHECK(th.system.f_scalar_deriv(0.0) == 0.5);
}

TEST_CASE("parse_file: round-trips through disk, missing file is a ConfigError") {
  const std::string path = "/tmp/ldlab_test_config.json";
  {
    std::ofstream out(path);
    out << kDiagonalDoc;
  }
  const auto doc = cf::parse_file(path);
  CHECK(doc["horizon"] == 2.0);
  CHECK_THROWS_AS((void)cf::parse_file("/tmp/ldlab_no_such_file.json"),
                  cf::ConfigError);
}

TEST_CASE("parse_text: malformed JSON reports the parse position") {
  try {
    (void)cf::parse_text("{\"schema_version\": 1,}");
    FAIL("expected ConfigError");
  } catch (const cf::ConfigError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

// ==================== path-qualified rejection ====================

TEST_CASE("errors: each violation names the offending node") {
  auto base = cf::parse_text(kDiagonalDoc);

  SUBCASE("negative q eigenvalue") {
    auto doc = base;
    doc["noise"]["q"][1] = -0.5;
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise.q[1]");
  }
  SUBCASE("missing required section") {
    auto doc = base;
    doc.erase("noise");
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise");
  }
  SUBCASE("subordinated variant without rho") {
    auto doc = base;
    doc["noise"]["variant"] = "subordinated-wiener";
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise.rho");
  }
  SUBCASE("rho on the compound-poisson variant") {
    auto doc = base;
    doc["noise"]["rho"] = {{"kind", "point-mass"}, {"t", 1.0}};
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise.rho");
  }
  SUBCASE("unknown key anywhere") {
    auto doc = base;
    doc["noise"]["qq"] = 1.0;
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise.qq");
  }
  SUBCASE("schema_version wrong") {
    auto doc = base;
    doc["schema_version"] = 2;
    CHECK(path_of([&] { (void)cf::build(doc); }) == "schema_version");
  }
  SUBCASE("q length against system dimension") {
    auto doc = base;
    doc["noise"]["q"] = {1.0, 0.5, 0.25};
    CHECK(path_of([&] { (void)cf::build(doc); }) == "noise.q");
  }
  SUBCASE("x0 length") {
    auto doc = base;
    doc["x0"] = {0.1};
    CHECK(path_of([&] { (void)cf::build(doc); }) == "x0");
  }
  SUBCASE("terminal center length") {
    auto doc = base;
    doc["terminal"]["center"] = {0.3};
    CHECK(path_of([&] { (void)cf::build(doc); }) == "terminal.center");
  }
  SUBCASE("horizon must be positive") {
    auto doc = base;
    doc["horizon"] = 0.0;
    CHECK(path_of([&] { (void)cf::build(doc); }) == "horizon");
  }
  SUBCASE("wrong scalar type") {
    auto doc = base;
    doc["horizon"] = "2.0";
    CHECK(path_of([&] { (void)cf::build(doc); }) == "horizon");
  }
  SUBCASE("non-monotone generic matrix is rejected at its node") {
    auto doc = base;
    doc["system"] = {{"kind", "generic"}, {"a_matrix", {{-1.0, 0.0}, {0.0, 1.0}}}};
    CHECK(path_of([&] { (void)cf::build(doc); }) == "system.a_matrix");
  }
}

TEST_CASE("errors: what() carries the path prefix verbatim") {
  auto doc = cf::parse_text(kDiagonalDoc);
  doc["noise"]["q"][0] = -1.0;
  try {
    (void)cf::build(doc);
    FAIL("expected ConfigError");
  } catch (const cf::ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.rfind("noise.q[0]: ", 0) == 0);
  }
}

// ==================== run parameters ====================

TEST_CASE("run_params: defaults when the section is absent") {
  const auto doc = cf::parse_text(kDiagonalDoc);
  const auto rp = cf::run_params(doc, 2);
  CHECK(rp.samples == 10000);
  CHECK(rp.n_levels == std::vector<int>{5, 10, 20});
  CHECK(rp.dt == -1.0);
  CHECK(rp.intervals == 32);
  CHECK(rp.restarts == 8);
  CHECK(rp.target.size() == 0);
  CHECK(rp.lambdas == std::vector<double>{1.0, 10.0, 100.0, 1000.0});
}

TEST_CASE("run_params: overrides, scalar n, and vector fields") {
  auto doc = cf::parse_text(kDiagonalDoc);
  doc["run"] = {
      {"samples", 500},     {"n", 7},
      {"dt", 0.125},        {"intervals", 16},
      {"restarts", 3},      {"target", {0.4, 0.2}},
      {"center", {1.0, 0.0}}, {"radius", 0.35},
      {"lambdas", {2.0, 200.0}}, {"paths", 64},
      {"t_grid", {{"lo", 0.0}, {"hi", 1.0}, {"count", 5}}}};
  const auto rp = cf::run_params(doc, 2);
  CHECK(rp.samples == 500);
  CHECK(rp.n_levels == std::vector<int>{7});
  CHECK(rp.dt == 0.125);
  CHECK(rp.intervals == 16);
  CHECK(rp.restarts == 3);
  REQUIRE(rp.target.size() == 2);
  CHECK(rp.target[1] == 0.2);
  CHECK(rp.radius == 0.35);
  CHECK(rp.lambdas == std::vector<double>{2.0, 200.0});
  CHECK(rp.paths == 64);
  CHECK(rp.t_grid.count == 5);
  CHECK(rp.x_grid.count == 9);
}

TEST_CASE("run_params: violations are path-qualified") {
  auto doc = cf::parse_text(kDiagonalDoc);

  SUBCASE("unknown knob") {
    doc["run"] = {{"sample", 100}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.sample");
  }
  SUBCASE("non-positive samples") {
    doc["run"] = {{"samples", 0}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.samples");
  }
  SUBCASE("fractional n") {
    doc["run"] = {{"n", 2.5}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.n");
  }
  SUBCASE("target length against dimension") {
    doc["run"] = {{"target", {0.4}}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.target");
  }
  SUBCASE("grid with one point") {
    doc["run"] = {{"t_grid", {{"lo", 0.0}, {"hi", 1.0}, {"count", 1}}}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.t_grid.count");
  }
  SUBCASE("targets must be an array of vectors") {
    doc["run"] = {{"targets", {0.4, 0.2}}};
    CHECK(path_of([&] { (void)cf::run_params(doc, 2); }) == "run.targets[0]");
  }
}

// ==================== validate ====================

TEST_CASE("validate: wave document passes and the hypotheses are certified") {
  const auto rep = cf::validate(cf::parse_text(kWaveDoc));
  CHECK(rep.valid);
  CHECK(rep.issues.empty());
  REQUIRE(rep.structural_ran);
  CHECK(rep.structural.all_pass);
  CHECK(rep.structural.bcond_pass);
}

TEST_CASE("validate: diagonal document passes") {
  const auto rep = cf::validate(cf::parse_text(kDiagonalDoc));
  CHECK(rep.valid);
  REQUIRE(rep.structural_ran);
  CHECK(rep.structural.all_pass);
}

TEST_CASE("validate: collects issues per section without stopping") {
  auto doc = cf::parse_text(kDiagonalDoc);
  doc["noise"]["q"][0] = -1.0;
  doc["horizon"] = -3.0;
  const auto rep = cf::validate(doc);
  CHECK(!rep.valid);
  REQUIRE(rep.issues.size() >= 2);
  bool saw_q = false, saw_horizon = false;
  for (const auto& issue : rep.issues) {
    saw_q = saw_q || issue.path == "noise.q[0]";
    saw_horizon = saw_horizon || issue.path == "horizon";
  }
  CHECK(saw_q);
  CHECK(saw_horizon);
}

TEST_CASE("validate: missing rho is reported at noise.rho") {
  auto doc = cf::parse_text(kDiagonalDoc);
  doc["noise"]["variant"] = "subordinated-wiener";
  const auto rep = cf::validate(doc);
  CHECK(!rep.valid);
  REQUIRE(rep.issues.size() == 1);
  CHECK(rep.issues[0].path == "noise.rho");
}

// ==================== canonical dump and hash ====================

TEST_CASE("config_hash: matches an independent fnv-1a over the canonical form") {
  const auto doc = cf::parse_text(kDiagonalDoc);
  const std::string canon = cf::canonical_dump(doc);
  CHECK(cf::config_hash(doc) == "fnv1a-" + hex16(fnv1a_reference(canon)));

  // Known answer: the empty object serializes to "{}".
  const auto empty = cf::parse_text("{}");
  CHECK(cf::canonical_dump(empty) == "{}");
  CHECK(cf::config_hash(empty) == "fnv1a-" + hex16(fnv1a_reference("{}")));
}

TEST_CASE("config_hash: invariant to key order and whitespace, not to values") {
  const auto a = cf::parse_text(R"({"b": 2, "a": [1, 2]})");
  const auto b = cf::parse_text("{\n  \"a\": [1,2],\t\"b\": 2\n}");
  CHECK(cf::config_hash(a) == cf::config_hash(b));

  const auto c = cf::parse_text(R"({"b": 2, "a": [1, 3]})");
  CHECK(cf::config_hash(a) != cf::config_hash(c));
}

TEST_CASE("version: non-empty build stamp") {
  CHECK(!cf::version().empty());
}
