#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ldlab/control.hpp"
#include "ldlab/galerkin.hpp"
#include "ldlab/laplace.hpp"
#include "ldlab/noise.hpp"
#include "ldlab/util.hpp"
#include "ldlab/verify.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace vf = ldlab::verify;
using ldlab::util::linspace;

namespace {

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

ldlab::galerkin::GalerkinSystem free_system(int d) {
  return ldlab::galerkin::make_generic(MatrixXd::Zero(d, d));
}

// v(t, x) = <p, x> + (T - t) H0(p) solves both the limit equation and, by
// telescoping of the exponential increment, the prelimit one for every n.
vf::ValueFn linear_value(const ldlab::noise::NoiseModel& model, const VectorXd& p,
                         double T) {
  const double h0 = ldlab::noise::laplace_exponent(model, p);
  return [p, T, h0](double t, const VectorXd& x) {
    return p.dot(x) + (T - t) * h0;
  };
}

}  // namespace

// ==================== value tables ====================

TEST_CASE("value table: layout round-trip through a closed form") {
  const auto fn = [](double t, const VectorXd& x) { return t + 2.0 * x[0]; };
  const auto table = vf::tabulate_function(fn, linspace(0.0, 1.0, 3),
                                           {linspace(-1.0, 1.0, 5)});
  CHECK(table.dim() == 1);
  CHECK(table.slice() == 5);
  CHECK(table.values.size() == 15);
  CHECK(table.at(0, 0) == -2.0);
  CHECK(table.at(2, 4) == 3.0);
  CHECK(table.at(1, 2) == 0.5);

  const auto fn2 = [](double t, const VectorXd& x) { return t + x[0] - x[1]; };
  const auto t2 = vf::tabulate_function(fn2, linspace(0.0, 1.0, 3),
                                        {linspace(0.0, 1.0, 4), linspace(0.0, 2.0, 3)});
  CHECK(t2.dim() == 2);
  CHECK(t2.slice() == 12);
  CHECK(t2.at(1, 3, 0) == 1.5);
  CHECK(t2.at(0, 1, 2) == doctest::Approx(1.0 / 3.0 - 2.0).epsilon(1e-15));
}

TEST_CASE("hjb residual: linear value function cancels to rounding") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.8));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.5);
  const auto table = vf::tabulate_function(linear_value(model, p, 1.0),
                                           linspace(0.0, 1.0, 17),
                                           {linspace(-1.0, 1.0, 17)});
  const auto rep = vf::hjb_residual(sys, model, table);
  CHECK(rep.max_residual < 1e-6);
  CHECK(rep.points > 0);
  CHECK(rep.excluded <= rep.points);

  const auto m2 = ldlab::noise::make_compound_poisson(vec2(1.0, 0.25));
  const VectorXd p2 = vec2(0.5, -0.3);
  const auto table2 = vf::tabulate_function(linear_value(m2, p2, 1.0),
                                            linspace(0.0, 1.0, 9),
                                            {linspace(-1.0, 1.0, 9),
                                             linspace(-1.0, 1.0, 9)});
  const auto rep2 = vf::hjb_residual(free_system(2), m2, table2);
  CHECK(rep2.max_residual < 1e-6);
  CHECK(rep2.points > 0);
}

TEST_CASE("hjb residual: constant table is exactly zero") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = ldlab::galerkin::make_diagonal_system(vec1(1.0));
  const auto table = vf::tabulate_function(
      [](double, const VectorXd&) { return 0.7; }, linspace(0.0, 1.0, 5),
      {linspace(-1.0, 1.0, 7)});
  const auto rep = vf::hjb_residual(sys, model, table);
  CHECK(rep.max_residual == 0.0);
  CHECK(rep.excluded == 0);
  CHECK(rep.points == 3 * 5);
}

TEST_CASE("hjb residual: kink column is excluded and counted") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  // |x| on a grid with 0 as an interior node: second difference 2*dx at the
  // kink, exactly zero on both linear flanks.
  const auto table = vf::tabulate_function(
      [](double, const VectorXd& x) { return std::fabs(x[0]); },
      linspace(0.0, 1.0, 6), {linspace(-1.0, 1.0, 9)});
  const auto rep = vf::hjb_residual(sys, model, table);
  CHECK(rep.excluded == 4);
  CHECK(rep.points == 4 * 7 - 4);

  // Uniform curvature: every second difference equals the median, nothing is
  // an outlier, nothing is excluded.
  const auto smooth = vf::tabulate_function(
      [](double t, const VectorXd& x) { return x[0] * x[0] + t * t; },
      linspace(0.0, 1.0, 6), {linspace(-1.0, 1.0, 9)});
  CHECK(vf::hjb_residual(sys, model, smooth).excluded == 0);
}

TEST_CASE("hjb residual: rejects malformed tables") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);

  vf::ValueTable three_axes;
  three_axes.ts = linspace(0.0, 1.0, 3);
  three_axes.axes = {linspace(0.0, 1.0, 3), linspace(0.0, 1.0, 3),
                     linspace(0.0, 1.0, 3)};
  three_axes.values.assign(81, 0.0);
  CHECK_THROWS_AS(vf::hjb_residual(sys, model, three_axes), std::invalid_argument);

  const auto table1d = vf::tabulate_function(
      [](double, const VectorXd&) { return 0.0; }, linspace(0.0, 1.0, 3),
      {linspace(0.0, 1.0, 3)});
  CHECK_THROWS_AS(
      vf::hjb_residual(free_system(2),
                       ldlab::noise::make_compound_poisson(vec2(1.0, 1.0)),
                       table1d),
      std::invalid_argument);

  auto warped = table1d;
  warped.ts = {0.0, 0.3, 1.0};
  CHECK_THROWS_AS(vf::hjb_residual(sys, model, warped), std::invalid_argument);
}

// ==================== prelimit residual ====================

TEST_CASE("integro residual: linear prelimit function sits inside Monte Carlo noise") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.7));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.6);
  const auto fn = linear_value(model, p, 1.0);
  const std::vector<VectorXd> xs = {vec1(-0.5), vec1(0.2), vec1(1.0)};

  for (double n : {3.0, 12.0}) {
    const auto rep =
        vf::integro_pde_residual(sys, model, fn, n, {0.25, 0.5}, xs, 20000, 11);
    CHECK(rep.points == 6);
    CHECK(rep.std_error > 0.0);
    CHECK(rep.max_residual < 3.0 * rep.std_error);
    CHECK(rep.clipped == 0);
  }
}

TEST_CASE("integro residual: constant function gives bitwise zero") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto rep = vf::integro_pde_residual(
      free_system(1), model, [](double, const VectorXd&) { return 0.4; }, 5.0,
      {0.5}, {vec1(0.0)}, 2000, 0);
  CHECK(rep.max_residual == 0.0);
  CHECK(rep.std_error == 0.0);
  CHECK(rep.clipped == 0);
}

TEST_CASE("integro residual: sine perturbation trips the negative control") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.7));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.6);
  const auto base = linear_value(model, p, 1.0);
  const vf::ValueFn bent = [base](double t, const VectorXd& x) {
    return base(t, x) + 0.1 * std::sin(4.0 * x[0]);
  };
  const std::vector<VectorXd> xs = {vec1(-0.5), vec1(0.2), vec1(1.0)};
  const auto rep =
      vf::integro_pde_residual(sys, model, bent, 3.0, {0.25, 0.5}, xs, 20000, 11);
  CHECK(rep.max_residual > 10.0 * rep.std_error);
}

TEST_CASE("integro residual: exponent clipping is counted and stays finite") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(4.0));
  const auto rep = vf::integro_pde_residual(
      free_system(1), model,
      [](double, const VectorXd& x) { return 500.0 * x[0]; }, 5.0, {0.5},
      {vec1(0.0)}, 4000, 7);
  CHECK(rep.clipped > 0);
  CHECK(std::isfinite(rep.max_residual));
}

TEST_CASE("integro residual: subordinated models are rejected") {
  ldlab::noise::SubordinatorSpec point;
  point.kind = ldlab::noise::SubordinatorSpec::Kind::PointMass;
  point.point_t = 1.0;
  const auto sw = ldlab::noise::make_subordinated(vec1(1.0), point);
  CHECK_THROWS_AS(
      vf::integro_pde_residual(free_system(1), sw,
                               [](double, const VectorXd&) { return 0.0; }, 2.0,
                               {0.5}, {vec1(0.0)}, 100, 0),
      std::invalid_argument);
}

// ==================== laplace limit ====================

TEST_CASE("laplace limit: linear oracle rows are gap-flat") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.8));
  const auto sys = free_system(1);
  const VectorXd p = vec1(0.3);
  const auto g = ldlab::laplace::linear_cost(p);
  const double oracle = p.dot(vec1(0.4)) + ldlab::noise::laplace_exponent(model, p);

  const auto rep = vf::laplace_limit_convergence(sys, model, g, vec1(0.4), 1.0,
                                                 {1.0, 4.0, 10.0}, 20000, 5);
  CHECK(rep.optimizer_converged);
  CHECK(std::fabs(rep.v - oracle) <= 1e-4);
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) {
    CHECK(!row.degenerate);
    CHECK(row.gap <= 3.0 * row.half_width + 1e-4);
    CHECK(std::fabs(row.v_n - rep.v) == row.gap);
  }
}

TEST_CASE("laplace limit: constant terminal cost is exact at every n") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = ldlab::galerkin::make_diagonal_system(vec1(1.0));
  const auto rep = vf::laplace_limit_convergence(
      sys, model, ldlab::laplace::constant_cost(0.7), vec1(0.5), 1.0,
      {2.0, 8.0}, 500, 0, 8, 2);
  CHECK(rep.v == 0.7);
  for (const auto& row : rep.rows) {
    CHECK(row.v_n == 0.7);
    CHECK(row.gap == 0.0);
  }
}

TEST_CASE("tabulate value: nodes match independent solves, final slice is g") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.6));
  const auto sys = ldlab::galerkin::make_diagonal_system(vec1(1.0));
  const auto g = ldlab::laplace::bump_cost(vec1(0.3), 0.5, 0.8);
  const auto ts = linspace(0.0, 1.0, 4);
  const auto axis = linspace(-0.5, 1.0, 5);
  const auto table = vf::tabulate_value(sys, model, g, ts, {axis}, 4, 2, 9);

  for (int j = 0; j < 5; ++j) CHECK(table.at(3, j) == g(vec1(axis[j])));

  const auto direct0 =
      ldlab::control::maximize_value(sys, model, g, vec1(axis[2]), 1.0, 4, 2, 9);
  CHECK(table.at(0, 2) == direct0.value);
  const auto direct1 = ldlab::control::maximize_value(
      sys, model, g, vec1(axis[4]), 1.0 - ts[1], 4, 2, 9);
  CHECK(table.at(1, 4) == direct1.value);

  const auto serial = vf::tabulate_value(sys, model, g, ts, {axis}, 4, 2, 9, -1.0, 1);
  CHECK(serial.values == table.values);
}

TEST_CASE("hjb residual: tabulated decay system stays small under refinement") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(0.6));
  const auto sys = ldlab::galerkin::make_diagonal_system(vec1(1.0));
  const auto g = ldlab::laplace::bump_cost(vec1(0.3), 0.5, 0.8);

  const auto coarse = vf::tabulate_value(sys, model, g, linspace(0.0, 1.0, 17),
                                         {linspace(-0.5, 1.0, 17)}, 4, 2, 9);
  const auto fine = vf::tabulate_value(sys, model, g, linspace(0.0, 1.0, 25),
                                       {linspace(-0.5, 1.0, 25)}, 4, 2, 9);
  const auto rc = vf::hjb_residual(sys, model, coarse);
  const auto rf = vf::hjb_residual(sys, model, fine);
  CHECK(rc.max_residual < 0.05);
  CHECK(rf.max_residual < 0.05);
  CHECK(rf.max_residual <= rc.max_residual + 2e-3);
}

// ==================== packaged suites ====================

TEST_CASE("legendre duality suite: all five checks pass on an anisotropic model") {
  const auto model = ldlab::noise::make_compound_poisson(vec2(1.0, 4.0));
  const auto rep = vf::legendre_duality_suite(model, 3000, 0);
  CHECK(rep.suite == "legendre");
  REQUIRE(rep.checks.size() == 5);
  for (const auto& c : rep.checks) {
    CHECK(!c.name.empty());
    CHECK(c.pass);
    CHECK(c.measured <= c.threshold);
  }
  CHECK(rep.pass());
}

TEST_CASE("legendre duality suite: kernel directions never poison the bounds") {
  const auto model = ldlab::noise::make_compound_poisson(vec2(1.0, 1e-16));
  const auto rep = vf::legendre_duality_suite(model, 500, 3);
  CHECK(rep.pass());
}

TEST_CASE("yosida suite: wave gaps quarter across two decades") {
  const auto sys = ldlab::galerkin::build_wave_system(2);
  VectorXd q(4);
  q << 1.0, 0.5, 0.25, 0.125;
  const auto model = ldlab::noise::make_compound_poisson(q);
  VectorXd x0(4);
  x0 << 0.5, -0.2, 0.3, 0.1;

  const auto rep = vf::yosida_convergence_suite(sys, model, x0, 2.0, 1.0,
                                                {2.0, 20.0, 200.0}, 300, 1,
                                                1.0 / 64);
  CHECK(rep.suite == "yosida");
  REQUIRE(rep.checks.size() == 3);
  for (const auto& c : rep.checks) CHECK(c.pass);
}

TEST_CASE("yosida suite: exact semigroup keeps every gap at zero") {
  const auto sys = free_system(1);
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto rep = vf::yosida_convergence_suite(sys, model, vec1(0.7), 1.0, 1.0,
                                                {1.0, 10.0, 100.0}, 50, 0,
                                                1.0 / 32);
  CHECK(rep.pass());
}

TEST_CASE("yosida suite: rejects spans under two decades") {
  const auto sys = free_system(1);
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  CHECK_THROWS_AS(vf::yosida_convergence_suite(sys, model, vec1(0.0), 1.0, 1.0,
                                               {1.0, 50.0}, 10, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(vf::yosida_convergence_suite(sys, model, vec1(0.0), 1.0, 1.0,
                                               {100.0, 1.0}, 10, 0),
                  std::invalid_argument);
}

// ==================== ldp bracketing ====================

TEST_CASE("ldp bracket: synthetic rows exercise both verdicts") {
  const auto row = [](double rate, double ci, bool flagged) {
    vf::LdpRow r;
    r.n = 5.0;
    r.rate = rate;
    r.ci = ci;
    r.flagged = flagged;
    return r;
  };
  CHECK(vf::ldp_bracket_holds({row(0.5, 0.05, false)}, 0.45, 0.55, true));
  CHECK(!vf::ldp_bracket_holds({row(0.7, 0.01, false)}, 0.45, 0.55, true));
  CHECK(!vf::ldp_bracket_holds({row(0.3, 0.01, false)}, 0.45, 0.55, true));
  // flagged rows are reported, never asserted
  CHECK(vf::ldp_bracket_holds({row(99.0, 0.0, true), row(0.5, 0.05, false)},
                              0.45, 0.55, true));
  CHECK(!vf::ldp_bracket_holds({row(99.0, 0.0, true)}, 0.45, 0.55, true));
  CHECK(!vf::ldp_bracket_holds({row(0.5, 0.05, false)}, 0.45, 0.55, false));
}

TEST_CASE("ldp check: ball around the typical endpoint decays at rate near zero") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  const auto rep = vf::ldp_probability_check(sys, model, vec1(0.4), 1.0, 0.4,
                                             0.6, {6.0, 12.0}, 3000, 2,
                                             1.0 / 64, 9);
  CHECK(rep.feasible);
  CHECK(rep.inf_closed <= 1e-6);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(!row.flagged);
    CHECK(row.rate < 0.1);
  }
  // the rate decays toward inf I = 0 as the prefactor bias shrinks
  CHECK(rep.rows[1].rate < rep.rows[0].rate);
}

TEST_CASE("ldp check: empirical rates honor the Chernoff side of the bracket") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  const double inner = ldlab::noise::radial_cost(model, 0.45);

  const auto rep = vf::ldp_probability_check(sys, model, vec1(0.0), 1.0, 0.9,
                                             0.45, {3.0, 8.0}, 20000, 4,
                                             1.0 / 64, 9);
  CHECK(rep.feasible);
  CHECK(std::fabs(rep.inf_closed - inner) <= 5e-3);
  CHECK(rep.inf_open > rep.inf_closed);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(!row.flagged);
    CHECK(row.rate >= rep.inf_closed - 2.0 * row.ci - 5e-3);
  }
  CHECK(rep.rows[1].rate < rep.rows[0].rate);
}

TEST_CASE("ldp check: unreachable ball is flagged, never asserted") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1e-16));
  const auto sys = free_system(1);
  const auto rep = vf::ldp_probability_check(sys, model, vec1(0.0), 1.0, 1.0,
                                             0.2, {2.0, 4.0}, 1000, 0,
                                             1.0 / 64, 5);
  for (const auto& row : rep.rows) {
    CHECK(row.hits == 0);
    CHECK(row.flagged);
  }
  CHECK(std::isinf(rep.inf_closed));
  CHECK(!rep.feasible);
  CHECK(!rep.pass);
}

TEST_CASE("ldp check: thread count never changes the verdict") {
  const auto model = ldlab::noise::make_compound_poisson(vec1(1.0));
  const auto sys = free_system(1);
  const auto one = vf::ldp_probability_check(sys, model, vec1(0.4), 1.0, 0.4,
                                             0.5, {2.0}, 2000, 2, 1.0 / 64, 5, 1);
  const auto four = vf::ldp_probability_check(sys, model, vec1(0.4), 1.0, 0.4,
                                              0.5, {2.0}, 2000, 2, 1.0 / 64, 5, 4);
  REQUIRE(one.rows.size() == four.rows.size());
  CHECK(one.rows[0].hits == four.rows[0].hits);
  CHECK(one.rows[0].rate == four.rows[0].rate);
  CHECK(one.pass == four.pass);
}

TEST_CASE("ldp check: rejects dimensions above one") {
  const auto model = ldlab::noise::make_compound_poisson(vec2(1.0, 1.0));
  CHECK_THROWS_AS(vf::ldp_probability_check(free_system(2), model,
                                            vec2(0.0, 0.0), 1.0, 0.5, 0.2,
                                            {2.0}, 100, 0),
                  std::invalid_argument);
}
