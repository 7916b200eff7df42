#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ldlab/rng.hpp"
#include "ldlab/util.hpp"

using ldlab::util::RunningStat;

namespace {

// Two-pass mean/variance oracle, deliberately not Welford.
std::pair<double, double> oracle_mean_var(const std::vector<double>& xs) {
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / (xs.size() - 1)};
}

}  // namespace

// ==================== log-sum-exp ====================

TEST_CASE("log_sum_exp matches direct evaluation at small magnitudes") {
  std::vector<double> xs = {0.1, -0.3, 1.7, 0.0, -2.2};
  double direct = 0.0;
  for (double x : xs) direct += std::exp(x);
  CHECK(ldlab::util::log_sum_exp(xs) == doctest::Approx(std::log(direct)).epsilon(1e-14));
}

TEST_CASE("log_sum_exp survives magnitudes that overflow exp") {
  std::vector<double> xs = {1000.0, 1000.0 + std::log(2.0)};
  // exact: log(e^1000 + 2 e^1000) = 1000 + log 3
  CHECK(ldlab::util::log_sum_exp(xs) ==
        doctest::Approx(1000.0 + std::log(3.0)).epsilon(1e-14));
  std::vector<double> lows = {-1000.0, -1000.0};
  CHECK(ldlab::util::log_sum_exp(lows) ==
        doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("log_sum_exp shift identity") {
  std::vector<double> xs = {0.4, -1.1, 2.6, 0.9};
  const double base = ldlab::util::log_sum_exp(xs);
  for (double& x : xs) x += 7.5;
  CHECK(ldlab::util::log_sum_exp(xs) == doctest::Approx(base + 7.5).epsilon(1e-13));
}

// ==================== running statistics ====================

TEST_CASE("RunningStat agrees with the two-pass oracle") {
  ldlab::rng::Substream rs(99, 0);
  std::vector<double> xs;
  RunningStat st;
  for (int i = 0; i < 1000; ++i) {
    const double x = rs.normal() * 3.0 + 1.0;
    xs.push_back(x);
    st.add(x);
  }
  const auto [mean, var] = oracle_mean_var(xs);
  CHECK(st.count() == 1000);
  CHECK(st.mean() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(st.variance() == doctest::Approx(var).epsilon(1e-10));
  CHECK(st.std_error() == doctest::Approx(std::sqrt(var / 1000.0)).epsilon(1e-10));
}

// ==================== golden section ====================

TEST_CASE("golden_section_max finds the vertex of a concave parabola") {
  auto f = [](double x) { return -(x - M_PI) * (x - M_PI) + 2.0; };
  // dense grid oracle
  double best_x = 0.0, best_v = -1e300;
  for (double x = 0.0; x <= 6.0; x += 1e-5)
    if (f(x) > best_v) { best_v = f(x); best_x = x; }
  const double x_star = ldlab::util::golden_section_max(f, 0.0, 6.0, 1e-10);
  CHECK(x_star == doctest::Approx(best_x).epsilon(1e-4));
  CHECK(x_star == doctest::Approx(M_PI).epsilon(1e-8));
}

TEST_CASE("golden_section_max handles a flat-topped unimodal function") {
  auto f = [](double x) { return -std::pow(x - 1.5, 4); };
  const double x_star = ldlab::util::golden_section_max(f, 0.0, 4.0, 1e-12);
  CHECK(f(x_star) >= -1e-8);
}

// ==================== monotone root solve ====================

TEST_CASE("solve_increasing inverts a cubic") {
  auto fn = [](double x) { return x * x * x; };
  for (double target : {0.001, 1.0, 8.0, 27.0, 300.0}) {
    const double x = ldlab::util::solve_increasing(fn, target, 0.0, 10.0, 1e-12);
    CHECK(x == doctest::Approx(std::cbrt(target)).epsilon(1e-9));
  }
}

// ==================== RNG substreams ====================

TEST_CASE("substreams are deterministic and distinct") {
  ldlab::rng::Substream a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform();
    CHECK(ua == b.uniform());
    CHECK(ua > 0.0);
    CHECK(ua <= 1.0);
  }
  // different stream index decorrelates
  ldlab::rng::Substream a2(42, 7);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a2.uniform() == c.uniform();
  CHECK(same < 3);
}

TEST_CASE("normal moments within Monte Carlo error") {
  ldlab::rng::Substream rs(7, 0);
  RunningStat st, st2;
  for (int i = 0; i < 200000; ++i) {
    const double z = rs.normal();
    st.add(z);
    st2.add(z * z);
  }
  CHECK(std::fabs(st.mean()) <= 3.0 * st.std_error());
  CHECK(std::fabs(st2.mean() - 1.0) <= 3.0 * st2.std_error());
}

TEST_CASE("exponential mean within Monte Carlo error") {
  ldlab::rng::Substream rs(11, 3);
  RunningStat st;
  for (int i = 0; i < 100000; ++i) st.add(rs.exponential());
  CHECK(std::fabs(st.mean() - 1.0) <= 3.0 * st.std_error());
}

TEST_CASE("poisson moments across the small/large mean split") {
  for (double mean : {0.5, 7.0, 80.0, 400.0}) {
    ldlab::rng::Substream rs(13, static_cast<uint64_t>(mean * 100));
    RunningStat st, sv;
    const int N = 40000;
    for (int i = 0; i < N; ++i) {
      const double k = static_cast<double>(rs.poisson(mean));
      st.add(k);
      sv.add((k - mean) * (k - mean));
    }
    CHECK(std::fabs(st.mean() - mean) <= 4.0 * st.std_error());
    CHECK(std::fabs(sv.mean() - mean) <= 4.0 * sv.std_error());
  }
}

// ==================== L-BFGS ====================

TEST_CASE("lbfgs minimizes a strictly convex quadratic exactly") {
  // f(x) = 1/2 x^T D x - b^T x, minimizer D^{-1} b (oracle: componentwise b_i/d_i)
  Eigen::VectorXd d(4), b(4);
  d << 1.0, 4.0, 9.0, 0.5;
  b << 1.0, -2.0, 3.0, 0.25;
  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = d.asDiagonal() * x - b;
    return 0.5 * x.dot(d.asDiagonal() * x) - b.dot(x);
  };
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4);
  const auto res = ldlab::util::lbfgs_minimize(fg, x0, {});
  for (int i = 0; i < 4; ++i)
    CHECK(res.x[i] == doctest::Approx(b[i] / d[i]).epsilon(1e-7));
  CHECK(res.converged);
}

TEST_CASE("lbfgs reaches the Rosenbrock minimum") {
  auto fg = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double a = 1.0 - x[0];
    const double bq = x[1] - x[0] * x[0];
    grad.resize(2);
    grad[0] = -2.0 * a - 400.0 * x[0] * bq;
    grad[1] = 200.0 * bq;
    return a * a + 100.0 * bq * bq;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  ldlab::util::LbfgsOptions opt;
  opt.max_iterations = 2000;
  const auto res = ldlab::util::lbfgs_minimize(fg, x0, opt);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("lbfgs gradient tolerance is an actual stopping certificate") {
  auto fg = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    grad = 2.0 * x;
    return x.squaredNorm();
  };
  Eigen::VectorXd x0(3);
  x0 << 5.0, -3.0, 2.0;
  const auto res = ldlab::util::lbfgs_minimize(fg, x0, {});
  Eigen::VectorXd g;
  fg(res.x, g);
  CHECK(g.norm() <= 1e-7);
}

// ==================== FNV-1a ====================

TEST_CASE("fnv1a matches published reference digests") {
  // Reference values for the 64-bit FNV-1a test vectors.
  CHECK(ldlab::util::fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(ldlab::util::fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(ldlab::util::fnv1a("foobar") == 0x85944171f73967e8ull);
}
