#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ldlab::util {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs fn(k) for k in [0, count), chunked across workers. Each index is
// visited exactly once, so results stored per index never depend on the
// worker count. threads <= 0 picks a pool size automatically (and stays
// serial for small jobs where spawn cost dominates).
inline void parallel_indexed(int count, int threads,
                             const std::function<void(int)>& fn) {
  int workers = threads;
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
    workers = std::min(workers, 16);
    if (count < 1000) workers = 1;
  }
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<int> next{0};
  constexpr int kBlock = 64;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int start = next.fetch_add(kBlock);
        if (start >= count) return;
        const int stop = std::min(count, start + kBlock);
        for (int k = start; k < stop; ++k) fn(k);
      }
    });
  }
  for (auto& t : pool) t.join();
}

// Streaming mean/variance (Welford). Stable for long Monte Carlo sums.
class RunningStat {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  long long count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const { return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0; }
  double std_error() const {
    return count_ > 0 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }

 private:
  long long count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// count evenly spaced values from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 2) throw std::invalid_argument("linspace: need at least two points");
  std::vector<double> out(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) out[i] = lo + step * i;
  out.back() = hi;
  return out;
}

// log(sum exp(x_i)) with max subtraction; safe for x_i spanning hundreds of units.
inline double log_sum_exp(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Golden-section search for the maximum of a unimodal f on [a,b].
template <typename F>
double golden_section_max(F&& f, double a, double b, double tol) {
  constexpr double invphi = 0.6180339887498948482;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// Root of an increasing function: returns x with fn(x) = target.
// Bisection to width tol_x, then a few Newton polishes if slope is supplied.
template <typename F>
double solve_increasing(F&& fn, double target, double lo, double hi, double tol_x,
                        int max_iter = 200) {
  double flo = fn(lo) - target;
  double fhi = fn(hi) - target;
  if (flo > 0 || fhi < 0) throw NumericalError("solve_increasing: root not bracketed");
  for (int i = 0; i < max_iter && hi - lo > tol_x; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fn(mid) - target;
    if (fm <= 0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct LbfgsOptions {
  int max_iterations = 400;
  int history = 10;
  double grad_tolerance = 1e-9;   // on the infinity norm, scaled by 1+|f|
  double step_tolerance = 1e-14;  // minimum line-search step
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS minimizer with Armijo backtracking. The objective
// callable fills the gradient and returns the value.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const LbfgsOptions& opts = {}) {
  const int dim = static_cast<int>(x0.size());
  LbfgsResult out;
  out.x = std::move(x0);
  Eigen::VectorXd g(dim);
  double f = fg(out.x, g);
  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;

  // Line-search memory: starting near the last accepted step keeps a badly
  // scaled stretch at one or two evaluations per iteration instead of a full
  // backtracking cascade. Doubling lets the step recover to 1 afterwards.
  double step_start = 1.0;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    out.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tolerance * (1.0 + std::fabs(f))) {
      out.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = g;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma = s_hist[m - 1].dot(y_hist[m - 1]) / y_hist[m - 1].squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0) {  // history went stale; fall back to steepest descent
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = step_start;
    double f_new = f;
    Eigen::VectorXd x_new, g_new(dim);
    bool accepted = false;
    while (step > opts.step_tolerance) {
      x_new = out.x + step * dir;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step_start = std::min(1.0, 2.0 * step);

    Eigen::VectorXd s = x_new - out.x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.history) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    out.x = std::move(x_new);
    f = f_new;
    g = g_new;
  }
  out.f = f;
  out.grad = g;
  if (!out.converged)
    out.converged = g.lpNorm<Eigen::Infinity>() <= 100 * opts.grad_tolerance * (1.0 + std::fabs(f));
  return out;
}

// FNV-1a over a byte string; used to stamp configs into result files.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace ldlab::util
