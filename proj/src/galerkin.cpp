#include "ldlab/galerkin.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

#include "ldlab/rng.hpp"

namespace ldlab::galerkin {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd symmetric_sqrt(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.eigenvalues().minCoeff() < 0.0)
    throw std::invalid_argument("matrix square root of an indefinite matrix");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

MatrixXd symmetric_inv_sqrt(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("inverse square root needs a positive matrix");
  return es.eigenvectors() *
         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double min_sym_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

// Sine collocation matrix on 4K points: R(j,k) = sin((k+1) xi_j),
// xi_j = (j+1) pi / (N+1). Columns are orthogonal with squared norm (N+1)/2.
MatrixXd sine_collocation(int modes) {
  const int n = 4 * modes;
  MatrixXd r(n, modes);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < modes; ++k)
      r(j, k) = std::sin((k + 1) * (j + 1) * M_PI / (n + 1));
  return r;
}

}  // namespace

// ---------- drift / diffusion descriptors ----------

VectorXd GalerkinSystem::drift(const VectorXd& x) const {
  switch (f_kind) {
    case DriftKind::Zero:
      return VectorXd::Zero(dim);
    case DriftKind::Linear:
      return K_lin * x;
    case DriftKind::NemytskiiSine: {
      // Nemytskii map of f on the displacement, expressed in energy
      // coordinates: u_k = a_k / omega_k, output added to the velocity slots.
      const int n = static_cast<int>(R_colloc.rows());
      VectorXd u(modes);
      for (int k = 0; k < modes; ++k) u[k] = x[2 * k] / (k + 1);
      VectorXd grid = R_colloc * u;
      for (int j = 0; j < n; ++j) grid[j] = f_scalar(grid[j]);
      const VectorXd coeff = (2.0 / (n + 1)) * (R_colloc.transpose() * grid);
      VectorXd out = VectorXd::Zero(dim);
      for (int k = 0; k < modes; ++k) out[2 * k + 1] = coeff[k];
      return out;
    }
  }
  return VectorXd::Zero(dim);
}

VectorXd GalerkinSystem::drift_jacobian_t(const VectorXd& x,
                                          const VectorXd& y) const {
  switch (f_kind) {
    case DriftKind::Zero:
      return VectorXd::Zero(dim);
    case DriftKind::Linear:
      return K_lin.transpose() * y;
    case DriftKind::NemytskiiSine: {
      // J_F = [[0, 0], [c R^T diag(f'(Ru)) R D, 0]] in (a, b) blocks with
      // D = diag(1/omega); the transpose routes velocity components of y
      // back to displacement slots.
      const int n = static_cast<int>(R_colloc.rows());
      VectorXd u(modes), yb(modes);
      for (int k = 0; k < modes; ++k) {
        u[k] = x[2 * k] / (k + 1);
        yb[k] = y[2 * k + 1];
      }
      VectorXd grid = R_colloc * u;
      for (int j = 0; j < n; ++j) grid[j] = f_scalar_deriv(grid[j]);
      const VectorXd mixed = grid.cwiseProduct(R_colloc * yb);
      const VectorXd back = (2.0 / (n + 1)) * (R_colloc.transpose() * mixed);
      VectorXd out = VectorXd::Zero(dim);
      for (int k = 0; k < modes; ++k) out[2 * k] = back[k] / (k + 1);
      return out;
    }
  }
  return VectorXd::Zero(dim);
}

VectorXd GalerkinSystem::diffusion_apply(const VectorXd& x,
                                         const VectorXd& z) const {
  switch (g_kind) {
    case DiffusionKind::Identity:
      return z;
    case DiffusionKind::Constant:
      return G0 * z;
    case DiffusionKind::DiagonalMap: {
      VectorXd out(dim);
      for (int i = 0; i < dim; ++i) out[i] = g_diag(x[i]) * z[i];
      return out;
    }
  }
  return z;
}

MatrixXd GalerkinSystem::diffusion_matrix(const VectorXd& x) const {
  switch (g_kind) {
    case DiffusionKind::Identity:
      return MatrixXd::Identity(dim, dim);
    case DiffusionKind::Constant:
      return G0;
    case DiffusionKind::DiagonalMap: {
      VectorXd d(dim);
      for (int i = 0; i < dim; ++i) d[i] = g_diag(x[i]);
      return d.asDiagonal();
    }
  }
  return MatrixXd::Identity(dim, dim);
}

VectorXd GalerkinSystem::diffusion_t(const VectorXd& x, const VectorXd& y) const {
  switch (g_kind) {
    case DiffusionKind::Identity:
      return y;
    case DiffusionKind::Constant:
      return G0.transpose() * y;
    case DiffusionKind::DiagonalMap:
      return diffusion_apply(x, y);  // diagonal, hence self-adjoint
  }
  return y;
}

VectorXd GalerkinSystem::diffusion_dx_t(const VectorXd& x, const VectorXd& c,
                                        const VectorXd& y) const {
  if (g_kind != DiffusionKind::DiagonalMap) return VectorXd::Zero(dim);
  VectorXd out(dim);
  for (int i = 0; i < dim; ++i) out[i] = g_diag_deriv(x[i]) * c[i] * y[i];
  return out;
}

// ---------- norms, resolvent, semigroup ----------

double minus_one_norm(const GalerkinSystem& sys, const VectorXd& x) {
  return (sys.B_half * x).norm();
}

MatrixXd resolvent(const GalerkinSystem& sys, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("resolvent: lambda must be > 0");
  const MatrixXd m = lambda * MatrixXd::Identity(sys.dim, sys.dim) + sys.A;
  return m.partialPivLu().solve(MatrixXd::Identity(sys.dim, sys.dim));
}

MatrixXd yosida(const GalerkinSystem& sys, double lambda) {
  return lambda * sys.A * resolvent(sys, lambda);
}

GalerkinSystem yosida_system(const GalerkinSystem& sys, double lambda) {
  GalerkinSystem out = sys;
  out.A = yosida(sys, lambda);
  out.use_rotation_semigroup = false;  // A_lambda is not skew
  out.is_diagonal = sys.is_diagonal;   // diagonal A stays diagonal
  return out;
}

MatrixXd semigroup_matrix(const GalerkinSystem& sys, double t) {
  if (sys.use_rotation_semigroup) {
    MatrixXd s = MatrixXd::Zero(sys.dim, sys.dim);
    for (int k = 0; k < sys.modes; ++k) {
      const double w = k + 1;
      const double c = std::cos(w * t), sn = std::sin(w * t);
      s(2 * k, 2 * k) = c;
      s(2 * k, 2 * k + 1) = sn;
      s(2 * k + 1, 2 * k) = -sn;
      s(2 * k + 1, 2 * k + 1) = c;
    }
    return s;
  }
  if (sys.is_diagonal) {
    VectorXd d(sys.dim);
    for (int i = 0; i < sys.dim; ++i) d[i] = std::exp(-t * sys.A(i, i));
    return d.asDiagonal();
  }
  return (-t * sys.A).exp();
}

VectorXd semigroup_apply(const GalerkinSystem& sys, double t, const VectorXd& x) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: t must be >= 0");
  if (t == 0.0) return x;
  if (sys.use_rotation_semigroup) {
    VectorXd out(sys.dim);
    for (int k = 0; k < sys.modes; ++k) {
      const double w = k + 1;
      const double c = std::cos(w * t), sn = std::sin(w * t);
      out[2 * k] = c * x[2 * k] + sn * x[2 * k + 1];
      out[2 * k + 1] = -sn * x[2 * k] + c * x[2 * k + 1];
    }
    return out;
  }
  if (sys.is_diagonal) {
    VectorXd out(sys.dim);
    for (int i = 0; i < sys.dim; ++i) out[i] = std::exp(-t * sys.A(i, i)) * x[i];
    return out;
  }
  return semigroup_matrix(sys, t) * x;
}

VectorXd semigroup_apply_adjoint(const GalerkinSystem& sys, double t,
                                 const VectorXd& x) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply_adjoint: t must be >= 0");
  if (t == 0.0) return x;
  if (sys.use_rotation_semigroup) {
    VectorXd out(sys.dim);
    for (int k = 0; k < sys.modes; ++k) {
      const double w = k + 1;
      const double c = std::cos(w * t), sn = std::sin(w * t);
      out[2 * k] = c * x[2 * k] - sn * x[2 * k + 1];
      out[2 * k + 1] = sn * x[2 * k] + c * x[2 * k + 1];
    }
    return out;
  }
  if (sys.is_diagonal) return semigroup_apply(sys, t, x);
  return semigroup_matrix(sys, t).transpose() * x;
}

// ---------- builders ----------

GalerkinSystem make_generic(MatrixXd A, GenericOptions opts) {
  const int d = static_cast<int>(A.rows());
  if (d == 0 || A.cols() != d) throw std::invalid_argument("A must be square");
  if (min_sym_eig(A) < -1e-10)
    throw std::invalid_argument("A is not monotone (sym part has a negative eigenvalue)");

  GalerkinSystem sys;
  sys.dim = d;
  sys.A = std::move(A);
  sys.is_diagonal = sys.A.isDiagonal(1e-300);

  if (opts.B.size() > 0) {
    sys.B = opts.B;
  } else {
    const MatrixXd i = MatrixXd::Identity(d, d);
    sys.B = symmetric_inv_sqrt((sys.A + i) * (sys.A.transpose() + i));
  }
  sys.B_half = symmetric_sqrt(sys.B);

  if (opts.c0 >= 0.0) {
    sys.c0 = opts.c0;
  } else {
    // Smallest c0 with sym(A^T B + c0 B) >= 0, from the pencil in B-metric.
    const MatrixXd bh_inv = symmetric_inv_sqrt(sys.B);
    const MatrixXd core = bh_inv * 0.5 *
                          (sys.A.transpose() * sys.B + sys.B * sys.A) * bh_inv;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(core);
    sys.c0 = std::max(0.0, -es.eigenvalues().minCoeff());
  }

  sys.f_kind = opts.f_kind;
  sys.K_lin = opts.K_lin;
  sys.g_kind = opts.g_kind;
  sys.G0 = opts.G0;
  sys.g_diag = opts.g_diag;
  sys.g_diag_deriv = opts.g_diag_deriv;

  if (opts.M > 0.0) {
    sys.M = opts.M;
  } else {
    double mf = 0.0;
    if (sys.f_kind == DriftKind::Linear) {
      const MatrixXd bh_inv = symmetric_inv_sqrt(sys.B);
      Eigen::JacobiSVD<MatrixXd> svd(sys.K_lin * bh_inv);
      mf = svd.singularValues()[0];
    }
    double mg = 1.0;
    if (sys.g_kind == DiffusionKind::Constant) {
      Eigen::JacobiSVD<MatrixXd> svd(sys.G0);
      mg = svd.singularValues()[0];
    } else if (sys.g_kind == DiffusionKind::DiagonalMap) {
      for (double v = -10.0; v <= 10.0; v += 0.01)
        mg = std::max(mg, std::fabs(sys.g_diag(v)));
    }
    sys.M = std::max({1.0, mf, mg});
  }
  return sys;
}

GalerkinSystem make_diagonal_system(const VectorXd& a_diag) {
  return make_generic(MatrixXd(a_diag.asDiagonal()));
}

GalerkinSystem build_wave_system(int modes) {
  return build_wave_system(modes, nullptr, nullptr, 0.0);
}

GalerkinSystem build_wave_system(int modes, std::function<double(double)> f,
                                 std::function<double(double)> f_deriv,
                                 double f_lip) {
  if (modes < 1) throw std::invalid_argument("build_wave_system: modes must be >= 1");
  GalerkinSystem sys;
  sys.dim = 2 * modes;
  sys.modes = modes;
  sys.is_wave = true;
  sys.use_rotation_semigroup = true;
  sys.c0 = 1.0;

  sys.A = MatrixXd::Zero(sys.dim, sys.dim);
  VectorXd b_diag(sys.dim);
  for (int k = 0; k < modes; ++k) {
    const double w = k + 1;  // omega_k = sqrt(mu_k), mu_k = k^2
    sys.A(2 * k, 2 * k + 1) = -w;
    sys.A(2 * k + 1, 2 * k) = w;
    b_diag[2 * k] = 1.0 / w;
    b_diag[2 * k + 1] = 1.0 / w;
  }
  sys.B = b_diag.asDiagonal();
  sys.B_half = b_diag.cwiseSqrt().asDiagonal();

  if (f) {
    sys.f_kind = DriftKind::NemytskiiSine;
    sys.f_scalar = std::move(f);
    sys.f_scalar_deriv = std::move(f_deriv);
    sys.f_lipschitz = f_lip;
    sys.R_colloc = sine_collocation(modes);
  }
  sys.M = std::max(1.0, f_lip);
  return sys;
}

// ---------- structural certificates ----------

StructuralReport check_structural(const GalerkinSystem& sys, int samples,
                                  std::uint64_t seed) {
  StructuralReport rep;
  rep.min_eig_sym_a = min_sym_eig(sys.A);
  rep.monotone_pass = rep.min_eig_sym_a >= -1e-10;

  const MatrixXd bc = sys.A.transpose() * sys.B + sys.c0 * sys.B;
  rep.min_eig_bcond = min_sym_eig(bc);
  rep.bcond_pass = rep.min_eig_bcond >= -1e-10;

  // Margin in the B-metric (the strong-form view of the same condition).
  const MatrixXd bh_inv = symmetric_inv_sqrt(sys.B);
  rep.strong_margin = min_sym_eig(bh_inv * 0.5 * (bc + bc.transpose()) * bh_inv);

  rng::Substream rs(seed, 0);
  double g_bound = 0.0, f_ratio = 0.0, skew = 0.0;
  const bool g_trivial = sys.g_kind == DiffusionKind::Identity;
  for (int trial = 0; trial < samples; ++trial) {
    VectorXd x(sys.dim), y(sys.dim);
    for (int i = 0; i < sys.dim; ++i) {
      x[i] = 2.0 * rs.normal();
      y[i] = 2.0 * rs.normal();
    }
    if (g_trivial) {
      g_bound = 1.0;
    } else {
      Eigen::JacobiSVD<MatrixXd> svd(sys.diffusion_matrix(x));
      g_bound = std::max(g_bound, svd.singularValues()[0]);
    }
    if (sys.f_kind != DriftKind::Zero) {
      const double den = minus_one_norm(sys, x - y);
      if (den > 1e-12)
        f_ratio = std::max(f_ratio, (sys.drift(x) - sys.drift(y)).norm() / den);
    }
    const double n2 = x.squaredNorm();
    if (n2 > 1e-12) skew = std::max(skew, std::fabs(x.dot(sys.A * x)) / n2);
  }
  rep.diffusion_bound = g_bound;
  rep.as3_pass = g_bound <= sys.M + 1e-9;
  rep.drift_ratio = f_ratio;
  rep.as1_pass = sys.f_kind == DriftKind::Zero ||
                 f_ratio <= sys.M * (1.0 + 1e-6) + 1e-9;
  rep.skew_defect = skew;
  rep.all_pass = rep.monotone_pass && rep.bcond_pass && rep.as3_pass && rep.as1_pass;
  return rep;
}

}  // namespace ldlab::galerkin
