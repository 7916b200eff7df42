#pragma once
// Finite-dimensional operator quadruples (A, F, G, B): structural-condition
// certificates, Yosida approximations, semigroup action, and the wave-equation
// builder.
//
// Conventions. Trajectories follow dX = (-A X + F(X)) dt + G(X) dL, so A is
// the *negative* generator and monotone A (sym part >= 0) gives a contraction
// semigroup S(t) = e^{-tA}. The weak norm is |x|_{-1} = |B^{1/2} x|.
//
// Wave systems live in interleaved energy coordinates
//   x = [a_1, b_1, ..., a_K, b_K],  a_k = omega_k u_k,  b_k = v_k,
// with omega_k = k the Dirichlet frequencies on (0, pi) (mu_k = k^2). In these
// coordinates the block operator is skew (per-mode rotation), the Euclidean
// norm is the energy norm, and B = diag(1/omega_k) on each (a_k, b_k) pair.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ldlab::galerkin {

enum class DriftKind { Zero, Linear, NemytskiiSine };
enum class DiffusionKind { Identity, Constant, DiagonalMap };

struct GalerkinSystem {
  int dim = 0;
  Eigen::MatrixXd A;       // negative generator
  Eigen::MatrixXd B;       // symmetric positive weak-norm weight
  Eigen::MatrixXd B_half;  // symmetric square root of B, cached
  double c0 = 0.0;

  DriftKind f_kind = DriftKind::Zero;
  Eigen::MatrixXd K_lin;  // F(x) = K_lin x when f_kind == Linear

  DiffusionKind g_kind = DiffusionKind::Identity;
  Eigen::MatrixXd G0;  // constant diffusion matrix when g_kind == Constant
  std::function<double(double)> g_diag;        // DiagonalMap: G(x) = diag(g_diag(x_i))
  std::function<double(double)> g_diag_deriv;  // its derivative, for adjoints

  double M = 1.0;  // Lipschitz/bound constant the hypotheses are checked against

  // Wave bookkeeping. use_rotation_semigroup selects the exact per-mode
  // rotation; a Yosida-modified copy keeps modes/f but loses the closed form.
  bool is_wave = false;
  bool use_rotation_semigroup = false;
  bool is_diagonal = false;  // diagonal A: componentwise semigroup
  int modes = 0;
  std::function<double(double)> f_scalar;        // Nemytskii nonlinearity
  std::function<double(double)> f_scalar_deriv;  // its derivative
  double f_lipschitz = 0.0;
  Eigen::MatrixXd R_colloc;  // sine collocation matrix, NemytskiiSine only

  Eigen::VectorXd drift(const Eigen::VectorXd& x) const;  // F(x)
  Eigen::VectorXd diffusion_apply(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& z) const;  // G(x) z
  Eigen::MatrixXd diffusion_matrix(const Eigen::VectorXd& x) const;

  // Transpose actions used by discrete adjoints: J_F(x)^T y, G(x)^T y, and
  // (d/dx [G(x) c])^T y (zero unless the diffusion actually depends on x).
  Eigen::VectorXd drift_jacobian_t(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& y) const;
  Eigen::VectorXd diffusion_t(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) const;
  Eigen::VectorXd diffusion_dx_t(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& y) const;
};

// |B^{1/2} x|; for wave systems equals (|A^{1/4}u|^2 + |A^{-1/4}v|^2)^{1/2}.
double minus_one_norm(const GalerkinSystem& sys, const Eigen::VectorXd& x);

// (lambda I + A)^{-1}; operator norm <= 1/lambda for monotone A.
Eigen::MatrixXd resolvent(const GalerkinSystem& sys, double lambda);

// A_lambda = lambda A (lambda I + A)^{-1}.
Eigen::MatrixXd yosida(const GalerkinSystem& sys, double lambda);

// Copy of sys with A replaced by its Yosida approximation. Keeps F, G, B;
// drops the rotation closed form (A_lambda is no longer skew).
GalerkinSystem yosida_system(const GalerkinSystem& sys, double lambda);

// e^{-tA} x. Wave systems use exact per-mode rotations (energy-preserving to
// rounding); diagonal A uses componentwise exp; everything else Pade
// scaling-and-squaring.
Eigen::VectorXd semigroup_apply(const GalerkinSystem& sys, double t,
                                const Eigen::VectorXd& x);
Eigen::MatrixXd semigroup_matrix(const GalerkinSystem& sys, double t);

// S(t)^T x, the adjoint action used by backward (adjoint) sweeps. Rotations
// transpose to rotations by -t; diagonal A is self-adjoint.
Eigen::VectorXd semigroup_apply_adjoint(const GalerkinSystem& sys, double t,
                                        const Eigen::VectorXd& x);

struct GenericOptions {
  Eigen::MatrixXd B;      // empty: use ((A+I)(A^T+I))^{-1/2}
  double c0 = -1.0;       // negative: smallest c0 making (bcond) hold
  DriftKind f_kind = DriftKind::Zero;
  Eigen::MatrixXd K_lin;
  DiffusionKind g_kind = DiffusionKind::Identity;
  Eigen::MatrixXd G0;
  std::function<double(double)> g_diag;
  std::function<double(double)> g_diag_deriv;
  double M = -1.0;        // negative: derived from the pieces above
};

// General builder; A must be monotone (sym part >= -1e-10), else throws.
GalerkinSystem make_generic(Eigen::MatrixXd A, GenericOptions opts = {});

// Convenience: diagonal A = diag(a), identity G, zero F.
GalerkinSystem make_diagonal_system(const Eigen::VectorXd& a_diag);

// Wave system with K modes; f is the scalar Nemytskii nonlinearity applied to
// the displacement component (pass nullptr f for the free wave equation).
GalerkinSystem build_wave_system(int modes);
GalerkinSystem build_wave_system(int modes, std::function<double(double)> f,
                                 std::function<double(double)> f_deriv,
                                 double f_lip);

struct StructuralReport {
  double min_eig_sym_a = 0.0;   // monotonicity margin
  bool monotone_pass = false;
  double min_eig_bcond = 0.0;   // min eig of sym(A^T B + c0 B)
  bool bcond_pass = false;
  double diffusion_bound = 0.0;  // max sampled |G(x)| (spectral norm)
  bool as3_pass = false;
  double drift_ratio = 0.0;  // max sampled |F(x)-F(y)| / |x-y|_{-1}
  bool as1_pass = false;
  double strong_margin = 0.0;     // min eig of sym(A^T B + c0 B) in B-metric
  double skew_defect = 0.0;       // max sampled |<Ax,x>| / |x|^2 (wave: ~0)
  bool all_pass = false;
};

// Certificate report; failures are reported, never thrown.
StructuralReport check_structural(const GalerkinSystem& sys, int samples = 10000,
                                  std::uint64_t seed = 0);

}  // namespace ldlab::galerkin
