#ifndef TADA_ANALYSIS_HPP
#define TADA_ANALYSIS_HPP

#include "tada/denoiser.hpp"
#include "tada/rng.hpp"
#include "tada/types.hpp"

// Executable verification of the augmented-system identities: the scalar
// y-dynamics decomposition, the whitened affine-noise lemma, and the
// loss reparameterization that makes the N-variable objective equivalent to
// plain data prediction.
//
// Absolute accuracy matters here (the checks compare against independent
// oracles at 1e-6), so solves with Sigma_t go through the structured
// factorization Sigma_t = (Q L0)(Q L0)^T with Q the controlled transition:
// the dense Cholesky route loses ~6 digits near t = 0.9, N = 4.

namespace tada::analysis {

/// Coefficients of dy/dt = alpha y + beta x1 + w' eps_perp.
struct YDynCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  Vector w;         // N, = L^T e
  Vector e;         // N, = Sigma^{-1} b_hat / gamma
  Matrix perp_cov;  // N x N, = I - L^T r r^T L / (r' Sigma r)
};

/// d(gamma)/dt = 2 b_hat' Sigma^{-1} mu. Requires 0 < t < 1.
double gamma_dot(const AugmentedConfig& config, double t);

/// The deterministic y-derivative identity evaluated at a state:
/// dy/dt = (b_hat' Sigma^{-1} x) / gamma + x1 (r' b_hat) - y gamma_dot / gamma.
Vector y_dot_exact(const AugmentedState& state, const Vector& x1,
                   const AugmentedConfig& config);

YDynCoefficients y_dyn_coefficients(const AugmentedConfig& config, double t);

/// One draw of the whitened affine-noise decomposition z = e'x:
/// deterministic part in (y, x1) plus the eps_perp residual channel.
struct WhitenedParts {
  double z_actual = 0.0;
  double z_pred = 0.0;  // deterministic + residual
  double deterministic = 0.0;
  double residual = 0.0;
};

WhitenedParts whitened_decomposition(const Vector& mu, const Matrix& sigma,
                                     const Vector& r, const Vector& e,
                                     double x1, const Vector& x);

/// a = L^{-T} e_{N-1}, b = a' mu; the identity eps^(N-1) = a' x - b x1 holds
/// for x = mu x1 + L eps. Throws NumericError on singular L.
struct MdmReparam {
  Vector a;
  double b = 0.0;
};

MdmReparam mdm_loss_reparam(const Matrix& chol_lower, const Vector& mu);

/// The N = 2 coefficients derived by direct elimination (independent of the
/// triangular solve in mdm_loss_reparam): eps^(1) in terms of x^(0), x^(1),
/// x1 for L = [[Lxx, 0], [Lxv, Lvv]].
struct N2LossCoeffs {
  Vector a;  // size 2: coefficients on (x^(0), x^(1))
  double b = 0.0;
  double regression_denominator = 0.0;  // -Lvv * b; the x1-regression scale
};

N2LossCoeffs n2_loss_coeffs(double lxx, double lxv, double lvv, double mu0,
                            double mu1);

/// Max |E[x1 | full N-vector] - E[x1 | y, sigma_bar = 1/sqrt(gamma)]| over
/// random draws of x_t under a 1-D mixture prior. Both posteriors are
/// analytic per component. Requires d = 1, N <= 3, 0 < t < 1.
double posterior_equivalence_check(const denoise::GaussianMixture& gmm,
                                   const AugmentedConfig& config, double t,
                                   int trials, rng::Stream& stream);

}  // namespace tada::analysis

#endif  // TADA_ANALYSIS_HPP
