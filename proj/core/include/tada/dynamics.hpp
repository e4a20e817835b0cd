#ifndef TADA_DYNAMICS_HPP
#define TADA_DYNAMICS_HPP

#include <utility>

#include "tada/types.hpp"

// Closed-form coefficients of the N-variable augmented system.
//
// The state couples N variables through the nilpotent upper-shift matrix A
// (x^(0) integrates x^(1), which integrates x^(2), ...), and the force term
// drives the last variable so that x^(0) hits the data point at t = 1.
// Conditioning the dynamics on the data point turns the flow into a linear
// time-varying system x' = A_hat(t) x + b_hat(t) x1 whose transition matrix,
// mean and covariance all have polynomial closed forms.

namespace tada::dynamics {

/// exp(dt * A) for the nilpotent upper shift A. Entry (k, m) is
/// dt^(m-k) / (m-k)! for m >= k; the series terminates at order N-1.
Matrix shift_transition(int n_vars, double dt);

/// (A_hat_t, b_hat_t) of the data-conditioned system. Requires t < 1.
std::pair<Matrix, Vector> hat_matrices(int n_vars, double t);

/// Transition matrix Phi_hat(t, 0) of A_hat, valid on [0, 1]:
///   T[k][m] = t^(m-k)/(m-k)! - N! t^(N-k) / ((N-k)! m!)   (m >= k)
///   T[k][m] =                - N! t^(N-k) / ((N-k)! m!)   (m <  k)
Matrix controlled_transition(int n_vars, double t);

/// mu_t with mu^(k) = N! t^(N-k) / (N-k)!  (zero initial mean).
Vector mean_vector(int n_vars, double t);

/// Sigma_t = Phi_hat(t,0) Sigma_0 Phi_hat(t,0)^T, symmetrized.
/// Throws NumericError when the Cholesky pivot guard trips (near-singular).
Matrix covariance(const AugmentedConfig& config, double t);

/// Lower-triangular Cholesky factor with a relative pivot guard:
/// rejects pivots below 1e-12 * trace / N. Throws NumericError.
Matrix cholesky_factor(const Matrix& sym);

/// gamma = mu' Sigma^{-1} mu and r = Sigma^{-1} mu / gamma.
/// For mu = 0 (t = 0) returns the analytic limit
/// r0 = Sigma^{-1} e_{N-1} / (e_{N-1}' Sigma^{-1} e_{N-1}) with gamma = 0.
///
/// Computed through the Cholesky factor so that r.mu = 1 and
/// gamma * |L' r|^2 = 1 hold to machine precision even when Sigma is
/// ill-conditioned (cond(Sigma) reaches ~1e15 at N = 4, t = 0.9).
std::pair<Vector, double> reweight(const Vector& mu, const Matrix& sigma);

/// Everything the sampler needs at one time point.
CoefficientBundle coefficients_at(const AugmentedConfig& config, double t);

/// y = sum_n r^(n) x^(n), the single d-dimensional network input.
Vector project_y(const AugmentedState& state, const Vector& r);

/// F = N! (x_hat - sum_n x^(n) (1-t)^n / n!) / (1-t)^N.
/// Throws NumericError for t >= 1 - delta_force.
Vector force_term(const AugmentedState& state, const Vector& x_hat, double t,
                  double delta_force = 1e-3);

/// Test hook: adds `eps` to every entry of controlled_transition's output.
/// Used by the verify command's fault-injection canary; keep at 0 otherwise.
void set_transition_fault_for_testing(double eps);

}  // namespace tada::dynamics

#endif  // TADA_DYNAMICS_HPP
