#ifndef TADA_TYPES_HPP
#define TADA_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace tada {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid user-facing configuration (bad keys, out-of-range values).
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure at run time (non-finite state, singular factorization).
/// The CLI maps this to exit code 1.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Upper limit on augmented variables. The closed forms involve N! and
// (1-t)^N; beyond N ~ 8 double-precision conditioning degrades.
inline constexpr int kMaxVars = 8;

/// Static description of the augmented system: how many stacked variables,
/// their prior covariance, and where the schedule clamps the final time.
struct AugmentedConfig {
  int n_vars = 2;
  Matrix sigma0;               // N x N symmetric positive definite prior
  double k_scale = 1.0;        // multiplier on the (N-1,N-1) entry of the base identity prior
  double t_clamp_delta = 1e-3; // final time is 1 - delta

  // Canonical family: sigma0 = diag(1, ..., 1, k).
  static AugmentedConfig make(int n_vars, double k_scale = 1.0, double delta = 1e-3);

  double t_final() const { return 1.0 - t_clamp_delta; }

  // Throws ConfigError on violated invariants (N range, delta range, SPD prior).
  void validate() const;
};

/// N stacked d-dimensional variables at a point in time.
/// Row n of `vars` is x^(n).
struct AugmentedState {
  Matrix vars;  // N x d
  double t = 0.0;

  int n_vars() const { return static_cast<int>(vars.rows()); }
  int dim() const { return static_cast<int>(vars.cols()); }
};

/// Per-time coefficient cache: mean/covariance of the conditional law,
/// the reweighting vector, the effective SNR, and the Cholesky factor.
///
/// Identities (gamma > 0): r.mu = 1, r.Sigma.r = 1/gamma. These hold to
/// machine precision when evaluated through `chol` (see reweight()).
struct CoefficientBundle {
  Vector mu;     // N
  Matrix sigma;  // N x N, symmetric positive definite for t < 1
  Vector r;      // N, reweighting (t = 0 uses the analytic limit)
  double gamma = 0.0;
  Matrix chol;   // lower-triangular L with L L^T = sigma
};

}  // namespace tada

#endif  // TADA_TYPES_HPP
