#include "tada/analysis.hpp"

#include <Eigen/LU>
#include <cmath>

#include "tada/dynamics.hpp"

namespace tada::analysis {

namespace {

// Solves with Sigma_t through Sigma_t = (Q L0)(Q L0)^T, Q = Phi_hat(t, 0).
// Q is solved by partial-pivot LU; L0 is the (well-conditioned) prior factor.
struct StructuredSolver {
  StructuredSolver(const AugmentedConfig& config, double t)
      : lu(dynamics::controlled_transition(config.n_vars, t)),
        chol0(dynamics::cholesky_factor(config.sigma0)) {}

  // L0^{-1} Q^{-1} x: gamma-type quadratic forms are plain squared norms
  // of these half-solves, which avoids the cancellation of the dense route.
  Vector half_solve(const Vector& x) const {
    Vector u = lu.solve(x);
    chol0.triangularView<Eigen::Lower>().solveInPlace(u);
    return u;
  }

  // Sigma^{-1} x = Q^{-T} L0^{-T} (L0^{-1} Q^{-1} x)
  Vector solve(const Vector& x) const {
    Vector u = half_solve(x);
    chol0.transpose().triangularView<Eigen::Upper>().solveInPlace(u);
    return lu.adjoint().solve(u);
  }

  Eigen::PartialPivLU<Matrix> lu;
  Matrix chol0;
};

void check_open_interval(double t) {
  if (!(t > 0.0 && t < 1.0)) {
    throw ConfigError("analysis: t must lie in the open interval (0, 1)");
  }
}

}  // namespace

double gamma_dot(const AugmentedConfig& config, double t) {
  check_open_interval(t);
  const StructuredSolver solver(config, t);
  const auto [a_hat, b_hat] = dynamics::hat_matrices(config.n_vars, t);
  const Vector hm = solver.half_solve(dynamics::mean_vector(config.n_vars, t));
  const Vector hb = solver.half_solve(b_hat);
  return 2.0 * hb.dot(hm);
}

Vector y_dot_exact(const AugmentedState& state, const Vector& x1,
                   const AugmentedConfig& config) {
  check_open_interval(state.t);
  if (x1.size() != state.dim()) {
    throw ConfigError("y_dot_exact: x1 dimension mismatch");
  }
  const int n = config.n_vars;
  const StructuredSolver solver(config, state.t);
  const auto [a_hat, b_hat] = dynamics::hat_matrices(n, state.t);
  const Vector mu = dynamics::mean_vector(n, state.t);

  const Vector hm = solver.half_solve(mu);
  const Vector hb = solver.half_solve(b_hat);
  const double gamma = hm.squaredNorm();
  const double gdot = 2.0 * hb.dot(hm);
  const Vector w_b = solver.solve(b_hat);     // Sigma^{-1} b_hat
  const Vector r = solver.solve(mu) / gamma;  // reweighting

  const Vector y = state.vars.transpose() * r;
  return (state.vars.transpose() * w_b) / gamma + x1 * hb.dot(hm) / gamma -
         y * (gdot / gamma);
}

YDynCoefficients y_dyn_coefficients(const AugmentedConfig& config, double t) {
  check_open_interval(t);
  const int n = config.n_vars;
  const StructuredSolver solver(config, t);
  const auto [a_hat, b_hat] = dynamics::hat_matrices(n, t);
  const Vector mu = dynamics::mean_vector(n, t);
  const Matrix sigma = dynamics::covariance(config, t);
  const Matrix chol = dynamics::cholesky_factor(sigma);

  const Vector hm = solver.half_solve(mu);
  const Vector hb = solver.half_solve(b_hat);
  const double gamma = hm.squaredNorm();
  const double gdot = 2.0 * hb.dot(hm);
  const Vector r = solver.solve(mu) / gamma;

  YDynCoefficients out;
  out.e = solver.solve(b_hat) / gamma;
  const Vector ltr = chol.transpose() * r;  // L^T r
  const double r_sigma_r = ltr.squaredNorm();
  const Vector sigma_r = sigma * r;
  out.alpha = out.e.dot(sigma_r) / r_sigma_r - gdot / gamma;
  out.beta = hb.dot(hm) / gamma +
             out.e.dot(mu - sigma_r * (r.dot(mu) / r_sigma_r));
  out.w = chol.transpose() * out.e;
  out.perp_cov = Matrix::Identity(n, n) - ltr * ltr.transpose() / r_sigma_r;
  return out;
}

WhitenedParts whitened_decomposition(const Vector& mu, const Matrix& sigma,
                                     const Vector& r, const Vector& e,
                                     double x1, const Vector& x) {
  const Matrix chol = dynamics::cholesky_factor(sigma);
  const Vector g = chol.transpose() * r;
  const double g2 = g.squaredNorm();  // r' Sigma r
  const Vector sigma_r = sigma * r;

  const double y = r.dot(x);
  WhitenedParts parts;
  parts.z_actual = e.dot(x);
  parts.deterministic =
      e.dot(mu - sigma_r * (r.dot(mu) / g2)) * x1 + (e.dot(sigma_r) / g2) * y;

  // eps_perp: whiten the draw, remove the component along g = L^T r.
  Vector eps = chol.triangularView<Eigen::Lower>().solve(x - mu * x1);
  eps -= g * (g.dot(eps) / g2);
  parts.residual = (chol.transpose() * e).dot(eps);
  parts.z_pred = parts.deterministic + parts.residual;
  return parts;
}

MdmReparam mdm_loss_reparam(const Matrix& chol_lower, const Vector& mu) {
  const int n = static_cast<int>(chol_lower.rows());
  if (chol_lower.cols() != n || mu.size() != n) {
    throw ConfigError("mdm_loss_reparam: shape mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (std::abs(chol_lower(i, i)) < 1e-300) {
      throw NumericError("mdm_loss_reparam: singular factor");
    }
  }
  Vector e_last = Vector::Zero(n);
  e_last(n - 1) = 1.0;
  MdmReparam out;
  out.a = chol_lower.transpose().triangularView<Eigen::Upper>().solve(e_last);
  out.b = out.a.dot(mu);
  return out;
}

N2LossCoeffs n2_loss_coeffs(double lxx, double lxv, double lvv, double mu0,
                            double mu1) {
  if (lxx == 0.0 || lvv == 0.0) {
    throw NumericError("n2_loss_coeffs: diagonal factor entries must be nonzero");
  }
  // Eliminate eps^(0): x^(1) - (Lxv/Lxx) x^(0) leaves Lvv eps^(1) plus the
  // x1 term with coefficient mu1 - (Lxv/Lxx) mu0.
  const double ratio = lxv / lxx;
  N2LossCoeffs out;
  out.a.resize(2);
  out.a(0) = -ratio / lvv;
  out.a(1) = 1.0 / lvv;
  out.b = (mu1 - ratio * mu0) / lvv;
  out.regression_denominator = ratio * mu0 - mu1;
  const double scale = std::abs(mu1) + std::abs(ratio * mu0);
  if (std::abs(out.regression_denominator) <= 1e-14 * std::max(scale, 1e-300)) {
    throw NumericError("n2_loss_coeffs: vanishing x1-regression denominator");
  }
  return out;
}

double posterior_equivalence_check(const denoise::GaussianMixture& gmm,
                                   const AugmentedConfig& config, double t,
                                   int trials, rng::Stream& stream) {
  gmm.validate();
  if (gmm.dim() != 1) throw ConfigError("posterior_equivalence_check: 1-D data only");
  if (config.n_vars > 3) throw ConfigError("posterior_equivalence_check: N <= 3");
  check_open_interval(t);
  if (trials < 1) throw ConfigError("posterior_equivalence_check: trials >= 1");

  const int n = config.n_vars;
  const int k = gmm.components();
  const CoefficientBundle bundle = dynamics::coefficients_at(config, t);
  const double sigma_bar = denoise::snr_to_sigma(bundle.gamma);

  // Per component j: x_t | comp ~ N(mu * m_j, Sigma + s_j^2 mu mu').
  std::vector<Eigen::LLT<Matrix>> llts;
  std::vector<double> logdets;
  llts.reserve(k);
  for (int j = 0; j < k; ++j) {
    const Matrix cov =
        bundle.sigma + gmm.variances(j, 0) * bundle.mu * bundle.mu.transpose();
    llts.emplace_back(cov);
    if (llts.back().info() != Eigen::Success) {
      throw NumericError("posterior_equivalence_check: conditioning failed");
    }
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llts.back().matrixL()(i, i));
    logdets.push_back(logdet);
  }

  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const double x1 = gmm.sample(stream)(0);
    const Vector x = bundle.mu * x1 + bundle.chol * stream.normal_vector(n);

    // (a) condition on the full N-vector, component by component
    Vector logp(k), cond_mean(k);
    for (int j = 0; j < k; ++j) {
      const double s2 = gmm.variances(j, 0);
      const Vector delta = x - bundle.mu * gmm.means(j, 0);
      const Vector solved = llts[j].solve(delta);
      logp(j) = std::log(gmm.weights[j]) - 0.5 * delta.dot(solved) - 0.5 * logdets[j];
      cond_mean(j) = gmm.means(j, 0) + s2 * bundle.mu.dot(solved);
    }
    const double lmax = logp.maxCoeff();
    Vector resp = (logp.array() - lmax).exp();
    resp /= resp.sum();
    const double joint_mean = resp.dot(cond_mean);

    // (b) condition on the scalar projection only
    Vector y(1);
    y(0) = bundle.r.dot(x);
    const double scalar_mean =
        denoise::gmm_posterior_mean(gmm, {y, sigma_bar, t})(0);

    worst = std::max(worst, std::abs(joint_mean - scalar_mean));
  }
  return worst;
}

}  // namespace tada::analysis
