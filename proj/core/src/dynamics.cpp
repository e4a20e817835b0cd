#include "tada/dynamics.hpp"

#include <atomic>
#include <cmath>

namespace tada {

namespace {

constexpr double kFactorial[] = {1.0,   1.0,   2.0,    6.0,    24.0,
                                 120.0, 720.0, 5040.0, 40320.0};

std::atomic<double> g_transition_fault{0.0};

void check_n_vars(int n_vars) {
  if (n_vars < 1 || n_vars > kMaxVars) {
    throw ConfigError("n_vars must be in [1, " + std::to_string(kMaxVars) +
                      "], got " + std::to_string(n_vars));
  }
}

}  // namespace

AugmentedConfig AugmentedConfig::make(int n_vars, double k_scale, double delta) {
  AugmentedConfig cfg;
  cfg.n_vars = n_vars;
  cfg.k_scale = k_scale;
  cfg.t_clamp_delta = delta;
  cfg.sigma0 = Matrix::Identity(n_vars, n_vars);
  if (n_vars >= 1) cfg.sigma0(n_vars - 1, n_vars - 1) = k_scale;
  cfg.validate();
  return cfg;
}

void AugmentedConfig::validate() const {
  check_n_vars(n_vars);
  if (!(t_clamp_delta > 0.0 && t_clamp_delta < 0.5)) {
    throw ConfigError("t_clamp_delta must lie in (0, 0.5)");
  }
  if (!(k_scale > 0.0)) {
    throw ConfigError("k_scale must be positive");
  }
  if (sigma0.rows() != n_vars || sigma0.cols() != n_vars) {
    throw ConfigError("sigma0 must be n_vars x n_vars");
  }
  if (!sigma0.isApprox(sigma0.transpose(), 1e-12)) {
    throw ConfigError("sigma0 must be symmetric");
  }
  try {
    dynamics::cholesky_factor(sigma0);
  } catch (const NumericError&) {
    throw ConfigError("sigma0 must be positive definite");
  }
}

namespace dynamics {

void set_transition_fault_for_testing(double eps) { g_transition_fault = eps; }

Matrix shift_transition(int n_vars, double dt) {
  check_n_vars(n_vars);
  Matrix phi = Matrix::Zero(n_vars, n_vars);
  for (int k = 0; k < n_vars; ++k) {
    for (int m = k; m < n_vars; ++m) {
      phi(k, m) = std::pow(dt, m - k) / kFactorial[m - k];
    }
  }
  return phi;
}

std::pair<Matrix, Vector> hat_matrices(int n_vars, double t) {
  check_n_vars(n_vars);
  if (t >= 1.0) {
    throw NumericError("hat_matrices: control is singular at t >= 1");
  }
  const int n = n_vars;
  const double omt = 1.0 - t;
  const double scale = kFactorial[n] / std::pow(omt, n);
  Matrix a_hat = Matrix::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) a_hat(k, k + 1) = 1.0;
  for (int m = 0; m < n; ++m) {
    a_hat(n - 1, m) -= scale * std::pow(omt, m) / kFactorial[m];
  }
  Vector b_hat = Vector::Zero(n);
  b_hat(n - 1) = scale;
  return {a_hat, b_hat};
}

Matrix controlled_transition(int n_vars, double t) {
  check_n_vars(n_vars);
  const int n = n_vars;
  Matrix phi(n, n);
  for (int k = 0; k < n; ++k) {
    const double tail = kFactorial[n] * std::pow(t, n - k) / kFactorial[n - k];
    for (int m = 0; m < n; ++m) {
      double v = -tail / kFactorial[m];
      if (m >= k) v += std::pow(t, m - k) / kFactorial[m - k];
      phi(k, m) = v;
    }
  }
  const double fault = g_transition_fault.load(std::memory_order_relaxed);
  if (fault != 0.0) phi.array() += fault;
  return phi;
}

Vector mean_vector(int n_vars, double t) {
  check_n_vars(n_vars);
  Vector mu(n_vars);
  for (int k = 0; k < n_vars; ++k) {
    mu(k) = kFactorial[n_vars] * std::pow(t, n_vars - k) / kFactorial[n_vars - k];
  }
  return mu;
}

Matrix cholesky_factor(const Matrix& sym) {
  const int n = static_cast<int>(sym.rows());
  const double pivot_floor = 1e-12 * sym.trace() / n;
  Matrix chol = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = sym(j, j);
    for (int k = 0; k < j; ++k) d -= chol(j, k) * chol(j, k);
    if (!(d > pivot_floor)) {
      throw NumericError("cholesky_factor: pivot " + std::to_string(d) +
                         " below guard at column " + std::to_string(j));
    }
    chol(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = sym(i, j);
      for (int k = 0; k < j; ++k) s -= chol(i, k) * chol(j, k);
      chol(i, j) = s / chol(j, j);
    }
  }
  return chol;
}

Matrix covariance(const AugmentedConfig& config, double t) {
  if (t >= 1.0) {
    throw NumericError("covariance: Sigma_t is singular at t = 1");
  }
  const Matrix phi = controlled_transition(config.n_vars, t);
  Matrix sigma = phi * config.sigma0 * phi.transpose();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  cholesky_factor(sigma);  // near-singularity guard
  return sigma;
}

std::pair<Vector, double> reweight(const Vector& mu, const Matrix& sigma) {
  const int n = static_cast<int>(mu.size());
  const Matrix chol = cholesky_factor(sigma);
  if (mu.isZero(0.0)) {
    // t -> 0 limit: leading order of mu_t is t N! e_{N-1}, so Sigma^{-1} mu
    // aligns with Sigma0^{-1} e_{N-1}; normalized so r0' e_{N-1}-projection
    // matches the documented limit.
    Vector e = Vector::Zero(n);
    e(n - 1) = 1.0;
    Vector w = chol.triangularView<Eigen::Lower>().solve(e);
    chol.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
    return {w / w(n - 1), 0.0};
  }
  Vector v = chol.triangularView<Eigen::Lower>().solve(mu);
  const double gamma = v.squaredNorm();
  Vector r = chol.transpose().triangularView<Eigen::Upper>().solve(v) / gamma;
  return {r, gamma};
}

CoefficientBundle coefficients_at(const AugmentedConfig& config, double t) {
  CoefficientBundle b;
  b.mu = mean_vector(config.n_vars, t);
  b.sigma = covariance(config, t);
  b.chol = cholesky_factor(b.sigma);
  if (t == 0.0) {
    auto [r, gamma] = reweight(Vector::Zero(config.n_vars), b.sigma);
    b.r = std::move(r);
    b.gamma = gamma;
  } else {
    Vector v = b.chol.triangularView<Eigen::Lower>().solve(b.mu);
    b.gamma = v.squaredNorm();
    b.r = b.chol.transpose().triangularView<Eigen::Upper>().solve(v) / b.gamma;
  }
  return b;
}

Vector project_y(const AugmentedState& state, const Vector& r) {
  if (state.vars.rows() != r.size()) {
    throw ConfigError("project_y: state/reweighting dimension mismatch");
  }
  return state.vars.transpose() * r;
}

Vector force_term(const AugmentedState& state, const Vector& x_hat, double t,
                  double delta_force) {
  const int n = state.n_vars();
  check_n_vars(n);
  if (t >= 1.0 - delta_force) {
    throw NumericError("force_term: t too close to the terminal singularity");
  }
  const double omt = 1.0 - t;
  Vector taylor = Vector::Zero(state.dim());
  for (int k = 0; k < n; ++k) {
    taylor += state.vars.row(k).transpose() * (std::pow(omt, k) / kFactorial[k]);
  }
  return kFactorial[n] * (x_hat - taylor) / std::pow(omt, n);
}

}  // namespace dynamics
}  // namespace tada
