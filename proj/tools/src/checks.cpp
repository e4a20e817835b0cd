#include "tada_app/checks.hpp"

#include <cmath>
#include <optional>
#include <functional>

#include "tada/analysis.hpp"
#include "tada/denoiser.hpp"
#include "tada/dynamics.hpp"
#include "tada/rng.hpp"
#include "tada/sampler.hpp"

namespace tada::app {

namespace {

const std::vector<int> kGridN = {1, 2, 3, 4};
const std::vector<double> kGridK = {0.1, 1.0, 10.0};
const std::vector<double> kGridT = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double rel(const Matrix& got, const Matrix& want) {
  return (got - want).cwiseAbs().maxCoeff() /
         std::max(want.cwiseAbs().maxCoeff(), 1.0);
}

// ---- RK4 of the defining ODEs (phi, mu, sigma jointly; 10^4 total steps) ----

struct Joint {
  Matrix phi, sigma;
  Vector mu;
};

Joint rk4_advance(int n, Joint s, double t0, double t1, int steps) {
  auto f = [n](const Joint& st, double tau) {
    const auto [a, b] = dynamics::hat_matrices(n, tau);
    Joint d;
    d.phi = a * st.phi;
    d.mu = a * st.mu + b;
    d.sigma = a * st.sigma + st.sigma * a.transpose();
    return d;
  };
  const double h = (t1 - t0) / steps;
  double t = t0;
  for (int i = 0; i < steps; ++i) {
    const Joint k1 = f(s, t);
    const Joint k2 = f({s.phi + 0.5 * h * k1.phi, s.sigma + 0.5 * h * k1.sigma,
                        s.mu + 0.5 * h * k1.mu}, t + 0.5 * h);
    const Joint k3 = f({s.phi + 0.5 * h * k2.phi, s.sigma + 0.5 * h * k2.sigma,
                        s.mu + 0.5 * h * k2.mu}, t + 0.5 * h);
    const Joint k4 = f({s.phi + h * k3.phi, s.sigma + h * k3.sigma,
                        s.mu + h * k3.mu}, t + h);
    s.phi += h / 6.0 * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi);
    s.mu += h / 6.0 * (k1.mu + 2 * k2.mu + 2 * k3.mu + k4.mu);
    s.sigma += h / 6.0 * (k1.sigma + 2 * k2.sigma + 2 * k3.sigma + k4.sigma);
    t += h;
  }
  return s;
}

struct RkErrors {
  double phi = 0.0, mu = 0.0, sigma = 0.0;
};

RkErrors rk4_errors() {
  RkErrors worst;
  for (int n : kGridN) {
    for (double k : kGridK) {
      const auto config = AugmentedConfig::make(n, k);
      Joint s{Matrix::Identity(n, n), config.sigma0, Vector::Zero(n)};
      double t = 0.0;
      for (double target : kGridT) {
        s = rk4_advance(n, s, t, target, 1112);  // ~10^4 steps over the grid
        t = target;
        worst.phi = std::max(worst.phi,
                             rel(dynamics::controlled_transition(n, t), s.phi));
        worst.mu = std::max(worst.mu,
                            rel(dynamics::mean_vector(n, t), s.mu));
        worst.sigma = std::max(worst.sigma,
                               rel(dynamics::covariance(config, t), s.sigma));
      }
    }
  }
  return worst;
}

// ---- finite differences of the closed forms (h = 1e-6, relative 1e-6) ----

RkErrors fd_errors() {
  const double h = 1e-6;
  RkErrors worst;
  for (int n : kGridN) {
    const auto config = AugmentedConfig::make(n, 1.0);
    for (double t : kGridT) {
      const auto [a, b] = dynamics::hat_matrices(n, t);
      const Matrix dphi = (dynamics::controlled_transition(n, t + h) -
                           dynamics::controlled_transition(n, t - h)) /
                          (2 * h);
      worst.phi = std::max(
          worst.phi, rel(dphi, a * dynamics::controlled_transition(n, t)));
      const Vector dmu =
          (dynamics::mean_vector(n, t + h) - dynamics::mean_vector(n, t - h)) /
          (2 * h);
      worst.mu = std::max(worst.mu,
                          rel(dmu, a * dynamics::mean_vector(n, t) + b));
      const Matrix sig = dynamics::covariance(config, t);
      const Matrix dsig =
          (dynamics::covariance(config, t + h) - dynamics::covariance(config, t - h)) /
          (2 * h);
      worst.sigma = std::max(worst.sigma, rel(dsig, a * sig + sig * a.transpose()));
    }
  }
  return worst;
}

// ---- reweighting identities through the bundle factor ----

std::pair<double, double> reweight_identity_errors() {
  double worst_mu = 0.0, worst_snr = 0.0;
  for (int n : kGridN) {
    for (double k : kGridK) {
      const auto config = AugmentedConfig::make(n, k);
      for (double t : kGridT) {
        const auto b = dynamics::coefficients_at(config, t);
        worst_mu = std::max(worst_mu, std::abs(b.r.dot(b.mu) - 1.0));
        const double rsr = (b.chol.transpose() * b.r).squaredNorm();
        worst_snr = std::max(worst_snr, std::abs(b.gamma * rsr - 1.0));
      }
    }
  }
  return {worst_mu, worst_snr};
}

double gamma_monotone_violations() {
  double violations = 0.0;
  for (int n : kGridN) {
    for (double k : kGridK) {
      const auto config = AugmentedConfig::make(n, k);
      const double t_max = (n >= 4) ? 0.98 : 1.0 - 1e-3;
      double prev = 0.0;
      for (int i = 1; i <= 100; ++i) {
        const double g = dynamics::coefficients_at(config, i * t_max / 100).gamma;
        if (!(g > prev)) violations += 1.0;
        prev = g;
      }
    }
  }
  return violations;
}

// ---- psi vs dense trapezoid (relative to the vector magnitude) ----

double psi_quadrature_error() {
  double worst = 0.0;
  for (int n : kGridN) {
    for (int order : {1, 2, 3}) {
      sampler::HistoryCache cache(order);
      std::vector<double> ts, fs;
      for (int j = 0; j < order; ++j) {
        ts.push_back(0.05 * j);
        fs.push_back(0.4 + 0.7 * j - 0.3 * j * j);
        cache.push(ts.back(), Vector::Constant(1, fs.back()));
      }
      const double t_from = ts.back();
      const double t_to = t_from + 0.02;
      const Matrix psi = sampler::psi_integral(cache, t_from, t_to, n);

      Vector quad(n);
      for (int k = 0; k < n; ++k) {
        const int p = n - 1 - k;
        const int points = 10000;
        double acc = 0.0;
        for (int g = 0; g < points; ++g) {
          const double tau = t_from + (t_to - t_from) * g / (points - 1.0);
          double lagr = 0.0;
          for (int j = 0; j < order; ++j) {
            double lj = fs[j];
            for (int i = 0; i < order; ++i) {
              if (i != j) lj *= (tau - ts[i]) / (ts[j] - ts[i]);
            }
            lagr += lj;
          }
          const double v = std::pow(t_to - tau, p) / factorial(p) * lagr;
          acc += (g == 0 || g == points - 1) ? 0.5 * v : v;
        }
        quad(k) = acc * (t_to - t_from) / (points - 1);
      }
      const double scale = std::max(quad.cwiseAbs().maxCoeff(), 1e-12);
      worst = std::max(worst, (psi - quad).cwiseAbs().maxCoeff() / scale);
    }
  }
  return worst;
}

double n1_equivalence_error() {
  denoise::GaussianMixture g;
  g.weights = {0.5, 0.5};
  g.means.resize(2, 1);
  g.means << -1.0, 1.5;
  g.variances.resize(2, 1);
  g.variances << 0.3, 0.2;
  const denoise::GmmDenoiser den(g);
  const auto schedule = sampler::make_polynomial_schedule(50, 2.0, 1e-3);
  double worst = 0.0;
  for (int order : {1, 2, 3}) {
    sampler::SamplerRun run;
    run.config = AugmentedConfig::make(1, 1.0);
    run.schedule = schedule;
    run.order = order;
    run.seed = 424242;
    run.batch = 1000;
    const auto a = sampler::tada_sample(den, run, 1);
    const auto b = sampler::fm_baseline_sample(den, schedule, order, 1, 424242, 1000);
    worst = std::max(worst, (a.samples - b.samples).cwiseAbs().maxCoeff());
  }
  return worst;
}

// structured gamma used by the finite-difference oracle
double gamma_ref(int n, const Matrix& sigma0, double t) {
  Matrix q(n, n);
  for (int k = 0; k < n; ++k) {
    for (int m = 0; m < n; ++m) {
      double v = -factorial(n) * std::pow(t, n - k) /
                 (factorial(n - k) * factorial(m));
      if (m >= k) v += std::pow(t, m - k) / factorial(m - k);
      q(k, m) = v;
    }
  }
  Vector mu(n);
  for (int k = 0; k < n; ++k) {
    mu(k) = factorial(n) * std::pow(t, n - k) / factorial(n - k);
  }
  const Vector u = q.partialPivLu().solve(mu);
  const Matrix l0 = Eigen::LLT<Matrix>(sigma0).matrixL();
  return l0.triangularView<Eigen::Lower>().solve(u).squaredNorm();
}

double gamma_dot_fd_error() {
  const double h = 1e-5;
  double worst = 0.0;
  for (int n : kGridN) {
    for (double k : kGridK) {
      const auto config = AugmentedConfig::make(n, k);
      for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double fd = (gamma_ref(n, config.sigma0, t + h) -
                           gamma_ref(n, config.sigma0, t - h)) /
                          (2 * h);
        worst = std::max(worst,
                         std::abs(analysis::gamma_dot(config, t) - fd) / std::abs(fd));
      }
    }
  }
  return worst;
}

// r_t via the same structured route as gamma_ref
Vector r_ref(int n, const Matrix& sigma0, double t) {
  Matrix q(n, n);
  for (int k = 0; k < n; ++k) {
    for (int m = 0; m < n; ++m) {
      double v = -factorial(n) * std::pow(t, n - k) /
                 (factorial(n - k) * factorial(m));
      if (m >= k) v += std::pow(t, m - k) / factorial(m - k);
      q(k, m) = v;
    }
  }
  Vector mu(n);
  for (int k = 0; k < n; ++k) {
    mu(k) = factorial(n) * std::pow(t, n - k) / factorial(n - k);
  }
  const auto lu = q.partialPivLu();
  Vector w = Eigen::LLT<Matrix>(sigma0).solve(lu.solve(mu));
  w = lu.adjoint().solve(w);
  return w / gamma_ref(n, sigma0, t);
}

// One RK4 pass of the conditional trajectory x' = A_hat x + b_hat x1.
Vector rk4_conditional(int n, Vector x, double x1, double t_from, double t_to,
                       double step) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t_to - t_from) / step)));
  const double h = (t_to - t_from) / steps;
  double t = t_from;
  auto f = [&](const Vector& v, double tau) {
    const auto [a, b] = dynamics::hat_matrices(n, tau);
    return Vector(a * v + b * x1);
  };
  for (int i = 0; i < steps; ++i) {
    const Vector k1 = f(x, t);
    const Vector k2 = f(x + 0.5 * h * k1, t + 0.5 * h);
    const Vector k3 = f(x + 0.5 * h * k2, t + 0.5 * h);
    const Vector k4 = f(x + h * k3, t + h);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return x;
}

// Finite difference of y = r_t' x_t along an exactly integrated conditional
// trajectory, against the closed-form y derivative.
double ydot_trajectory_error() {
  double worst = 0.0;
  for (int n : kGridN) {
    const auto config = AugmentedConfig::make(n, 1.0);
    for (double t0 : {0.3, 0.6}) {
      rng::Stream stream(55, rng::StreamId::Analysis, static_cast<std::uint64_t>(n));
      const Vector x = stream.normal_vector(n);
      const double x1 = 0.9;
      const double h = 1e-4;
      const Vector xm = rk4_conditional(n, x, x1, t0, t0 - h, 1e-5);
      const Vector xp = rk4_conditional(n, x, x1, t0, t0 + h, 1e-5);
      const double ym = r_ref(n, config.sigma0, t0 - h).dot(xm);
      const double yp = r_ref(n, config.sigma0, t0 + h).dot(xp);
      const double fd = (yp - ym) / (2 * h);

      AugmentedState state;
      state.vars = x;
      state.t = t0;
      Vector x1v(1);
      x1v << x1;
      const double got = analysis::y_dot_exact(state, x1v, config)(0);
      worst = std::max(worst, std::abs(got - fd));
    }
  }
  return worst;
}

// ---- y-dynamics decomposition: pointwise closure and residual variance ----

struct YdynErrors {
  double pointwise = 0.0;
  double variance = 0.0;
};

YdynErrors ydyn_errors(int draws) {
  YdynErrors worst;
  for (int n : {2, 3, 4}) {
    for (double k : kGridK) {
      const auto config = AugmentedConfig::make(n, k);
      for (double t : {0.3, 0.7}) {
        const auto coeff = analysis::y_dyn_coefficients(config, t);
        const auto bundle = dynamics::coefficients_at(config, t);
        const Vector g = bundle.chol.transpose() * bundle.r;
        const double g2 = g.squaredNorm();
        rng::Stream stream(81, rng::StreamId::Analysis,
                           static_cast<std::uint64_t>(n * 1000 + k * 10 + t * 100));
        double var_emp = 0.0;
        for (int i = 0; i < draws; ++i) {
          const double x1 = stream.next_normal();
          const Vector eps = stream.normal_vector(n);
          const Vector x = bundle.mu * x1 + bundle.chol * eps;
          AugmentedState state;
          state.vars = x;
          state.t = t;
          Vector x1v(1);
          x1v << x1;
          const double lhs = analysis::y_dot_exact(state, x1v, config)(0);
          const double y = bundle.r.dot(x);
          const Vector eps_perp = eps - g * (g.dot(eps) / g2);
          const double rhs =
              coeff.alpha * y + coeff.beta * x1 + coeff.w.dot(eps_perp);
          worst.pointwise = std::max(worst.pointwise, std::abs(lhs - rhs));
          const double resid = lhs - coeff.alpha * y - coeff.beta * x1;
          var_emp += resid * resid;
        }
        var_emp /= draws;
        const double var_pred = coeff.w.dot(coeff.perp_cov * coeff.w);
        worst.variance =
            std::max(worst.variance, std::abs(var_emp / var_pred - 1.0));
      }
    }
  }
  return worst;
}

// ---- whitened-noise lemma: empirical eps_perp covariance and y-correlation ----

struct PerpErrors {
  double cov = 0.0;
  double corr = 0.0;
};

PerpErrors perp_errors(int draws) {
  PerpErrors out;
  const auto config = AugmentedConfig::make(3, 2.0);
  const double t = 0.5;
  const auto bundle = dynamics::coefficients_at(config, t);
  const auto coeff = analysis::y_dyn_coefficients(config, t);
  const Vector g = bundle.chol.transpose() * bundle.r;
  const double g2 = g.squaredNorm();
  rng::Stream stream(3, rng::StreamId::Analysis, 0);
  Matrix cov_acc = Matrix::Zero(3, 3);
  double sy = 0, sr = 0, syy = 0, srr = 0, syr = 0;
  for (int i = 0; i < draws; ++i) {
    const double x1 = stream.next_normal();
    const Vector eps = stream.normal_vector(3);
    const Vector x = bundle.mu * x1 + bundle.chol * eps;
    const double y = bundle.r.dot(x);
    const Vector ep = eps - g * (g.dot(eps) / g2);
    cov_acc += ep * ep.transpose();
    const double res = coeff.w.dot(ep);
    sy += y;
    sr += res;
    syy += y * y;
    srr += res * res;
    syr += y * res;
  }
  cov_acc /= draws;
  out.cov = (cov_acc - coeff.perp_cov).cwiseAbs().maxCoeff();
  const double m = draws;
  out.corr = std::abs((syr / m - sy / m * sr / m) /
                      std::sqrt((syy / m - sy / m * sy / m) *
                                (srr / m - sr / m * sr / m)));
  return out;
}

double mdm_identity_error(int draws) {
  rng::Stream stream(15, rng::StreamId::Analysis, 1);
  double worst = 0.0;
  for (int n : {2, 3, 4}) {
    for (int i = 0; i < draws; ++i) {
      Matrix l = Matrix::Zero(n, n);
      for (int r = 0; r < n; ++r) {
        l(r, r) = 0.5 + stream.next_uniform();
        for (int c = 0; c < r; ++c) l(r, c) = 0.5 * stream.next_normal();
      }
      const Vector mu = stream.normal_vector(n);
      const auto rep = analysis::mdm_loss_reparam(l, mu);
      const double x1 = stream.next_normal();
      const Vector eps = stream.normal_vector(n);
      const Vector x = mu * x1 + l * eps;
      worst = std::max(worst, std::abs(eps(n - 1) - (rep.a.dot(x) - rep.b * x1)));
    }
  }
  return worst;
}

double n2_agreement_error(int draws) {
  rng::Stream stream(16, rng::StreamId::Analysis, 2);
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double lxx = 0.5 + stream.next_uniform();
    const double lxv = stream.next_normal();
    const double lvv = 0.5 + stream.next_uniform();
    const double mu0 = stream.next_normal();
    const double mu1 = stream.next_normal();
    Matrix l(2, 2);
    l << lxx, 0.0, lxv, lvv;
    Vector mu(2);
    mu << mu0, mu1;
    analysis::N2LossCoeffs n2;
    try {
      n2 = analysis::n2_loss_coeffs(lxx, lxv, lvv, mu0, mu1);
    } catch (const NumericError&) {
      continue;  // drew a degenerate denominator
    }
    const auto rep = analysis::mdm_loss_reparam(l, mu);
    worst = std::max({worst, std::abs(n2.a(0) - rep.a(0)),
                      std::abs(n2.a(1) - rep.a(1)), std::abs(n2.b - rep.b)});
  }
  return worst;
}

denoise::GaussianMixture equivalence_gmm() {
  denoise::GaussianMixture g;
  g.weights = {0.5, 0.5};
  g.means.resize(2, 1);
  g.means << -1.0, 1.0;
  g.variances = Matrix::Constant(2, 1, 0.25);
  return g;
}

double posterior_equivalence_error(int trials) {
  const auto g = equivalence_gmm();
  const auto config = AugmentedConfig::make(2, 1.0);
  double worst = 0.0;
  for (double t : {0.25, 0.5, 0.75}) {
    rng::Stream stream(29, rng::StreamId::Analysis,
                       static_cast<std::uint64_t>(t * 100));
    worst = std::max(worst,
                     analysis::posterior_equivalence_check(g, config, t, trials, stream));
  }
  return worst;
}

// The scalar posterior against brute-force trapezoid integration of the
// joint density on a 1e5-point grid.
double posterior_trapezoid_error() {
  const auto g = equivalence_gmm();
  const auto config = AugmentedConfig::make(2, 1.0);
  double worst = 0.0;
  for (double t : {0.25, 0.5, 0.75}) {
    const auto bundle = dynamics::coefficients_at(config, t);
    const double sbar = denoise::snr_to_sigma(bundle.gamma);
    for (double y : {-1.5, -0.4, 0.0, 0.8, 2.0}) {
      Vector yv(1);
      yv << y;
      const double got = denoise::gmm_posterior_mean(g, {yv, sbar, t})(0);
      const double span = 1.0 + 8.0 * std::sqrt(0.25 + sbar * sbar) + std::abs(y);
      const int points = 100000;
      double num = 0.0, den = 0.0;
      for (int i = 0; i < points; ++i) {
        const double x = -span + 2 * span * i / (points - 1.0);
        const double prior =
            0.5 / std::sqrt(2 * M_PI * 0.25) *
                std::exp(-0.5 * (x + 1) * (x + 1) / 0.25) +
            0.5 / std::sqrt(2 * M_PI * 0.25) *
                std::exp(-0.5 * (x - 1) * (x - 1) / 0.25);
        const double lik = std::exp(-0.5 * (y - x) * (y - x) / (sbar * sbar));
        const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
        num += w * x * prior * lik;
        den += w * prior * lik;
      }
      worst = std::max(worst, std::abs(got - num / den));
    }
  }
  return worst;
}

// Results that several checks share; computed at most once per run_checks
// call (never cached across calls, so the fault-injection hook is honored).
struct Shared {
  std::optional<RkErrors> rk, fd;
  std::optional<std::pair<double, double>> rw;
  std::optional<YdynErrors> ydyn;
  std::optional<PerpErrors> perp;

  const RkErrors& get_rk() { if (!rk) rk = rk4_errors(); return *rk; }
  const RkErrors& get_fd() { if (!fd) fd = fd_errors(); return *fd; }
  const std::pair<double, double>& get_rw() {
    if (!rw) rw = reweight_identity_errors();
    return *rw;
  }
  const YdynErrors& get_ydyn() { if (!ydyn) ydyn = ydyn_errors(1000000); return *ydyn; }
  const PerpErrors& get_perp() { if (!perp) perp = perp_errors(100000); return *perp; }
};

struct Check {
  std::string name;
  double tolerance;
  std::function<double(Shared&)> run;
};

const std::vector<Check>& registry() {
  static const std::vector<Check> checks = {
      {"dynamics/transition-vs-rk4", 1e-6, [](Shared& s) { return s.get_rk().phi; }},
      {"dynamics/mean-vs-rk4", 1e-6, [](Shared& s) { return s.get_rk().mu; }},
      {"dynamics/covariance-vs-rk4", 1e-6, [](Shared& s) { return s.get_rk().sigma; }},
      {"dynamics/transition-fd", 1e-6, [](Shared& s) { return s.get_fd().phi; }},
      {"dynamics/mean-fd", 1e-6, [](Shared& s) { return s.get_fd().mu; }},
      {"dynamics/covariance-fd", 1e-6, [](Shared& s) { return s.get_fd().sigma; }},
      {"dynamics/reweight-mu-identity", 1e-12,
       [](Shared& s) { return s.get_rw().first; }},
      {"dynamics/reweight-snr-identity", 1e-12,
       [](Shared& s) { return s.get_rw().second; }},
      {"dynamics/gamma-monotone", 0.5,
       [](Shared&) { return gamma_monotone_violations(); }},
      {"sampler/psi-vs-trapezoid", 1e-9,
       [](Shared&) { return psi_quadrature_error(); }},
      {"sampler/n1-flow-matching-equivalence", 1e-10,
       [](Shared&) { return n1_equivalence_error(); }},
      {"analysis/gamma-dot-fd", 1e-6, [](Shared&) { return gamma_dot_fd_error(); }},
      {"analysis/ydot-fd-trajectory", 1e-5,
       [](Shared&) { return ydot_trajectory_error(); }},
      {"analysis/ydyn-pointwise", 1e-6,
       [](Shared& s) { return s.get_ydyn().pointwise; }},
      {"analysis/ydyn-residual-variance", 0.02,
       [](Shared& s) { return s.get_ydyn().variance; }},
      {"analysis/perp-cov-mc", 5e-2, [](Shared& s) { return s.get_perp().cov; }},
      {"analysis/perp-corr", 5e-3, [](Shared& s) { return s.get_perp().corr; }},
      {"analysis/mdm-identity", 1e-10,
       [](Shared&) { return mdm_identity_error(10000); }},
      {"analysis/n2-agreement", 1e-10,
       [](Shared&) { return n2_agreement_error(1000); }},
      {"analysis/posterior-equivalence", 1e-8,
       [](Shared&) { return posterior_equivalence_error(1000); }},
      {"analysis/posterior-vs-trapezoid", 1e-6,
       [](Shared&) { return posterior_trapezoid_error(); }},
  };
  return checks;
}

}  // namespace

std::vector<CheckResult> run_checks(const std::string& filter) {
  Shared shared;
  std::vector<CheckResult> results;
  for (const auto& check : registry()) {
    if (!filter.empty() && check.name.find(filter) == std::string::npos) continue;
    CheckResult r;
    r.name = check.name;
    r.tolerance = check.tolerance;
    r.observed = check.run(shared);
    r.pass = r.observed < check.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<std::string> check_names() {
  std::vector<std::string> names;
  for (const auto& check : registry()) names.push_back(check.name);
  return names;
}

}  // namespace tada::app
