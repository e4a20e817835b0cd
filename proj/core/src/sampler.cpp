#include "tada/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tada/dynamics.hpp"

namespace tada::sampler {

namespace {

constexpr double kFactorial[] = {1.0,   1.0,   2.0,    6.0,    24.0,
                                 120.0, 720.0, 5040.0, 40320.0};

// 8-point Gauss-Legendre on [-1, 1]: exact for polynomials up to degree 15,
// ample for (N - 1) + (order - 1) <= 9.
constexpr int kGaussN = 8;
constexpr double kGaussX[kGaussN] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
    0.7966664774136267,  0.9602898564975363};
constexpr double kGaussW[kGaussN] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
    0.2223810344533745, 0.1012285362903763};

void require_finite(const Matrix& m, const char* stage) {
  if (!m.allFinite()) {
    throw NumericError(std::string("tada_step: non-finite value at stage ") + stage);
  }
}

void require_finite(const Vector& v, const char* stage) {
  if (!v.allFinite()) {
    throw NumericError(std::string("tada_step: non-finite value at stage ") + stage);
  }
}

double bundle_gamma(const AugmentedConfig& config, double t) {
  return dynamics::coefficients_at(config, t).gamma;
}

}  // namespace

void Schedule::validate() const {
  if (times.size() < 2) throw ConfigError("schedule needs at least one step");
  if (times.front() != 0.0) throw ConfigError("schedule must start at t = 0");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw ConfigError("schedule times must be strictly increasing");
    }
  }
  if (!(times.back() < 1.0)) throw ConfigError("schedule must end before t = 1");
}

Schedule make_uniform_schedule(int steps, double delta) {
  if (steps < 1) throw ConfigError("make_schedule: steps >= 1 required");
  Schedule s;
  s.scheme = "uniform-t";
  s.times.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) s.times[i] = (1.0 - delta) * i / steps;
  s.validate();
  return s;
}

Schedule make_polynomial_schedule(int steps, double p, double delta) {
  if (steps < 1) throw ConfigError("make_schedule: steps >= 1 required");
  if (!(p > 0.0)) throw ConfigError("make_schedule: polynomial exponent must be positive");
  Schedule s;
  s.scheme = "polynomial-t";
  s.times.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    s.times[i] = (1.0 - delta) * std::pow(static_cast<double>(i) / steps, p);
  }
  s.validate();
  return s;
}

Schedule make_logsnr_schedule(const AugmentedConfig& config, int steps,
                              double t_floor, double delta) {
  if (steps < 1) throw ConfigError("make_schedule: steps >= 1 required");
  if (!(t_floor > 0.0 && t_floor < 1.0 - delta)) {
    throw ConfigError("make_schedule: t_floor must lie in (0, 1 - delta)");
  }
  Schedule s;
  s.scheme = "logsnr-uniform";
  s.times.resize(steps + 1);
  s.times[0] = 0.0;
  const double t_end = 1.0 - delta;
  if (steps == 1) {
    s.times[1] = t_end;
    s.validate();
    return s;
  }
  const double lg_lo = std::log(bundle_gamma(config, t_floor));
  const double lg_hi = std::log(bundle_gamma(config, t_end));
  for (int i = 1; i <= steps; ++i) {
    const double target = lg_lo + (lg_hi - lg_lo) * (i - 1) / (steps - 1);
    // gamma is monotone on the default family; bisect in t.
    double lo = t_floor, hi = t_end;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (std::log(bundle_gamma(config, mid)) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    s.times[i] = (i == 1) ? t_floor : (i == steps ? t_end : 0.5 * (lo + hi));
  }
  s.validate();
  return s;
}

Schedule make_schedule(const std::string& scheme, int steps, double poly_p,
                       double t_floor, const AugmentedConfig& config,
                       double delta) {
  if (scheme == "uniform-t") return make_uniform_schedule(steps, delta);
  if (scheme == "polynomial-t") return make_polynomial_schedule(steps, poly_p, delta);
  if (scheme == "logsnr-uniform") {
    return make_logsnr_schedule(config, steps, t_floor, delta);
  }
  throw ConfigError("make_schedule: unknown scheme '" + scheme + "'");
}

HistoryCache::HistoryCache(int order) : capacity_(order) {
  if (order < 1 || order > 3) throw ConfigError("HistoryCache: order must be 1..3");
}

void HistoryCache::push(double t, Vector force) {
  if (!entries_.empty() && !(t > entries_.back().first)) {
    throw ConfigError("HistoryCache: times must be strictly increasing");
  }
  entries_.emplace_back(t, std::move(force));
  if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

Matrix psi_integral(const HistoryCache& cache, double t_from, double t_to,
                    int n_vars) {
  const int m = cache.size();
  if (m == 0) throw ConfigError("psi_integral: empty history");
  if (!(t_from < t_to)) throw ConfigError("psi_integral: t_from must precede t_to");
  for (int j = 0; j < m; ++j) {
    if (cache.time(j) > t_from) {
      throw ConfigError("psi_integral: cache times must not exceed t_from");
    }
  }

  // Weights w(k, j) = integral of (t_to - tau)^(N-1-k)/(N-1-k)! * l_j(tau).
  const double mid = 0.5 * (t_from + t_to);
  const double half = 0.5 * (t_to - t_from);
  Matrix weights = Matrix::Zero(n_vars, m);
  for (int g = 0; g < kGaussN; ++g) {
    const double tau = mid + half * kGaussX[g];
    const double wq = half * kGaussW[g];
    for (int j = 0; j < m; ++j) {
      double lagrange = 1.0;
      for (int i = 0; i < m; ++i) {
        if (i != j) lagrange *= (tau - cache.time(i)) / (cache.time(j) - cache.time(i));
      }
      for (int k = 0; k < n_vars; ++k) {
        const int p = n_vars - 1 - k;
        weights(k, j) += wq * std::pow(t_to - tau, p) / kFactorial[p] * lagrange;
      }
    }
  }

  const int d = static_cast<int>(cache.force(0).size());
  Matrix psi = Matrix::Zero(n_vars, d);
  for (int j = 0; j < m; ++j) {
    psi += weights.col(j) * cache.force(j).transpose();
  }
  return psi;
}

void SamplerRun::validate() const {
  config.validate();
  schedule.validate();
  if (order < 1 || order > 3) throw ConfigError("run: order must be 1..3");
  if (order > schedule.steps()) {
    throw ConfigError("run: order exceeds the number of schedule steps");
  }
  if (batch < 1) throw ConfigError("run: batch must be positive");
  if (schedule.times.back() > config.t_final() + 1e-15) {
    throw ConfigError("run: schedule exceeds the configured terminal time");
  }
}

AugmentedState prior_from_noise(const AugmentedConfig& config, const Matrix& eps) {
  if (eps.rows() != config.n_vars) {
    throw ConfigError("prior_from_noise: noise rows must equal n_vars");
  }
  AugmentedState state;
  state.vars = dynamics::cholesky_factor(config.sigma0) * eps;
  state.t = 0.0;
  return state;
}

AugmentedState sample_prior(const AugmentedConfig& config, int d,
                            rng::Stream& stream) {
  return prior_from_noise(config, stream.normal_matrix(config.n_vars, d));
}

void tada_step(AugmentedState& state, const denoise::Denoiser& denoiser,
               const CoefficientBundle& bundle, double t_next,
               HistoryCache& cache, double delta_force,
               const TrajectoryObserver& observer, int sample_index) {
  if (!(state.t < t_next)) throw ConfigError("tada_step: t_next must exceed state.t");
  const int n = state.n_vars();

  const Vector y = dynamics::project_y(state, bundle.r);
  require_finite(y, "project_y");

  const Vector x_hat = denoiser.denoise(
      {y, denoise::snr_to_sigma(bundle.gamma), state.t});
  require_finite(x_hat, "denoiser");
  if (observer) observer(sample_index, state.t, y, x_hat);

  const Vector force = dynamics::force_term(state, x_hat, state.t, delta_force);
  require_finite(force, "force_term");
  cache.push(state.t, force);

  const Matrix psi = psi_integral(cache, state.t, t_next, n);
  require_finite(psi, "psi_integral");

  state.vars = dynamics::shift_transition(n, t_next - state.t) * state.vars + psi;
  state.t = t_next;
  require_finite(state.vars, "state_update");
}

namespace {

SampleResult run_batch(const denoise::Denoiser& denoiser, const SamplerRun& run,
                       int d, const std::vector<Matrix>* noise,
                       const TrajectoryObserver& observer) {
  run.validate();
  const auto& times = run.schedule.times;
  const int steps = run.schedule.steps();

  // Coefficients depend only on the schedule; share them across the batch.
  std::vector<CoefficientBundle> bundles;
  bundles.reserve(times.size());
  for (double t : times) bundles.push_back(dynamics::coefficients_at(run.config, t));

  SampleResult result;
  result.samples.resize(run.batch, d);
  result.nfe_per_sample = steps + 1;

  for (int b = 0; b < run.batch; ++b) {
    AugmentedState state;
    if (noise != nullptr) {
      state = prior_from_noise(run.config, (*noise)[b]);
    } else {
      rng::Stream stream(run.seed, rng::StreamId::Prior, static_cast<std::uint64_t>(b));
      state = sample_prior(run.config, d, stream);
    }
    HistoryCache cache(run.order);
    for (int i = 0; i < steps; ++i) {
      tada_step(state, denoiser, bundles[i], times[i + 1], cache,
                run.config.t_clamp_delta, observer, b);
      ++result.denoiser_calls;
    }
    const auto& last = bundles.back();
    const Vector y = dynamics::project_y(state, last.r);
    require_finite(y, "project_y");
    const Vector x_hat = denoiser.denoise(
        {y, denoise::snr_to_sigma(last.gamma), state.t});
    require_finite(x_hat, "denoiser");
    if (observer) observer(b, state.t, y, x_hat);
    ++result.denoiser_calls;
    result.samples.row(b) = x_hat.transpose();
  }
  return result;
}

}  // namespace

SampleResult tada_sample(const denoise::Denoiser& denoiser, const SamplerRun& run,
                         int d, const TrajectoryObserver& observer) {
  return run_batch(denoiser, run, d, nullptr, observer);
}

SampleResult tada_sample_with_noise(const denoise::Denoiser& denoiser,
                                    const SamplerRun& run, int d,
                                    const std::vector<Matrix>& noise,
                                    const TrajectoryObserver& observer) {
  if (static_cast<int>(noise.size()) != run.batch) {
    throw ConfigError("tada_sample_with_noise: one noise block per batch entry");
  }
  return run_batch(denoiser, run, d, &noise, observer);
}

namespace {

// Closed-form integral of the Lagrange extrapolant: expand each basis
// polynomial into monomial coefficients and integrate term by term. This is
// an independent route from the Gauss-Legendre weights used by psi_integral.
double lagrange_integral(const std::vector<double>& ts, int j, double a, double b) {
  // numerator coefficients of prod_{i != j} (tau - t_i)
  std::vector<double> coeff{1.0};
  double denom = 1.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (static_cast<int>(i) == j) continue;
    denom *= ts[j] - ts[i];
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t c = 0; c < coeff.size(); ++c) {
      next[c + 1] += coeff[c];
      next[c] -= coeff[c] * ts[i];
    }
    coeff = std::move(next);
  }
  double integral = 0.0;
  for (std::size_t p = 0; p < coeff.size(); ++p) {
    integral += coeff[p] * (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
  }
  return integral / denom;
}

}  // namespace

SampleResult fm_baseline_sample(const denoise::Denoiser& denoiser,
                                const Schedule& schedule, int order, int d,
                                std::uint64_t seed, int batch, double sigma0) {
  schedule.validate();
  if (order < 1 || order > 3) throw ConfigError("fm_baseline: order must be 1..3");
  if (order > schedule.steps()) {
    throw ConfigError("fm_baseline: order exceeds the number of schedule steps");
  }
  if (!(sigma0 > 0.0)) throw ConfigError("fm_baseline: sigma0 must be positive");

  const auto& times = schedule.times;
  SampleResult result;
  result.samples.resize(batch, d);
  result.nfe_per_sample = schedule.steps() + 1;

  for (int b = 0; b < batch; ++b) {
    rng::Stream stream(seed, rng::StreamId::Prior, static_cast<std::uint64_t>(b));
    Vector x = sigma0 * stream.normal_vector(d);
    std::vector<double> cache_t;
    std::vector<Vector> cache_f;
    for (int i = 0; i + 1 < static_cast<int>(times.size()); ++i) {
      const double t = times[i];
      const double sbar = (t == 0.0) ? std::numeric_limits<double>::infinity()
                                     : (1.0 - t) * sigma0 / t;
      const Vector y = (t == 0.0) ? x : Vector(x / t);
      const Vector x_hat = denoiser.denoise({y, sbar, t});
      ++result.denoiser_calls;
      cache_t.push_back(t);
      cache_f.push_back((x_hat - x) / (1.0 - t));
      if (static_cast<int>(cache_t.size()) > order) {
        cache_t.erase(cache_t.begin());
        cache_f.erase(cache_f.begin());
      }
      Vector incr = Vector::Zero(d);
      for (std::size_t j = 0; j < cache_t.size(); ++j) {
        incr += lagrange_integral(cache_t, static_cast<int>(j), t, times[i + 1]) *
                cache_f[j];
      }
      x += incr;
      if (!x.allFinite()) throw NumericError("fm_baseline: non-finite state");
    }
    const double tT = times.back();
    result.samples.row(b) =
        denoiser.denoise({x / tT, (1.0 - tT) * sigma0 / tT, tT}).transpose();
    ++result.denoiser_calls;
  }
  return result;
}

}  // namespace tada::sampler
