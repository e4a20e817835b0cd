#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tada/dynamics.hpp"
#include "tada/metrics.hpp"
#include "tada/sampler.hpp"

using namespace tada;
using namespace tada::sampler;

namespace {

// Denoiser returning a constant target.
class ConstantDenoiser final : public denoise::Denoiser {
 public:
  explicit ConstantDenoiser(Vector c) : c_(std::move(c)) {}
  Vector denoise(const denoise::DenoiseQuery&) const override { return c_; }
  int dim() const override { return static_cast<int>(c_.size()); }

 private:
  Vector c_;
};

// N = 1 helper: x_hat = t * y reproduces x, so the force vanishes.
class IdentityFlowDenoiser final : public denoise::Denoiser {
 public:
  Vector denoise(const denoise::DenoiseQuery& q) const override {
    if (std::isinf(q.sigma_bar)) return Vector::Zero(q.y.size());
    return q.t * q.y;
  }
  int dim() const override { return 1; }
};

class NanDenoiser final : public denoise::Denoiser {
 public:
  Vector denoise(const denoise::DenoiseQuery& q) const override {
    return Vector::Constant(q.y.size(), std::nan(""));
  }
  int dim() const override { return 1; }
};

denoise::GmmDenoiser two_mode_denoiser() {
  denoise::GaussianMixture g;
  g.weights = {0.5, 0.5};
  g.means.resize(2, 1);
  g.means << -1.0, 1.5;
  g.variances.resize(2, 1);
  g.variances << 0.3, 0.2;
  return denoise::GmmDenoiser(g);
}

}  // namespace

TEST_CASE("schedule construction") {
  const auto u = make_uniform_schedule(2, 1e-9);
  CHECK(u.times.size() == 3);
  CHECK(u.times[1] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(u.times[2] == doctest::Approx(1.0).epsilon(1e-8));

  const auto p = make_polynomial_schedule(2, 2.0, 1e-9);
  CHECK(p.times[1] == doctest::Approx(0.25).epsilon(1e-8));

  // p = 1 degenerates to uniform
  const auto p1 = make_polynomial_schedule(7, 1.0, 1e-3);
  const auto u7 = make_uniform_schedule(7, 1e-3);
  for (int i = 0; i <= 7; ++i) CHECK(p1.times[i] == doctest::Approx(u7.times[i]));

  CHECK_THROWS_AS(make_uniform_schedule(0, 1e-3), ConfigError);
  CHECK_THROWS_AS(make_schedule("nope", 5, 2.0, 1e-3,
                                AugmentedConfig::make(2), 1e-3),
                  ConfigError);
}

TEST_CASE("logsnr schedule is log-uniform in gamma above the floor") {
  const auto config = AugmentedConfig::make(2, 1.0);
  const auto s = make_logsnr_schedule(config, 10, 1e-3, 1e-3);
  CHECK(s.times[0] == 0.0);
  CHECK(s.times[1] == doctest::Approx(1e-3));
  CHECK(s.times.back() == doctest::Approx(1.0 - 1e-3));
  std::vector<double> lg;
  for (std::size_t i = 1; i < s.times.size(); ++i) {
    lg.push_back(std::log(dynamics::coefficients_at(config, s.times[i]).gamma));
  }
  const double step0 = lg[1] - lg[0];
  for (std::size_t i = 1; i + 1 < lg.size(); ++i) {
    CHECK(lg[i + 1] - lg[i] == doctest::Approx(step0).epsilon(1e-6));
  }
}

TEST_CASE("history cache ring semantics") {
  HistoryCache cache(2);
  cache.push(0.0, Vector::Ones(1));
  CHECK(cache.size() == 1);
  cache.push(0.1, Vector::Ones(1) * 2);
  CHECK(cache.size() == 2);
  cache.push(0.2, Vector::Ones(1) * 3);
  CHECK(cache.size() == 2);
  CHECK(cache.time(0) == 0.1);
  CHECK(cache.force(1)(0) == 3.0);
  CHECK_THROWS_AS(cache.push(0.05, Vector::Ones(1)), ConfigError);
}

TEST_CASE("psi_integral closed forms for a single node") {
  HistoryCache cache(3);
  const double c = 1.7;
  cache.push(0.2, Vector::Constant(1, c));

  // N = 1: c * (t_to - t_from)
  const Matrix p1 = psi_integral(cache, 0.2, 0.5, 1);
  CHECK(p1(0, 0) == doctest::Approx(c * 0.3));

  // N = 2: [c d^2/2, c d]
  const Matrix p2 = psi_integral(cache, 0.2, 0.5, 2);
  CHECK(p2(0, 0) == doctest::Approx(c * 0.3 * 0.3 / 2));
  CHECK(p2(1, 0) == doctest::Approx(c * 0.3));
}

TEST_CASE("psi_integral integrates a linear extrapolant exactly") {
  // nodes (0, 0), (-1, -1) define P(tau) = tau; integral over [0,1] is 1/2
  HistoryCache cache(2);
  cache.push(-1.0, Vector::Constant(1, -1.0));
  cache.push(0.0, Vector::Constant(1, 0.0));
  CHECK(psi_integral(cache, 0.0, 1.0, 1)(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("psi_integral matches dense trapezoid quadrature") {
  // ten thousand point trapezoid on the same polynomial integrand
  for (int n : {1, 2, 3, 4}) {
    for (int order : {1, 2, 3}) {
      HistoryCache cache(order);
      std::vector<double> ts;
      std::vector<double> fs;
      for (int j = 0; j < order; ++j) {
        const double t = 0.1 * j;
        const double f = 0.3 + 0.9 * j - 0.4 * j * j;
        ts.push_back(t);
        fs.push_back(f);
        cache.push(t, Vector::Constant(1, f));
      }
      // Step length chosen so the trapezoid oracle's own truncation (which
      // scales with P'' delta^2) stays below the 1e-9 comparison level.
      const double t_from = ts.back();
      const double t_to = t_from + 0.02;
      const Matrix psi = psi_integral(cache, t_from, t_to, n);
      Vector quad(n);
      for (int k = 0; k < n; ++k) {
        auto integrand = [&](double tau) {
          double lagr = 0.0;
          for (int j = 0; j < order; ++j) {
            double lj = fs[j];
            for (int i = 0; i < order; ++i) {
              if (i != j) lj *= (tau - ts[i]) / (ts[j] - ts[i]);
            }
            lagr += lj;
          }
          return std::pow(t_to - tau, n - 1 - k) /
                 oracle::factorial(n - 1 - k) * lagr;
        };
        quad(k) = oracle::trapezoid(integrand, t_from, t_to, 10000);
      }
      // The trapezoid rule itself carries ~1e-8 relative truncation on the
      // quadratic and cubic rows, so the tight comparison is against the
      // vector magnitude; per-entry agreement is an order looser.
      const double scale = std::max(quad.cwiseAbs().maxCoeff(), 1e-12);
      for (int k = 0; k < n; ++k) {
        CHECK(std::abs(psi(k, 0) - quad(k)) / scale < 1e-9);
        CHECK(std::abs(psi(k, 0) - quad(k)) /
                  std::max(std::abs(quad(k)), 1e-12) <
              1e-7);
      }
    }
  }
}

TEST_CASE("psi_integral rejects bad inputs") {
  HistoryCache empty(2);
  CHECK_THROWS_AS(psi_integral(empty, 0.0, 0.1, 2), ConfigError);
  HistoryCache cache(2);
  cache.push(0.3, Vector::Zero(1));
  CHECK_THROWS_AS(psi_integral(cache, 0.1, 0.2, 2), ConfigError);  // node beyond t_from
  CHECK_THROWS_AS(psi_integral(cache, 0.4, 0.4, 2), ConfigError);
}

TEST_CASE("sample_prior applies the prior factor") {
  // identity prior: vars are the raw noise blocks
  const auto c1 = AugmentedConfig::make(2, 1.0);
  rng::Stream s1(11, rng::StreamId::Prior, 0);
  rng::Stream s2(11, rng::StreamId::Prior, 0);
  const auto st = sample_prior(c1, 3, s1);
  const Matrix eps = s2.normal_matrix(2, 3);
  CHECK((st.vars - eps).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.t == 0.0);

  // diag(1, k): second block scaled by sqrt(k)
  const auto ck = AugmentedConfig::make(2, 4.0);
  rng::Stream s3(11, rng::StreamId::Prior, 0);
  const auto stk = sample_prior(ck, 3, s3);
  CHECK((stk.vars.row(0) - eps.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((stk.vars.row(1) - 2.0 * eps.row(1)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sample_prior covariance matches sigma0 (monte carlo)") {
  const auto config = AugmentedConfig::make(2, 3.0);
  const int m = 100000;
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i < m; ++i) {
    rng::Stream s(77, rng::StreamId::Prior, static_cast<std::uint64_t>(i));
    const auto st = sample_prior(config, 1, s);
    acc += st.vars * st.vars.transpose();
  }
  acc /= m;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(acc(i, j) - config.sigma0(i, j)) <
            0.03 * std::max(1.0, config.sigma0(i, j)));
    }
  }
}

TEST_CASE("tada_step with a vanishing force is the pure shift") {
  const auto config = AugmentedConfig::make(1, 1.0);
  IdentityFlowDenoiser den;
  AugmentedState state;
  state.vars = Matrix::Constant(1, 2, 0.8);
  state.t = 0.25;
  HistoryCache cache(1);
  const auto bundle = dynamics::coefficients_at(config, 0.25);
  tada_step(state, den, bundle, 0.5, cache);
  // N = 1 shift is the identity and F = 0, so the state is unchanged
  CHECK(state.vars(0, 0) == doctest::Approx(0.8));
  CHECK(state.t == 0.5);
}

TEST_CASE("tada_step cache growth follows ring semantics") {
  const auto config = AugmentedConfig::make(2, 1.0);
  const auto den = two_mode_denoiser();
  const auto schedule = make_uniform_schedule(6, 1e-3);
  AugmentedState state;
  rng::Stream s(3, rng::StreamId::Prior, 0);
  state = sample_prior(config, 1, s);
  HistoryCache cache(3);
  for (int i = 0; i < 6; ++i) {
    const auto bundle = dynamics::coefficients_at(config, schedule.times[i]);
    const int before = cache.size();
    tada_step(state, den, bundle, schedule.times[i + 1], cache);
    CHECK(cache.size() == std::min(before + 1, 3));
  }
}

TEST_CASE("tada_step aborts with a stage diagnostic on NaN") {
  const auto config = AugmentedConfig::make(2, 1.0);
  NanDenoiser den;
  AugmentedState state;
  rng::Stream s(3, rng::StreamId::Prior, 0);
  state = sample_prior(config, 1, s);
  HistoryCache cache(1);
  const auto bundle = dynamics::coefficients_at(config, 0.0);
  try {
    tada_step(state, den, bundle, 0.5, cache);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("denoiser") != std::string::npos);
  }
}

TEST_CASE("tada_sample NFE accounting and determinism") {
  SamplerRun run;
  run.config = AugmentedConfig::make(2, 1.0);
  run.schedule = make_polynomial_schedule(15, 2.0, 1e-3);
  run.order = 3;
  run.seed = 123;
  run.batch = 4;
  const auto den = two_mode_denoiser();

  const auto a = tada_sample(den, run, 1);
  CHECK(a.nfe_per_sample == 16);
  CHECK(a.denoiser_calls == 4 * 16);

  const auto b = tada_sample(den, run, 1);
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);

  // batch partitioning does not change per-sample results
  SamplerRun one = run;
  one.batch = 1;
  const auto c = tada_sample(den, one, 1);
  CHECK((a.samples.row(0) - c.samples.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant denoiser drives every sample to the constant") {
  for (int n : {1, 2, 3}) {
    SamplerRun run;
    run.config = AugmentedConfig::make(n, 1.0);
    run.schedule = make_uniform_schedule(60, 1e-3);
    run.order = std::min(3, 60);
    run.seed = 5;
    run.batch = 8;
    const ConstantDenoiser den(Vector::Constant(1, 0.77));
    const auto out = tada_sample(den, run, 1);
    CHECK((out.samples.array() - 0.77).abs().maxCoeff() < 1e-2);
  }
}

TEST_CASE("tada at N = 1 equals the independent flow-matching baseline") {
  const auto den = two_mode_denoiser();
  const auto schedule = make_polynomial_schedule(20, 2.0, 1e-3);
  for (int order : {1, 2, 3}) {
    SamplerRun run;
    run.config = AugmentedConfig::make(1, 1.0);
    run.schedule = schedule;
    run.order = order;
    run.seed = 2718;
    run.batch = 32;
    const auto a = tada_sample(den, run, 1);
    const auto b = fm_baseline_sample(den, schedule, order, 1, 2718, 32);
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("fm baseline recovers a single-gaussian mean") {
  denoise::GaussianMixture g;
  g.weights = {1.0};
  g.means = Matrix::Constant(1, 1, 0.6);
  g.variances = Matrix::Constant(1, 1, 0.09);
  const denoise::GmmDenoiser den(g);
  const auto schedule = make_uniform_schedule(50, 1e-3);
  const auto out = fm_baseline_sample(den, schedule, 3, 1, 99, 10000);
  const double mean = out.samples.col(0).mean();
  CHECK(std::abs(mean - 0.6) < 3.0 * 0.3 / std::sqrt(10000.0));
}

namespace {

denoise::GmmDenoiser single_gaussian_denoiser() {
  denoise::GaussianMixture g;
  g.weights = {1.0};
  g.means = Matrix::Constant(1, 1, 0.7);
  g.variances = Matrix::Constant(1, 1, 0.09);
  return denoise::GmmDenoiser(g);
}

double terminal_error(const denoise::Denoiser& den, int n, int order, int T,
                      const std::string& scheme) {
  const auto config = AugmentedConfig::make(n, 1.0);
  SamplerRun run;
  run.config = config;
  run.schedule = make_schedule(scheme, T, 2.0, 1e-3, config, 1e-3);
  run.order = order;
  run.seed = 7;
  run.batch = 8;
  const auto out = tada_sample(den, run, 1);
  SamplerRun ref = run;
  ref.schedule = make_schedule(scheme, 4096, 2.0, 1e-3, config, 1e-3);
  ref.order = 3;
  const auto rout = tada_sample(den, ref, 1);
  return (out.samples - rout.samples).cwiseAbs().maxCoeff();
}

double regression_slope(const std::vector<int>& ts, const std::vector<double>& es) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double x = std::log(static_cast<double>(ts[i]));
    const double y = std::log(es[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("terminal error decays at the nominal order on the analytic flow") {
  const auto den = single_gaussian_denoiser();
  // The T windows and discretizations put each configuration inside its
  // asymptotic regime: the order ramp starts every run with one first-order
  // step, whose leftover error floors late-T uniform grids at N = 2, while
  // the quadratic schedule's tiny first step removes that floor.
  struct Setup {
    int n, order;
    std::string scheme;
    std::vector<int> ts;
  };
  const std::vector<Setup> setups = {
      {1, 1, "uniform-t", {16, 32, 64, 128}},
      {2, 1, "uniform-t", {16, 32, 64, 128}},
      {1, 2, "uniform-t", {16, 32, 64, 128}},
      {2, 2, "uniform-t", {16, 32, 64, 128}},
      {1, 3, "uniform-t", {25, 40, 64, 100, 160}},
      {2, 3, "polynomial-t", {16, 25, 40, 64, 100}},
  };
  for (const auto& s : setups) {
    std::vector<double> errs;
    for (int T : s.ts) errs.push_back(terminal_error(den, s.n, s.order, T, s.scheme));
    const double slope = regression_slope(s.ts, errs);
    INFO("N=", s.n, " order=", s.order, " scheme=", s.scheme, " slope=", slope);
    CHECK(slope <= -s.order + 0.3);
  }
}

TEST_CASE("order 3 beats order 1 on a two-mode target at T = 10") {
  const auto den = two_mode_denoiser();
  const auto schedule = make_uniform_schedule(10, 1e-3);
  const int batch = 4096;
  const auto o1 = fm_baseline_sample(den, schedule, 1, 1, 55, batch);
  const auto o3 = fm_baseline_sample(den, schedule, 3, 1, 55, batch);

  Matrix truth(4 * batch, 1);
  rng::Stream stream(56, rng::StreamId::Data, 0);
  for (int i = 0; i < truth.rows(); ++i) {
    truth(i, 0) = den.mixture().sample(stream)(0);
  }
  metrics::SampleBatch want{truth, "truth"};
  const double w1 = metrics::sliced_wasserstein2({o1.samples, "o1"}, want, 1, 2);
  const double w3 = metrics::sliced_wasserstein2({o3.samples, "o3"}, want, 1, 2);
  CHECK(w3 < w1);
}

TEST_CASE("run validation") {
  SamplerRun run;
  run.config = AugmentedConfig::make(2, 1.0);
  run.schedule = make_uniform_schedule(2, 1e-3);
  run.order = 3;  // order > steps
  CHECK_THROWS_AS(run.validate(), ConfigError);
  run.order = 2;
  run.batch = 0;
  CHECK_THROWS_AS(run.validate(), ConfigError);
}

TEST_CASE("trajectory observer sees every denoiser call") {
  SamplerRun run;
  run.config = AugmentedConfig::make(2, 1.0);
  run.schedule = make_uniform_schedule(5, 1e-3);
  run.order = 2;
  run.batch = 3;
  const auto den = two_mode_denoiser();
  int calls = 0;
  const auto out = tada_sample(den, run, 1,
                               [&](int, double, const Vector&, const Vector&) {
                                 ++calls;
                               });
  CHECK(calls == out.denoiser_calls);
}
