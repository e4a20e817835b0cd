#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tada/denoiser.hpp"

using namespace tada;
using namespace tada::denoise;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GaussianMixture two_modes_1d(double m0, double m1, double v0, double v1,
                             double w0 = 0.5) {
  GaussianMixture g;
  g.weights = {w0, 1.0 - w0};
  g.means.resize(2, 1);
  g.means << m0, m1;
  g.variances.resize(2, 1);
  g.variances << v0, v1;
  g.validate();
  return g;
}

Vector scalar(double v) {
  Vector x(1);
  x << v;
  return x;
}

}  // namespace

TEST_CASE("gmm posterior mean, conjugate single component") {
  GaussianMixture g;
  g.weights = {1.0};
  g.means = Matrix::Zero(1, 1);
  g.variances = Matrix::Ones(1, 1);
  // (s^2 y + sbar^2 m) / (s^2 + sbar^2) = (1*2 + 1*0)/2 = 1
  CHECK(gmm_posterior_mean(g, {scalar(2.0), 1.0})(0) == doctest::Approx(1.0));
}

TEST_CASE("gmm posterior mean limits") {
  const auto g = two_modes_1d(-1.0, 2.0, 0.3, 0.5, 0.25);
  CHECK(gmm_posterior_mean(g, {scalar(0.7), kInf})(0) ==
        doctest::Approx(0.25 * -1.0 + 0.75 * 2.0));
  CHECK(gmm_posterior_mean(g, {scalar(0.7), 0.0})(0) == doctest::Approx(0.7));

  const auto sym = two_modes_1d(-1.0, 1.0, 1e-6, 1e-6);
  CHECK(gmm_posterior_mean(sym, {scalar(0.0), 0.5})(0) == doctest::Approx(0.0));
}

TEST_CASE("gmm posterior mean stays in the convex hull of component posteriors") {
  const auto g = two_modes_1d(-2.0, 3.0, 0.5, 0.1, 0.4);
  for (double sbar : {0.01, 0.3, 1.0, 30.0}) {
    for (double y = -6.0; y <= 6.0; y += 0.37) {
      const double s2 = sbar * sbar;
      const double p0 = (0.5 * y + s2 * -2.0) / (0.5 + s2);
      const double p1 = (0.1 * y + s2 * 3.0) / (0.1 + s2);
      const double out = gmm_posterior_mean(g, {scalar(y), sbar})(0);
      CHECK(out >= std::min(p0, p1) - 1e-12);
      CHECK(out <= std::max(p0, p1) + 1e-12);
    }
  }
}

TEST_CASE("gmm posterior mean matches trapezoid integration") {
  const auto g = two_modes_1d(-1.0, 1.4, 0.25, 0.6, 0.35);
  for (double sbar : {0.05, 0.5, 2.0, 50.0}) {
    for (double y : {-1.2, 0.0, 0.9, 3.0}) {
      const double got = gmm_posterior_mean(g, {scalar(y), sbar})(0);
      // integrate x p(x) N(y; x, sbar^2) over a wide bracket
      const double lo = -1.0 - 8.0 * std::sqrt(0.6 + sbar * sbar) - std::abs(y);
      const double hi = 1.4 + 8.0 * std::sqrt(0.6 + sbar * sbar) + std::abs(y);
      auto joint = [&](double x) {
        const double prior =
            0.35 / std::sqrt(2 * M_PI * 0.25) * std::exp(-0.5 * (x + 1.0) * (x + 1.0) / 0.25) +
            0.65 / std::sqrt(2 * M_PI * 0.6) * std::exp(-0.5 * (x - 1.4) * (x - 1.4) / 0.6);
        const double lik = std::exp(-0.5 * (y - x) * (y - x) / (sbar * sbar));
        return prior * lik;
      };
      const double num = oracle::trapezoid([&](double x) { return x * joint(x); },
                                           lo, hi, 100000);
      const double den = oracle::trapezoid(joint, lo, hi, 100000);
      CHECK(std::abs(got - num / den) < 1e-6);
    }
  }
}

TEST_CASE("gmm posterior mean works in 2-D with axis-aligned components") {
  const auto ring = make_ring_gmm(8, 2.0, 0.2);
  Vector y(2);
  y << 1.9, 0.05;
  const Vector out = gmm_posterior_mean(ring, {y, 0.1});
  CHECK((out - ring.means.row(0).transpose()).norm() < 0.2);
}

TEST_CASE("pointset posterior mean") {
  PointDataset d;
  d.points.resize(2, 1);
  d.points << -1.0, 1.0;

  CHECK(std::abs(pointset_posterior_mean(d, {scalar(0.3), 100.0})(0)) < 1e-3);
  CHECK(pointset_posterior_mean(d, {scalar(0.9), 0.01})(0) == doctest::Approx(1.0));

  PointDataset single;
  single.points.resize(1, 1);
  single.points << 0.42;
  for (double sbar : {0.01, 1.0, 100.0}) {
    CHECK(pointset_posterior_mean(single, {scalar(-5.0), sbar})(0) ==
          doctest::Approx(0.42));
  }

  // convex hull of the dataset
  PointDataset tri;
  tri.points.resize(3, 1);
  tri.points << -2.0, 0.5, 3.0;
  for (double y = -10; y <= 10; y += 0.7) {
    const double out = pointset_posterior_mean(tri, {scalar(y), 0.8})(0);
    CHECK(out >= -2.0);
    CHECK(out <= 3.0);
  }
}

TEST_CASE("denoisers are pure (bit-identical repeats)") {
  const auto ring = make_ring_gmm(8, 2.0, 0.15);
  const GmmDenoiser den(ring);
  Vector y(2);
  y << 0.123, -0.456;
  const Vector a = den.denoise({y, 0.7, 0.3});
  const Vector b = den.denoise({y, 0.7, 0.3});
  CHECK(a(0) == b(0));
  CHECK(a(1) == b(1));
}

TEST_CASE("snr_to_sigma") {
  CHECK(snr_to_sigma(4.0) == doctest::Approx(0.5));
  CHECK(snr_to_sigma(1.0) == doctest::Approx(1.0));
  CHECK(std::isinf(snr_to_sigma(0.0)));
  CHECK_THROWS_AS(snr_to_sigma(-1.0), ConfigError);
}

TEST_CASE("snr_to_model_time conventions") {
  CHECK(snr_to_model_time(1.0, TimeConvention::FlowMatching) == doctest::Approx(0.5));
  CHECK(snr_to_model_time(4.0, TimeConvention::EdmSigma) == doctest::Approx(0.5));
  CHECK(snr_to_model_time(kInf, TimeConvention::FlowMatching) == doctest::Approx(1.0));
  // sqrt(gamma)/(1+sqrt(gamma)) solves t'/(1-t') = sqrt(gamma)
  for (double g : {0.25, 1.0, 9.0}) {
    const double tp = snr_to_model_time(g, TimeConvention::FlowMatching);
    CHECK(tp / (1.0 - tp) == doctest::Approx(std::sqrt(g)));
  }

  VpCurve lin;
  for (double g : {0.01, 1.0, 50.0}) {
    const double tp = snr_to_model_time(g, TimeConvention::Vp, &lin);
    CHECK(lin.snr(tp) == doctest::Approx(g).epsilon(1e-6));
  }
  VpCurve cos{VpCurve::Kind::Cosine};
  const double tp = snr_to_model_time(1.0, TimeConvention::Vp, &cos);
  CHECK(cos.snr(tp) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(snr_to_model_time(1.0, TimeConvention::Vp, nullptr), ConfigError);
}

TEST_CASE("mixture and dataset validation") {
  GaussianMixture bad;
  bad.weights = {0.5, 0.6};
  bad.means = Matrix::Zero(2, 1);
  bad.variances = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad.weights = {0.5, 0.5};
  bad.variances(1, 0) = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  PointDataset empty;
  empty.points.resize(0, 2);
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("checkerboard pointset lands on the dark squares") {
  const auto d = make_checkerboard_pointset(512, 9);
  CHECK(d.size() == 512);
  for (int i = 0; i < d.size(); ++i) {
    const int cx = static_cast<int>(std::floor(d.points(i, 0) + 2.0));
    const int cy = static_cast<int>(std::floor(d.points(i, 1) + 2.0));
    CHECK((cx + cy) % 2 == 0);
  }
  // deterministic in the seed
  const auto d2 = make_checkerboard_pointset(512, 9);
  CHECK((d.points - d2.points).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gmm sampling matches its moments") {
  const auto g = two_modes_1d(-1.0, 2.0, 0.2, 0.4, 0.3);
  rng::Stream stream(31, rng::StreamId::Data, 0);
  const int n = 200000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += g.sample(stream)(0);
  mean /= n;
  CHECK(mean == doctest::Approx(0.3 * -1.0 + 0.7 * 2.0).epsilon(0.02));
}
