#include "tada/denoiser.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace tada::denoise {

namespace {

constexpr double kInf = std::numeric_limits<double >::infinity();

void check_query(const DenoiseQuery& q, int dim) {
  if (q.y.size() != dim) {
    throw ConfigError("denoise: query dimension mismatch");
  }
}

}  // namespace

void GaussianMixture::validate() const {
  const int k = components();
  if (k == 0) throw ConfigError("GaussianMixture: no components");
  if (means.rows() != k || variances.rows() != k || variances.cols() != means.cols()) {
    throw ConfigError("GaussianMixture: inconsistent shapes");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("GaussianMixture: weights must be positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConfigError("GaussianMixture: weights must sum to 1");
  }
  if (!(variances.array() > 0.0).all()) {
    throw ConfigError("GaussianMixture: variances must be positive");
  }
}

Vector GaussianMixture::mixture_mean() const {
  Vector m = Vector::Zero(dim());
  for (int j = 0; j < components(); ++j) m += weights[j] * means.row(j).transpose();
  return m;
}

Vector GaussianMixture::sample(rng::Stream& stream) const {
  const double u = stream.next_uniform();
  double acc = 0.0;
  int pick = components() - 1;
  for (int j = 0; j < components(); ++j) {
    acc += weights[j];
    if (u <= acc) {
      pick = j;
      break;
    }
  }
  Vector x = means.row(pick).transpose();
  for (int i = 0; i < dim(); ++i) {
    x(i) += std::sqrt(variances(pick, i)) * stream.next_normal();
  }
  return x;
}

void PointDataset::validate() const {
  if (points.rows() == 0) throw ConfigError("PointDataset: empty");
  if (!points.allFinite()) throw ConfigError("PointDataset: non-finite entries");
}

Vector PointDataset::sample(rng::Stream& stream) const {
  const auto i = static_cast<Eigen::Index>(stream.next_u64() % static_cast<std::uint64_t>(size()));
  return points.row(i).transpose();
}

Vector gmm_posterior_mean(const GaussianMixture& gmm, const DenoiseQuery& q) {
  check_query(q, gmm.dim());
  if (std::isinf(q.sigma_bar)) return gmm.mixture_mean();
  if (q.sigma_bar == 0.0) return q.y;
  if (!(q.sigma_bar > 0.0)) throw ConfigError("gmm_posterior_mean: bad sigma_bar");

  const int k = gmm.components();
  const int d = gmm.dim();
  const double s2 = q.sigma_bar * q.sigma_bar;

  // log responsibilities under y | comp ~ N(mean, var + s2) per axis
  Vector logp(k);
  for (int j = 0; j < k; ++j) {
    double lp = std::log(gmm.weights[j]);
    for (int i = 0; i < d; ++i) {
      const double tot = gmm.variances(j, i) + s2;
      const double dx = q.y(i) - gmm.means(j, i);
      lp -= 0.5 * (dx * dx / tot + std::log(tot));
    }
    logp(j) = lp;
  }
  const double lmax = logp.maxCoeff();
  Vector resp = (logp.array() - lmax).exp();
  resp /= resp.sum();

  Vector out = Vector::Zero(d);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < d; ++i) {
      const double tot = gmm.variances(j, i) + s2;
      out(i) += resp(j) * (gmm.variances(j, i) * q.y(i) + s2 * gmm.means(j, i)) / tot;
    }
  }
  return out;
}

Vector pointset_posterior_mean(const PointDataset& data, const DenoiseQuery& q) {
  check_query(q, data.dim());
  if (std::isinf(q.sigma_bar)) {
    return data.points.colwise().mean().transpose();
  }
  if (!(q.sigma_bar > 0.0)) throw ConfigError("pointset_posterior_mean: bad sigma_bar");

  const double inv2s2 = 0.5 / (q.sigma_bar * q.sigma_bar);
  Vector logw(data.size());
  for (int i = 0; i < data.size(); ++i) {
    logw(i) = -(q.y - data.points.row(i).transpose()).squaredNorm() * inv2s2;
  }
  const double lmax = logw.maxCoeff();
  Vector w = (logw.array() - lmax).exp();
  w /= w.sum();
  return data.points.transpose() * w;
}

GmmDenoiser::GmmDenoiser(GaussianMixture gmm) : gmm_(std::move(gmm)) {
  gmm_.validate();
}

Vector GmmDenoiser::denoise(const DenoiseQuery& q) const {
  return gmm_posterior_mean(gmm_, q);
}

PointsetDenoiser::PointsetDenoiser(PointDataset data) : data_(std::move(data)) {
  data_.validate();
}

Vector PointsetDenoiser::denoise(const DenoiseQuery& q) const {
  return pointset_posterior_mean(data_, q);
}

double snr_to_sigma(double gamma) {
  if (gamma < 0.0) throw ConfigError("snr_to_sigma: negative gamma");
  if (gamma == 0.0) return kInf;
  return 1.0 / std::sqrt(gamma);
}

double VpCurve::snr(double t_prime) const {
  double alpha_bar;
  if (kind == Kind::Cosine) {
    const double c = std::cos(0.5 * M_PI * t_prime);
    alpha_bar = c * c;
  } else {
    const double integral =
        beta_min * t_prime + 0.5 * (beta_max - beta_min) * t_prime * t_prime;
    alpha_bar = std::exp(-integral);
  }
  if (alpha_bar >= 1.0) return kInf;
  return alpha_bar / (1.0 - alpha_bar);
}

double snr_to_model_time(double gamma, TimeConvention convention,
                         const VpCurve* curve) {
  if (gamma < 0.0) throw ConfigError("snr_to_model_time: negative gamma");
  switch (convention) {
    case TimeConvention::FlowMatching: {
      if (std::isinf(gamma)) return 1.0;
      const double sq = std::sqrt(gamma);
      return sq / (1.0 + sq);
    }
    case TimeConvention::EdmSigma:
      return snr_to_sigma(gamma);
    case TimeConvention::Vp: {
      if (curve == nullptr) {
        throw ConfigError("snr_to_model_time: vp convention requires a noise curve");
      }
      // SNR is decreasing in t'; bisect on (0, 1].
      double lo = 1e-12, hi = 1.0;
      if (gamma >= curve->snr(lo)) return lo;
      if (gamma <= curve->snr(hi)) return hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (curve->snr(mid) > gamma) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      return 0.5 * (lo + hi);
    }
  }
  throw ConfigError("snr_to_model_time: unknown convention");
}

GaussianMixture make_ring_gmm(int modes, double radius, double component_std) {
  if (modes < 1 || !(radius > 0.0) || !(component_std > 0.0)) {
    throw ConfigError("make_ring_gmm: need modes >= 1, radius > 0, std > 0");
  }
  GaussianMixture g;
  g.weights.assign(modes, 1.0 / modes);
  g.means.resize(modes, 2);
  g.variances = Matrix::Constant(modes, 2, component_std * component_std);
  for (int j = 0; j < modes; ++j) {
    const double ang = 2.0 * M_PI * j / modes;
    g.means(j, 0) = radius * std::cos(ang);
    g.means(j, 1) = radius * std::sin(ang);
  }
  g.validate();
  return g;
}

PointDataset make_checkerboard_pointset(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("make_checkerboard_pointset: n >= 1 required");
  PointDataset data;
  data.points.resize(n, 2);
  rng::Stream stream(seed, rng::StreamId::Data, 0);
  int placed = 0;
  while (placed < n) {
    const double x = 4.0 * stream.next_uniform() - 2.0;
    const double y = 4.0 * stream.next_uniform() - 2.0;
    const int cx = static_cast<int>(std::floor(x + 2.0));
    const int cy = static_cast<int>(std::floor(y + 2.0));
    if ((cx + cy) % 2 == 0) {
      data.points(placed, 0) = x;
      data.points(placed, 1) = y;
      ++placed;
    }
  }
  return data;
}

}  // namespace tada::denoise
