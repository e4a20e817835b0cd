#include "tada/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tada/rng.hpp"

namespace tada::metrics {

namespace {

constexpr int kEnergyCap = 4096;

void check_pair(const SampleBatch& a, const SampleBatch& b) {
  if (a.size() == 0 || b.size() == 0) throw ConfigError("metrics: empty batch");
  if (a.dim() != b.dim()) throw ConfigError("metrics: dimension mismatch");
}

// Exact squared W2 between two 1-D empirical distributions: integrate the
// squared difference of the (step) quantile functions over the merged
// breakpoint grid {i/n} united {j/m}.
double w2_squared_1d(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  std::size_t i = 0, j = 0;
  double u = 0.0, acc = 0.0;
  while (i < n && j < m) {
    const double ua = static_cast<double>(i + 1) / n;
    const double ub = static_cast<double>(j + 1) / m;
    const double next = std::min(ua, ub);
    const double diff = a[i] - b[j];
    acc += diff * diff * (next - u);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return acc;
}

Matrix strided_subsample(const Matrix& samples, int cap) {
  const int n = static_cast<int>(samples.rows());
  if (n <= cap) return samples;
  Matrix out(cap, samples.cols());
  for (int i = 0; i < cap; ++i) {
    out.row(i) = samples.row(static_cast<int>(static_cast<long long>(i) * n / cap));
  }
  return out;
}

double mean_cross_distance(const Matrix& x, const Matrix& y) {
  double acc = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < y.rows(); ++j) {
      acc += (x.row(i) - y.row(j)).norm();
    }
  }
  return acc / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

}  // namespace

double sliced_wasserstein2(const SampleBatch& a, const SampleBatch& b,
                           int projections, std::uint64_t seed) {
  check_pair(a, b);
  if (projections < 1) throw ConfigError("sliced_wasserstein2: projections >= 1");
  const int d = a.dim();

  double acc = 0.0;
  for (int p = 0; p < projections; ++p) {
    rng::Stream stream(seed, rng::StreamId::Metric, static_cast<std::uint64_t>(p));
    Vector dir = stream.normal_vector(d);
    while (dir.norm() < 1e-12) dir = stream.normal_vector(d);
    dir /= dir.norm();

    std::vector<double> av(a.size()), bv(b.size());
    for (int i = 0; i < a.size(); ++i) av[i] = a.samples.row(i).dot(dir);
    for (int i = 0; i < b.size(); ++i) bv[i] = b.samples.row(i).dot(dir);
    acc += w2_squared_1d(std::move(av), std::move(bv));
  }
  return std::sqrt(acc / projections);
}

double energy_distance(const SampleBatch& a, const SampleBatch& b) {
  check_pair(a, b);
  const Matrix x = strided_subsample(a.samples, kEnergyCap);
  const Matrix y = strided_subsample(b.samples, kEnergyCap);
  return 2.0 * mean_cross_distance(x, y) - mean_cross_distance(x, x) -
         mean_cross_distance(y, y);
}

std::vector<double> diversity_spread(const std::vector<SampleBatch>& groups) {
  std::vector<double> spreads;
  spreads.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.size() < 2) {
      throw ConfigError("diversity_spread: group '" + g.label +
                        "' needs at least 2 samples");
    }
    double acc = 0.0;
    long long pairs = 0;
    for (int i = 0; i < g.size(); ++i) {
      for (int j = i + 1; j < g.size(); ++j) {
        acc += (g.samples.row(i) - g.samples.row(j)).norm();
        ++pairs;
      }
    }
    spreads.push_back(acc / static_cast<double>(pairs));
  }
  return spreads;
}

}  // namespace tada::metrics
