#ifndef TADA_METRICS_HPP
#define TADA_METRICS_HPP

#include <string>
#include <vector>

#include "tada/types.hpp"

// Distribution-distance and diversity metrics for desk-scale evaluation.

namespace tada::metrics {

struct SampleBatch {
  Matrix samples;  // n x d, nonempty
  std::string label;

  int size() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

/// Mean over random unit projections of the squared 1-D Wasserstein-2
/// distance between the projected empirical distributions, square-rooted.
/// The 1-D distance is exact (merged quantile functions), so unequal batch
/// sizes are handled without resampling.
double sliced_wasserstein2(const SampleBatch& a, const SampleBatch& b,
                           int projections, std::uint64_t seed);

/// 2 E|X-Y| - E|X-X'| - E|Y-Y'| >= 0 as the V-statistic, with each batch
/// capped at 4096 points by strided subsampling.
double energy_distance(const SampleBatch& a, const SampleBatch& b);

/// Per-group mean pairwise Euclidean distance. Groups need >= 2 samples.
std::vector<double> diversity_spread(const std::vector<SampleBatch>& groups);

}  // namespace tada::metrics

#endif  // TADA_METRICS_HPP
