#ifndef TADA_SAMPLER_HPP
#define TADA_SAMPLER_HPP

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "tada/denoiser.hpp"
#include "tada/rng.hpp"
#include "tada/types.hpp"

// The sampling loop: exact exponential-integrator steps for the linear part,
// Adams-Bashforth extrapolation of the force term for the nonlinear part.
// Each trajectory is strictly sequential; samples are independent.

namespace tada::sampler {

struct Schedule {
  std::vector<double> times;  // t_0 = 0 < ... < t_T = 1 - delta
  std::string scheme;

  int steps() const { return static_cast<int>(times.size()) - 1; }
  void validate() const;
};

Schedule make_uniform_schedule(int steps, double delta);
/// t_i = (1 - delta) (i / T)^p.
Schedule make_polynomial_schedule(int steps, double p, double delta);
/// log gamma(t_i) uniform between gamma(t_floor) and gamma(1 - delta);
/// t_0 = 0 is pinned and [0, t_floor] is prepended as one plain step.
Schedule make_logsnr_schedule(const AugmentedConfig& config, int steps,
                              double t_floor, double delta);
/// Dispatch on scheme name: "uniform-t", "polynomial-t", "logsnr-uniform".
Schedule make_schedule(const std::string& scheme, int steps, double poly_p,
                       double t_floor, const AugmentedConfig& config,
                       double delta);

/// Ring of the most recent (t_i, F_i) force evaluations, oldest first.
class HistoryCache {
 public:
  explicit HistoryCache(int order);

  void push(double t, Vector force);  // evicts beyond capacity
  int size() const { return static_cast<int>(entries_.size()); }
  int capacity() const { return capacity_; }
  double time(int i) const { return entries_[i].first; }
  const Vector& force(int i) const { return entries_[i].second; }
  void clear() { entries_.clear(); }

 private:
  int capacity_;
  std::deque<std::pair<double, Vector>> entries_;
};

/// Exact integral of Phi(t_to, tau) b P(tau) over [t_from, t_to], where P is
/// the Lagrange polynomial through the cached forces. The integrand rows are
/// (t_to - tau)^(N-1-k) / (N-1-k)! * P(tau) -- a polynomial, integrated with
/// Gauss-Legendre nodes of sufficient degree (exact, not approximate).
/// Returns an N x d matrix.
Matrix psi_integral(const HistoryCache& cache, double t_from, double t_to,
                    int n_vars);

struct SamplerRun {
  AugmentedConfig config;
  Schedule schedule;
  int order = 3;  // 1..3
  std::uint64_t seed = 0;
  int batch = 1;

  void validate() const;
};

/// vars = (L0 (x) I_d) eps with eps drawn from the stream; t = 0.
AugmentedState sample_prior(const AugmentedConfig& config, int d,
                            rng::Stream& stream);
/// Same, from caller-provided standard normal noise (N x d).
AugmentedState prior_from_noise(const AugmentedConfig& config,
                                const Matrix& eps);

/// Called once per denoiser invocation: (sample index, t, y, x_hat).
using TrajectoryObserver =
    std::function<void(int, double, const Vector&, const Vector&)>;

/// One step t -> t_next: project y, denoise, compute the force, extend the
/// cache, then state' = Phi(dt) state + Psi. Throws NumericError naming the
/// failing stage if any intermediate is non-finite.
void tada_step(AugmentedState& state, const denoise::Denoiser& denoiser,
               const CoefficientBundle& bundle, double t_next,
               HistoryCache& cache, double delta_force = 1e-3,
               const TrajectoryObserver& observer = nullptr, int sample_index = 0);

struct SampleResult {
  Matrix samples;  // batch x d
  long long denoiser_calls = 0;
  int nfe_per_sample = 0;  // schedule steps + 1
};

/// Full run: per sample, prior draw + step loop + terminal data prediction.
/// Multistep order ramps 1 -> order over the first steps via the cache.
SampleResult tada_sample(const denoise::Denoiser& denoiser, const SamplerRun& run,
                         int d, const TrajectoryObserver& observer = nullptr);

/// Variant whose prior noise is supplied per sample (batch entries of N x d);
/// used by the k sweep to pin the y0-defining component.
SampleResult tada_sample_with_noise(const denoise::Denoiser& denoiser,
                                    const SamplerRun& run, int d,
                                    const std::vector<Matrix>& noise,
                                    const TrajectoryObserver& observer = nullptr);

/// Independent N = 1 flow-matching baseline: x' = (x_hat - x)/(1 - t) solved
/// with the same Adams-Bashforth extrapolation but closed-form monomial
/// integration. Serves as the equivalence oracle for tada_sample at N = 1.
SampleResult fm_baseline_sample(const denoise::Denoiser& denoiser,
                                const Schedule& schedule, int order, int d,
                                std::uint64_t seed, int batch,
                                double sigma0 = 1.0);

}  // namespace tada::sampler

#endif  // TADA_SAMPLER_HPP
