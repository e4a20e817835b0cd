#ifndef TADA_DENOISER_HPP
#define TADA_DENOISER_HPP

#include <memory>
#include <vector>

#include "tada/rng.hpp"
#include "tada/types.hpp"

// Data-prediction denoisers. The sampler only ever sees the contract
// (y, sigma_bar) -> x_hat; at desk scale we use analytic posterior means
// under simple priors instead of a pretrained network. Conditioning is on
// the effective noise level sigma_bar = 1/sqrt(gamma), never on schedule
// time, which is exact for these denoisers.

namespace tada::denoise {

struct DenoiseQuery {
  Vector y;          // reweighted network input
  double sigma_bar;  // effective noise std; +inf means "pure prior"
  double t = 0.0;    // schedule time, informational
};

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Vector denoise(const DenoiseQuery& q) const = 0;
  virtual int dim() const = 0;
};

/// Axis-aligned Gaussian mixture prior.
struct GaussianMixture {
  std::vector<double> weights;   // positive, sum to 1
  Matrix means;                  // K x d
  Matrix variances;              // K x d, positive

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
  void validate() const;

  Vector mixture_mean() const;
  /// Ground-truth draw (component by weight, then per-axis normal).
  Vector sample(rng::Stream& stream) const;
};

/// Empirical distribution on a finite point set.
struct PointDataset {
  Matrix points;  // n x d, nonempty

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;

  Vector sample(rng::Stream& stream) const;
};

/// Exact posterior mean E[x1 | y = x1 + sigma_bar * eps] under the mixture
/// prior. Log-sum-exp stabilized responsibilities; sigma_bar = +inf returns
/// the mixture mean, sigma_bar = 0 returns y.
Vector gmm_posterior_mean(const GaussianMixture& gmm, const DenoiseQuery& q);

/// Softmax(-|y - p_i|^2 / (2 sigma_bar^2))-weighted average of the points.
Vector pointset_posterior_mean(const PointDataset& data, const DenoiseQuery& q);

class GmmDenoiser final : public Denoiser {
 public:
  explicit GmmDenoiser(GaussianMixture gmm);
  Vector denoise(const DenoiseQuery& q) const override;
  int dim() const override { return gmm_.dim(); }
  const GaussianMixture& mixture() const { return gmm_; }

 private:
  GaussianMixture gmm_;
};

class PointsetDenoiser final : public Denoiser {
 public:
  explicit PointsetDenoiser(PointDataset data);
  Vector denoise(const DenoiseQuery& q) const override;
  int dim() const override { return data_.dim(); }
  const PointDataset& dataset() const { return data_; }

 private:
  PointDataset data_;
};

/// sigma_bar = 1/sqrt(gamma); +inf at gamma = 0. Rejects negative gamma.
double snr_to_sigma(double gamma);

enum class TimeConvention { FlowMatching, Vp, EdmSigma };

/// Variance-preserving noise curve, needed only for the Vp convention.
/// SNR(t') = alpha_bar(t') / (1 - alpha_bar(t')) with t' in (0, 1] running
/// from clean data to noise.
struct VpCurve {
  enum class Kind { Linear, Cosine };
  Kind kind = Kind::Linear;
  double beta_min = 0.1;  // linear curve only
  double beta_max = 20.0;

  double snr(double t_prime) const;
};

/// Conditioning scalar a pretrained model of the given convention expects.
/// FlowMatching: t' = sqrt(gamma) / (1 + sqrt(gamma)). EdmSigma: 1/sqrt(gamma).
/// Vp: inverts SNR(t') = gamma on the supplied curve (required, no default).
double snr_to_model_time(double gamma, TimeConvention convention,
                         const VpCurve* curve = nullptr);

// Toy dataset builders shared by the CLI and the experiments.

/// Equal-weight modes on a circle, isotropic per-mode std.
GaussianMixture make_ring_gmm(int modes, double radius, double component_std);

/// n points filling the dark squares of a 4x4 checkerboard on [-2, 2]^2.
PointDataset make_checkerboard_pointset(int n, std::uint64_t seed);

}  // namespace tada::denoise

#endif  // TADA_DENOISER_HPP
