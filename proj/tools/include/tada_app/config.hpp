#ifndef TADA_APP_CONFIG_HPP
#define TADA_APP_CONFIG_HPP

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tada/denoiser.hpp"
#include "tada/sampler.hpp"
#include "tada/types.hpp"

// Experiment configuration: a single JSON file with strict key checking
// (any unknown key is an error, so the file cannot silently drift from the
// behavior). See README for the schema.

namespace tada::app {

struct DatasetSpec {
  std::string type;  // gmm | pointset | ring | checkerboard-pointset
  // ring
  int modes = 8;
  double radius = 2.0;
  double component_std = 0.15;
  // gmm
  std::vector<double> weights;
  Matrix means;
  Matrix variances;
  // pointset
  Matrix points;
  // checkerboard-pointset
  int n_points = 4096;
};

struct SamplerSpec {
  int n_vars = 2;
  double k_scale = 1.0;
  std::optional<Matrix> sigma0_override;
  int order = 3;
  std::string scheme = "polynomial-t";
  double p = 2.0;
  double t_floor = 1e-3;
  int steps = 15;
  double delta = 1e-3;
  std::uint64_t seed = 0;
  int batch = 1;
};

struct MetricsSpec {
  std::vector<std::string> names = {"sliced_w2", "energy"};
  int projections = 128;
};

struct OutputSpec {
  std::string dir = "out";
  bool trajectories = false;
  bool plot = false;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  SamplerSpec sampler;
  MetricsSpec metrics;
  OutputSpec output;

  AugmentedConfig augmented_config() const;
  sampler::Schedule schedule() const;
  nlohmann::json resolved_json() const;
};

/// Parse and validate; throws ConfigError on unknown keys or bad values.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// The dataset as a denoiser plus a ground-truth sampler.
struct Dataset {
  std::unique_ptr<denoise::Denoiser> denoiser;
  int dim = 0;
  // Ground-truth draws for metric baselines.
  Matrix ground_truth(int n, std::uint64_t seed) const;

  // exactly one of these is set
  std::optional<denoise::GaussianMixture> gmm;
  std::optional<denoise::PointDataset> pointset;
};

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace tada::app

#endif  // TADA_APP_CONFIG_HPP
