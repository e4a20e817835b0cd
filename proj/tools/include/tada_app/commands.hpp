#ifndef TADA_APP_COMMANDS_HPP
#define TADA_APP_COMMANDS_HPP

#include <string>
#include <vector>

#include "tada_app/config.hpp"

// Command implementations behind the CLI. Each may throw ConfigError
// (mapped to exit 2 by main) or NumericError (exit 1). Return values are
// exit codes for conditions that are not errors in the C++ sense.

namespace tada::app {

int cmd_verify(const std::string& filter, const std::string& out_dir);
int cmd_sample(const ExperimentConfig& config);
int cmd_fm_baseline(const ExperimentConfig& config);
int cmd_sweep_nfe(const ExperimentConfig& config, const std::vector<int>& nfe_list);
int cmd_sweep_k(const ExperimentConfig& config, const std::vector<double>& k_list);
int cmd_dump_coeffs(int n_vars, double k_scale, double t_start, double t_end,
                    int grid_steps, double delta, const std::string& out_dir);

// Reusable experiment cores (the sweeps and the acceptance suite share them).

/// Generated samples for the configured run.
sampler::SampleResult run_tada(const ExperimentConfig& config);

struct MetricRow {
  int nfe = 0;
  std::string metric;
  double value = 0.0;
};

/// One full NFE sweep against freshly drawn ground truth.
std::vector<MetricRow> nfe_sweep_rows(const ExperimentConfig& config,
                                      const std::vector<int>& nfe_list,
                                      std::vector<Matrix>* per_nfe_samples = nullptr);

/// Diversity spreads for a k sweep with the y0-defining noise held fixed
/// (one shared draw for the last variable across every run and every k).
std::vector<double> k_sweep_spreads(const ExperimentConfig& config,
                                    const std::vector<double>& k_list,
                                    std::vector<Matrix>* per_k_samples = nullptr);

}  // namespace tada::app

#endif  // TADA_APP_COMMANDS_HPP
