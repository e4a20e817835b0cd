#include "tada_app/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tada/analysis.hpp"
#include "tada/dynamics.hpp"
#include "tada/metrics.hpp"
#include "tada_app/checks.hpp"
#include "tada_app/io.hpp"

namespace tada::app {

namespace {

void write_run_meta(const std::string& path, const ExperimentConfig& config,
                    const sampler::SampleResult& result, const std::string& mode) {
  nlohmann::json meta;
  meta["mode"] = mode;
  meta["config"] = config.resolved_json();
  meta["nfe_per_sample"] = result.nfe_per_sample;
  meta["denoiser_calls"] = result.denoiser_calls;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << meta.dump(2) << '\n';
}

double metric_value(const std::string& name, const ExperimentConfig& config,
                    const Matrix& samples, const Matrix& truth) {
  metrics::SampleBatch got{samples, "generated"};
  metrics::SampleBatch want{truth, "ground-truth"};
  if (name == "sliced_w2") {
    return metrics::sliced_wasserstein2(got, want, config.metrics.projections,
                                        config.sampler.seed);
  }
  if (name == "energy") return metrics::energy_distance(got, want);
  throw ConfigError("unknown metric '" + name + "'");
}

}  // namespace

int cmd_verify(const std::string& filter, const std::string& out_dir) {
  const auto results = run_checks(filter);
  if (results.empty()) {
    std::fprintf(stderr, "verify: no check matches filter '%s'\n", filter.c_str());
    return 2;
  }
  ensure_directory(out_dir);
  CsvWriter csv(out_dir + "/verify_report.csv",
                {"name", "tolerance", "observed", "pass"});
  bool all_pass = true;
  for (const auto& r : results) {
    csv.field(r.name);
    csv.field(r.tolerance);
    csv.field(r.observed);
    csv.field(std::string(r.pass ? "1" : "0"));
    csv.end_row();
    std::printf("%-42s observed %-12.3e tol %-9.1e %s\n", r.name.c_str(),
                r.observed, r.tolerance, r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  std::printf("verify: %zu checks, %s\n", results.size(),
              all_pass ? "all passed" : "FAILURES PRESENT");
  return all_pass ? 0 : 1;
}

sampler::SampleResult run_tada(const ExperimentConfig& config) {
  const auto dataset = build_dataset(config.dataset, config.sampler.seed);
  sampler::SamplerRun run;
  run.config = config.augmented_config();
  run.schedule = config.schedule();
  run.order = config.sampler.order;
  run.seed = config.sampler.seed;
  run.batch = config.sampler.batch;
  return sampler::tada_sample(*dataset.denoiser, run, dataset.dim);
}

int cmd_sample(const ExperimentConfig& config) {
  const auto dataset = build_dataset(config.dataset, config.sampler.seed);
  sampler::SamplerRun run;
  run.config = config.augmented_config();
  run.schedule = config.schedule();
  run.order = config.sampler.order;
  run.seed = config.sampler.seed;
  run.batch = config.sampler.batch;

  ensure_directory(config.output.dir);
  std::unique_ptr<CsvWriter> traj;
  sampler::TrajectoryObserver observer = nullptr;
  if (config.output.trajectories) {
    std::vector<std::string> header{"sample_id", "t"};
    for (int c = 0; c < dataset.dim; ++c) header.push_back("y_" + std::to_string(c));
    for (int c = 0; c < dataset.dim; ++c) {
      header.push_back("xhat_" + std::to_string(c));
    }
    traj = std::make_unique<CsvWriter>(config.output.dir + "/trajectory.csv", header);
    observer = [&traj](int sample, double t, const Vector& y, const Vector& xhat) {
      traj->field(static_cast<long long>(sample));
      traj->field(t);
      for (Eigen::Index i = 0; i < y.size(); ++i) traj->field(y(i));
      for (Eigen::Index i = 0; i < xhat.size(); ++i) traj->field(xhat(i));
      traj->end_row();
    };
  }

  const auto result = sampler::tada_sample(*dataset.denoiser, run, dataset.dim,
                                           observer);
  write_samples_csv(config.output.dir + "/samples.csv", result.samples);
  write_run_meta(config.output.dir + "/run_meta.json", config, result, "tada");
  if (config.output.plot) {
    write_scatter_ppm(config.output.dir + "/samples.ppm", result.samples);
  }
  std::printf("sample: wrote %d samples (nfe per sample %d) to %s\n",
              config.sampler.batch, result.nfe_per_sample,
              config.output.dir.c_str());
  return 0;
}

int cmd_fm_baseline(const ExperimentConfig& config) {
  if (config.sampler.n_vars != 1) {
    throw ConfigError("fm-baseline: requires sampler.n_vars = 1");
  }
  const auto dataset = build_dataset(config.dataset, config.sampler.seed);
  const auto augmented = config.augmented_config();
  const double sigma0 = std::sqrt(augmented.sigma0(0, 0));
  const auto result = sampler::fm_baseline_sample(
      *dataset.denoiser, config.schedule(), config.sampler.order, dataset.dim,
      config.sampler.seed, config.sampler.batch, sigma0);

  ensure_directory(config.output.dir);
  write_samples_csv(config.output.dir + "/samples.csv", result.samples);
  write_run_meta(config.output.dir + "/run_meta.json", config, result,
                 "fm-baseline");
  if (config.output.plot) {
    write_scatter_ppm(config.output.dir + "/samples.ppm", result.samples);
  }
  std::printf("fm-baseline: wrote %d samples (nfe per sample %d) to %s\n",
              config.sampler.batch, result.nfe_per_sample,
              config.output.dir.c_str());
  return 0;
}

std::vector<MetricRow> nfe_sweep_rows(const ExperimentConfig& config,
                                      const std::vector<int>& nfe_list,
                                      std::vector<Matrix>* per_nfe_samples) {
  const auto dataset = build_dataset(config.dataset, config.sampler.seed);
  const Matrix truth =
      dataset.ground_truth(4 * config.sampler.batch, config.sampler.seed);

  std::vector<MetricRow> rows;
  for (int nfe : nfe_list) {
    if (nfe - 1 < config.sampler.order) {
      throw ConfigError("sweep-nfe: NFE " + std::to_string(nfe) +
                        " is below solver order + 1");
    }
    ExperimentConfig point = config;
    point.sampler.steps = nfe - 1;
    const auto result = run_tada(point);
    if (result.nfe_per_sample != nfe) {
      throw NumericError("sweep-nfe: NFE accounting mismatch");
    }
    for (const auto& name : config.metrics.names) {
      rows.push_back({nfe, name, metric_value(name, config, result.samples, truth)});
    }
    if (per_nfe_samples) per_nfe_samples->push_back(result.samples);
  }
  return rows;
}

int cmd_sweep_nfe(const ExperimentConfig& config, const std::vector<int>& nfe_list) {
  if (nfe_list.empty()) throw ConfigError("sweep-nfe: empty NFE list");
  ensure_directory(config.output.dir);
  std::vector<Matrix> per_nfe;
  const auto rows = nfe_sweep_rows(config, nfe_list, &per_nfe);

  CsvWriter csv(config.output.dir + "/metrics.csv", {"nfe", "metric", "value"});
  for (const auto& row : rows) {
    csv.field(static_cast<long long>(row.nfe));
    csv.field(row.metric);
    csv.field(row.value);
    csv.end_row();
    std::printf("nfe %-4d %-10s %.6f\n", row.nfe, row.metric.c_str(), row.value);
  }
  for (std::size_t i = 0; i < nfe_list.size(); ++i) {
    write_samples_csv(config.output.dir + "/samples_nfe" +
                          std::to_string(nfe_list[i]) + ".csv",
                      per_nfe[i]);
  }
  return 0;
}

std::vector<double> k_sweep_spreads(const ExperimentConfig& config,
                                    const std::vector<double>& k_list,
                                    std::vector<Matrix>* per_k_samples) {
  if (config.sampler.n_vars < 2) {
    throw ConfigError("sweep-k: requires n_vars >= 2");
  }
  if (config.sampler.sigma0_override) {
    throw ConfigError("sweep-k: the shared-noise construction needs the "
                      "diagonal default prior (no sigma0 override)");
  }
  for (double k : k_list) {
    if (!(k > 0.0)) throw ConfigError("sweep-k: k must be positive");
  }
  const auto dataset = build_dataset(config.dataset, config.sampler.seed);
  const int n = config.sampler.n_vars;
  const int runs = config.sampler.batch;

  // The y0-defining noise (last prior component under the diagonal prior)
  // is one shared draw; the remaining components are per-run.
  rng::Stream shared(config.sampler.seed, rng::StreamId::SharedNoise, 0);
  const Vector y0_noise = shared.normal_vector(dataset.dim);

  std::vector<metrics::SampleBatch> groups;
  for (double k : k_list) {
    ExperimentConfig point = config;
    point.sampler.k_scale = k;
    sampler::SamplerRun run;
    run.config = point.augmented_config();
    run.schedule = point.schedule();
    run.order = point.sampler.order;
    run.seed = point.sampler.seed;
    run.batch = runs;

    std::vector<Matrix> noise(runs);
    for (int j = 0; j < runs; ++j) {
      rng::Stream rest(point.sampler.seed, rng::StreamId::Prior,
                       static_cast<std::uint64_t>(j));
      Matrix eps(n, dataset.dim);
      for (int row = 0; row + 1 < n; ++row) {
        eps.row(row) = rest.normal_vector(dataset.dim).transpose();
      }
      eps.row(n - 1) = y0_noise.transpose();
      noise[j] = std::move(eps);
    }
    const auto result =
        sampler::tada_sample_with_noise(*dataset.denoiser, run, dataset.dim, noise);
    groups.push_back({result.samples, "k=" + format_double(k)});
    if (per_k_samples) per_k_samples->push_back(result.samples);
  }
  return metrics::diversity_spread(groups);
}

int cmd_sweep_k(const ExperimentConfig& config, const std::vector<double>& k_list) {
  if (k_list.empty()) throw ConfigError("sweep-k: empty k list");
  ensure_directory(config.output.dir);
  std::vector<Matrix> per_k;
  const auto spreads = k_sweep_spreads(config, k_list, &per_k);

  CsvWriter csv(config.output.dir + "/spreads.csv", {"k", "spread"});
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    csv.field(k_list[i]);
    csv.field(spreads[i]);
    csv.end_row();
    std::printf("k %-8g spread %.6f\n", k_list[i], spreads[i]);
    const std::string tag = format_double(k_list[i]);
    write_samples_csv(config.output.dir + "/samples_k" + tag + ".csv", per_k[i]);
    if (config.output.plot) {
      write_scatter_ppm(config.output.dir + "/samples_k" + tag + ".ppm", per_k[i]);
    }
  }
  return 0;
}

int cmd_dump_coeffs(int n_vars, double k_scale, double t_start, double t_end,
                    int grid_steps, double delta, const std::string& out_dir) {
  const auto config = AugmentedConfig::make(n_vars, k_scale, delta);
  if (t_start < 0.0 || t_end > config.t_final() || !(t_start < t_end)) {
    throw ConfigError("dump-coeffs: grid must lie inside [0, 1 - delta]");
  }
  if (grid_steps < 1) throw ConfigError("dump-coeffs: grid_steps must be positive");

  ensure_directory(out_dir);
  std::vector<std::string> header{"t"};
  for (int i = 0; i < n_vars; ++i) header.push_back("mu_" + std::to_string(i));
  for (int i = 0; i < n_vars; ++i) {
    for (int j = 0; j < n_vars; ++j) {
      header.push_back("sigma_" + std::to_string(i) + std::to_string(j));
    }
  }
  for (int i = 0; i < n_vars; ++i) header.push_back("r_" + std::to_string(i));
  header.insert(header.end(), {"gamma", "gamma_dot", "alpha", "beta"});
  for (int i = 0; i < n_vars; ++i) header.push_back("w_" + std::to_string(i));

  CsvWriter csv(out_dir + "/coeffs.csv", header);
  const double nan = std::nan("");
  for (int s = 0; s <= grid_steps; ++s) {
    const double t = t_start + (t_end - t_start) * s / grid_steps;
    const auto bundle = dynamics::coefficients_at(config, t);
    csv.field(t);
    for (int i = 0; i < n_vars; ++i) csv.field(bundle.mu(i));
    for (int i = 0; i < n_vars; ++i) {
      for (int j = 0; j < n_vars; ++j) csv.field(bundle.sigma(i, j));
    }
    for (int i = 0; i < n_vars; ++i) csv.field(bundle.r(i));
    csv.field(bundle.gamma);
    if (t > 0.0) {
      const auto coeff = analysis::y_dyn_coefficients(config, t);
      csv.field(analysis::gamma_dot(config, t));
      csv.field(coeff.alpha);
      csv.field(coeff.beta);
      for (int i = 0; i < n_vars; ++i) csv.field(coeff.w(i));
    } else {
      // gamma = 0 at t = 0: the y-dynamics coefficients are undefined there
      csv.field(nan);
      csv.field(nan);
      csv.field(nan);
      for (int i = 0; i < n_vars; ++i) csv.field(nan);
    }
    csv.end_row();
  }
  std::printf("dump-coeffs: wrote %d rows to %s/coeffs.csv\n", grid_steps + 1,
              out_dir.c_str());
  return 0;
}

}  // namespace tada::app
