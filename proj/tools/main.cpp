#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "tada/dynamics.hpp"
#include "tada_app/commands.hpp"
#include "tada_app/config.hpp"

// Exit codes: 0 success, 1 runtime/check failure, 2 configuration error.

namespace {

using tada::app::ExperimentConfig;

ExperimentConfig load_with_overrides(const std::string& path,
                                     const std::optional<std::uint64_t>& seed,
                                     const std::optional<std::string>& out_dir) {
  auto config = tada::app::load_experiment_config(path);
  if (seed) config.sampler.seed = *seed;
  if (out_dir) config.output.dir = *out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tada: training-free augmented-dynamics sampling on toy data"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string filter;
  bool inject_fault = false;
  std::vector<int> nfe_list;
  std::vector<double> k_list;
  int n_vars = 2;
  double k_scale = 1.0;
  double t_start = 0.0, t_end = -1.0, delta = 1e-3;
  int grid_steps = 50;

  auto* verify = app.add_subcommand(
      "verify", "run every registered dynamics/analysis check");
  verify->add_option("--filter", filter, "only run checks whose name contains this");
  verify->add_option("--out", out_dir, "report directory (default .)");
  verify->add_flag("--inject-fault", inject_fault,
                   "test hook: perturb the controlled transition by 1e-3 so "
                   "the checks must fail");

  auto* sample = app.add_subcommand("sample", "run the sampler on a config");
  sample->add_option("--config", config_path, "experiment config (JSON)")->required();
  sample->add_option("--seed", seed, "override the config seed");
  sample->add_option("--out", out_dir, "override the output directory");

  auto* fm = app.add_subcommand("fm-baseline",
                                "run the N = 1 flow-matching baseline");
  fm->add_option("--config", config_path, "experiment config (JSON)")->required();
  fm->add_option("--seed", seed, "override the config seed");
  fm->add_option("--out", out_dir, "override the output directory");

  auto* sweep_nfe = app.add_subcommand("sweep-nfe",
                                       "metrics against ground truth per NFE");
  sweep_nfe->add_option("--config", config_path, "experiment config (JSON)")->required();
  sweep_nfe->add_option("--nfe", nfe_list, "NFE budgets")->required()->delimiter(',');
  sweep_nfe->add_option("--seed", seed, "override the config seed");
  sweep_nfe->add_option("--out", out_dir, "override the output directory");

  auto* sweep_k = app.add_subcommand(
      "sweep-k", "diversity spread per prior scale k, fixed y0 noise");
  sweep_k->add_option("--config", config_path, "experiment config (JSON)")->required();
  sweep_k->add_option("--k", k_list, "prior scales")->required()->delimiter(',');
  sweep_k->add_option("--seed", seed, "override the config seed");
  sweep_k->add_option("--out", out_dir, "override the output directory");

  auto* dump = app.add_subcommand("dump-coeffs",
                                  "write the coefficient table over a time grid");
  dump->add_option("--n-vars", n_vars, "number of augmented variables");
  dump->add_option("--k", k_scale, "prior scale of the last variable");
  dump->add_option("--t-start", t_start, "grid start (default 0)");
  dump->add_option("--t-end", t_end, "grid end (default 1 - delta)");
  dump->add_option("--grid-steps", grid_steps, "number of grid intervals");
  dump->add_option("--delta", delta, "terminal clamp");
  dump->add_option("--out", out_dir, "output directory (default .)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      if (inject_fault) tada::dynamics::set_transition_fault_for_testing(1e-3);
      return tada::app::cmd_verify(filter, out_dir.value_or("."));
    }
    if (sample->parsed()) {
      return tada::app::cmd_sample(load_with_overrides(config_path, seed, out_dir));
    }
    if (fm->parsed()) {
      return tada::app::cmd_fm_baseline(
          load_with_overrides(config_path, seed, out_dir));
    }
    if (sweep_nfe->parsed()) {
      return tada::app::cmd_sweep_nfe(
          load_with_overrides(config_path, seed, out_dir), nfe_list);
    }
    if (sweep_k->parsed()) {
      return tada::app::cmd_sweep_k(load_with_overrides(config_path, seed, out_dir),
                                    k_list);
    }
    if (dump->parsed()) {
      const auto cfg = tada::AugmentedConfig::make(n_vars, k_scale, delta);
      if (t_end < 0.0) t_end = cfg.t_final();
      return tada::app::cmd_dump_coeffs(n_vars, k_scale, t_start, t_end, grid_steps,
                                        delta, out_dir.value_or("."));
    }
  } catch (const tada::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
