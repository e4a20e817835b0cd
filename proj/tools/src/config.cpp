#include "tada_app/config.hpp"

#include <fstream>
#include <set>

namespace tada::app {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

Matrix matrix_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ConfigError(where + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json matrix_to(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

DatasetSpec parse_dataset(const json& j) {
  require_keys(j, "dataset",
               {"type", "modes", "radius", "component_std", "weights", "means",
                "variances", "points", "n"});
  DatasetSpec d;
  if (!j.contains("type")) throw ConfigError("dataset: missing 'type'");
  d.type = j.at("type").get<std::string>();
  if (d.type == "ring") {
    d.modes = j.value("modes", d.modes);
    d.radius = j.value("radius", d.radius);
    d.component_std = j.value("component_std", d.component_std);
  } else if (d.type == "gmm") {
    d.weights = j.at("weights").get<std::vector<double>>();
    d.means = matrix_from(j.at("means"), "dataset.means");
    d.variances = matrix_from(j.at("variances"), "dataset.variances");
  } else if (d.type == "pointset") {
    d.points = matrix_from(j.at("points"), "dataset.points");
  } else if (d.type == "checkerboard-pointset") {
    d.n_points = j.value("n", d.n_points);
    if (d.n_points < 1) throw ConfigError("dataset: n must be positive");
  } else {
    throw ConfigError("dataset: unknown type '" + d.type + "'");
  }
  return d;
}

SamplerSpec parse_sampler(const json& j) {
  require_keys(j, "sampler",
               {"n_vars", "k_scale", "sigma0", "order", "scheme", "p", "t_floor",
                "steps", "delta", "seed", "batch"});
  SamplerSpec s;
  s.n_vars = j.value("n_vars", s.n_vars);
  s.k_scale = j.value("k_scale", s.k_scale);
  if (j.contains("sigma0")) {
    s.sigma0_override = matrix_from(j.at("sigma0"), "sampler.sigma0");
  }
  s.order = j.value("order", s.order);
  s.scheme = j.value("scheme", s.scheme);
  s.p = j.value("p", s.p);
  s.t_floor = j.value("t_floor", s.t_floor);
  s.steps = j.value("steps", s.steps);
  s.delta = j.value("delta", s.delta);
  s.seed = j.value("seed", s.seed);
  s.batch = j.value("batch", s.batch);
  return s;
}

MetricsSpec parse_metrics(const json& j) {
  require_keys(j, "metrics", {"names", "projections"});
  MetricsSpec m;
  if (j.contains("names")) m.names = j.at("names").get<std::vector<std::string>>();
  m.projections = j.value("projections", m.projections);
  for (const auto& name : m.names) {
    if (name != "sliced_w2" && name != "energy") {
      throw ConfigError("metrics: unknown metric '" + name + "'");
    }
  }
  if (m.projections < 1) throw ConfigError("metrics: projections must be positive");
  return m;
}

OutputSpec parse_output(const json& j) {
  require_keys(j, "output", {"dir", "trajectories", "plot"});
  OutputSpec o;
  o.dir = j.value("dir", o.dir);
  o.trajectories = j.value("trajectories", o.trajectories);
  o.plot = j.value("plot", o.plot);
  return o;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  require_keys(j, "config", {"dataset", "sampler", "metrics", "output"});
  ExperimentConfig cfg;
  if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
  if (!j.contains("sampler")) throw ConfigError("config: missing 'sampler'");
  cfg.dataset = parse_dataset(j.at("dataset"));
  cfg.sampler = parse_sampler(j.at("sampler"));
  if (j.contains("metrics")) cfg.metrics = parse_metrics(j.at("metrics"));
  if (j.contains("output")) cfg.output = parse_output(j.at("output"));
  cfg.augmented_config();  // validate early
  cfg.schedule();
  if (cfg.sampler.batch < 1) throw ConfigError("sampler: batch must be positive");
  if (cfg.sampler.order < 1 || cfg.sampler.order > 3) {
    throw ConfigError("sampler: order must be 1..3");
  }
  if (cfg.sampler.steps < cfg.sampler.order) {
    throw ConfigError("sampler: steps must be >= order");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_experiment_config(j);
}

AugmentedConfig ExperimentConfig::augmented_config() const {
  AugmentedConfig c;
  if (sampler.sigma0_override) {
    c.n_vars = sampler.n_vars;
    c.k_scale = sampler.k_scale;
    c.t_clamp_delta = sampler.delta;
    c.sigma0 = *sampler.sigma0_override;
    c.validate();
    return c;
  }
  return AugmentedConfig::make(sampler.n_vars, sampler.k_scale, sampler.delta);
}

sampler::Schedule ExperimentConfig::schedule() const {
  return sampler::make_schedule(sampler.scheme, sampler.steps, sampler.p,
                                sampler.t_floor, augmented_config(), sampler.delta);
}

nlohmann::json ExperimentConfig::resolved_json() const {
  json d;
  d["type"] = dataset.type;
  if (dataset.type == "ring") {
    d["modes"] = dataset.modes;
    d["radius"] = dataset.radius;
    d["component_std"] = dataset.component_std;
  } else if (dataset.type == "gmm") {
    d["weights"] = dataset.weights;
    d["means"] = matrix_to(dataset.means);
    d["variances"] = matrix_to(dataset.variances);
  } else if (dataset.type == "pointset") {
    d["points"] = matrix_to(dataset.points);
  } else {
    d["n"] = dataset.n_points;
  }
  json s;
  s["n_vars"] = sampler.n_vars;
  s["k_scale"] = sampler.k_scale;
  if (sampler.sigma0_override) s["sigma0"] = matrix_to(*sampler.sigma0_override);
  s["order"] = sampler.order;
  s["scheme"] = sampler.scheme;
  s["p"] = sampler.p;
  s["t_floor"] = sampler.t_floor;
  s["steps"] = sampler.steps;
  s["delta"] = sampler.delta;
  s["seed"] = sampler.seed;
  s["batch"] = sampler.batch;
  json m;
  m["names"] = metrics.names;
  m["projections"] = metrics.projections;
  json o;
  o["dir"] = output.dir;
  o["trajectories"] = output.trajectories;
  o["plot"] = output.plot;
  return json{{"dataset", d}, {"sampler", s}, {"metrics", m}, {"output", o}};
}

Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset out;
  if (spec.type == "ring") {
    out.gmm = denoise::make_ring_gmm(spec.modes, spec.radius, spec.component_std);
  } else if (spec.type == "gmm") {
    denoise::GaussianMixture g;
    g.weights = spec.weights;
    g.means = spec.means;
    g.variances = spec.variances;
    g.validate();
    out.gmm = std::move(g);
  } else if (spec.type == "pointset") {
    denoise::PointDataset p;
    p.points = spec.points;
    p.validate();
    out.pointset = std::move(p);
  } else if (spec.type == "checkerboard-pointset") {
    out.pointset = denoise::make_checkerboard_pointset(spec.n_points, seed);
  } else {
    throw ConfigError("dataset: unknown type '" + spec.type + "'");
  }
  if (out.gmm) {
    out.dim = out.gmm->dim();
    out.denoiser = std::make_unique<denoise::GmmDenoiser>(*out.gmm);
  } else {
    out.dim = out.pointset->dim();
    out.denoiser = std::make_unique<denoise::PointsetDenoiser>(*out.pointset);
  }
  return out;
}

Matrix Dataset::ground_truth(int n, std::uint64_t seed) const {
  Matrix m(n, dim);
  rng::Stream stream(seed, rng::StreamId::Data, 1);
  for (int i = 0; i < n; ++i) {
    m.row(i) = (gmm ? gmm->sample(stream) : pointset->sample(stream)).transpose();
  }
  return m;
}

}  // namespace tada::app
