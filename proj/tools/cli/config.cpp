#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace wdrkf::cli {
namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double get_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": expected a finite number");
  return v;
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(where + ": integer out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t get_u64(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw ConfigError(where + ": expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

Vector get_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = get_double(j[i], where + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix get_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = get_vector(j[i], where + "[" + std::to_string(i) + "]");
    if (cols < 0) {
      cols = row.size();
      if (cols == 0) throw ConfigError(where + ": rows must be nonempty");
      m.resize(rows, cols);
    } else if (row.size() != cols) {
      throw ConfigError(where + ": rows have different lengths");
    }
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

void require_positive(int v, const std::string& where) {
  if (v <= 0) throw ConfigError(where + ": must be positive");
}

ModelSpec parse_model(const json& j) {
  check_keys(j, {"A", "C", "sigma_w", "sigma_v"}, "model");
  for (const char* key : {"A", "C", "sigma_w", "sigma_v"}) {
    if (!j.contains(key)) throw ConfigError(std::string("model: missing '") + key + "'");
  }
  ModelSpec m{get_matrix(j["A"], "model.A"), get_matrix(j["C"], "model.C"),
              get_matrix(j["sigma_w"], "model.sigma_w"), get_matrix(j["sigma_v"], "model.sigma_v")};
  const auto nx = m.a.rows();
  const auto ny = m.c.rows();
  if (m.a.cols() != nx) throw ConfigError("model.A: must be square");
  if (m.c.cols() != nx) throw ConfigError("model.C: column count must match A");
  if (m.sigma_w.rows() != nx || m.sigma_w.cols() != nx) {
    throw ConfigError("model.sigma_w: must be n_x x n_x");
  }
  if (m.sigma_v.rows() != ny || m.sigma_v.cols() != ny) {
    throw ConfigError("model.sigma_v: must be n_y x n_y");
  }
  return m;
}

CertifySpec parse_certify(const json& j) {
  check_keys(j, {"q", "N", "theta_v"}, "certify");
  CertifySpec c;
  if (j.contains("q")) c.q = get_int(j["q"], "certify.q");
  if (j.contains("N") && !j["N"].is_null()) c.n = get_int(j["N"], "certify.N");
  if (j.contains("theta_v")) c.theta_v = get_double(j["theta_v"], "certify.theta_v");
  require_positive(c.q, "certify.q");
  if (c.n) require_positive(*c.n, "certify.N");
  if (c.theta_v < 0.0) throw ConfigError("certify.theta_v: must be >= 0");
  return c;
}

ConvergeSpec parse_converge(const json& j) {
  check_keys(j, {"theta_x", "steps", "threshold"}, "converge");
  ConvergeSpec c;
  if (j.contains("theta_x") && !j["theta_x"].is_null()) {
    c.theta_x = get_double(j["theta_x"], "converge.theta_x");
    if (*c.theta_x < 0.0) throw ConfigError("converge.theta_x: must be >= 0");
  }
  if (j.contains("steps")) c.steps = get_int(j["steps"], "converge.steps");
  if (j.contains("threshold")) c.threshold = get_double(j["threshold"], "converge.threshold");
  require_positive(c.steps, "converge.steps");
  if (!(c.threshold > 0.0)) throw ConfigError("converge.threshold: must be positive");
  return c;
}

RandomSystemsSpec parse_random(const json& j) {
  check_keys(j, {"count", "nx", "ny", "seed", "q", "N", "steps", "threshold"}, "random_systems");
  RandomSystemsSpec r;
  if (j.contains("count")) r.count = get_int(j["count"], "random_systems.count");
  if (j.contains("nx")) r.nx = get_int(j["nx"], "random_systems.nx");
  if (j.contains("ny")) r.ny = get_int(j["ny"], "random_systems.ny");
  if (j.contains("seed")) r.seed = get_u64(j["seed"], "random_systems.seed");
  if (j.contains("q")) r.q = get_int(j["q"], "random_systems.q");
  if (j.contains("N")) r.n = get_int(j["N"], "random_systems.N");
  if (j.contains("steps")) r.steps = get_int(j["steps"], "random_systems.steps");
  if (j.contains("threshold")) {
    r.threshold = get_double(j["threshold"], "random_systems.threshold");
  }
  require_positive(r.count, "random_systems.count");
  require_positive(r.nx, "random_systems.nx");
  require_positive(r.ny, "random_systems.ny");
  require_positive(r.q, "random_systems.q");
  require_positive(r.n, "random_systems.N");
  require_positive(r.steps, "random_systems.steps");
  if (!(r.threshold > 0.0)) throw ConfigError("random_systems.threshold: must be positive");
  return r;
}

TrackingSpec parse_tracking(const json& j) {
  check_keys(j,
             {"dt", "horizon", "q_lqr", "r_lqr", "theta_grid", "runs", "master_seed",
              "nominal_data_seconds", "em_iters", "ss_max_iter", "reference", "noises", "filters"},
             "tracking");
  TrackingSpec t;
  TrackingConfig& c = t.config;
  if (j.contains("dt")) c.dt = get_double(j["dt"], "tracking.dt");
  if (j.contains("horizon")) c.horizon = get_int(j["horizon"], "tracking.horizon");
  if (j.contains("q_lqr")) c.q_lqr = get_matrix(j["q_lqr"], "tracking.q_lqr");
  if (j.contains("r_lqr")) c.r_lqr = get_matrix(j["r_lqr"], "tracking.r_lqr");
  if (j.contains("theta_grid")) {
    const Vector g = get_vector(j["theta_grid"], "tracking.theta_grid");
    c.theta_grid.assign(g.data(), g.data() + g.size());
  }
  if (j.contains("runs")) c.runs = get_int(j["runs"], "tracking.runs");
  if (j.contains("master_seed")) c.master_seed = get_u64(j["master_seed"], "tracking.master_seed");
  if (j.contains("nominal_data_seconds")) {
    c.nominal_data_seconds = get_double(j["nominal_data_seconds"], "tracking.nominal_data_seconds");
  }
  if (j.contains("em_iters")) c.em_iters = get_int(j["em_iters"], "tracking.em_iters");
  if (j.contains("ss_max_iter")) c.ss_max_iter = get_int(j["ss_max_iter"], "tracking.ss_max_iter");
  if (j.contains("reference") && !j["reference"].is_null()) {
    const json& ref = j["reference"];
    if (!ref.is_array()) throw ConfigError("tracking.reference: expected an array of states");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const Vector x = get_vector(ref[i], "tracking.reference[" + std::to_string(i) + "]");
      if (x.size() != 4) throw ConfigError("tracking.reference: states have 4 entries");
      c.reference.push_back(x);
    }
  }
  if (j.contains("noises")) {
    const json& arr = j["noises"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("tracking.noises: expected a nonempty array");
    t.noises.clear();
    for (const auto& item : arr) {
      const auto parsed = item.is_string() ? parse_noise_setting(item.get<std::string>())
                                           : std::nullopt;
      if (!parsed) throw ConfigError("tracking.noises: unknown noise setting " + item.dump());
      t.noises.push_back(*parsed);
    }
  }
  if (j.contains("filters")) {
    const json& arr = j["filters"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("tracking.filters: expected a nonempty array");
    t.filters.clear();
    for (const auto& item : arr) {
      const auto parsed = item.is_string() ? parse_filter_kind(item.get<std::string>())
                                           : std::nullopt;
      if (!parsed) throw ConfigError("tracking.filters: unknown filter " + item.dump());
      t.filters.push_back(*parsed);
    }
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return t;
}

OutputSpec parse_output(const json& j) {
  check_keys(j, {"path", "summary_path"}, "output");
  OutputSpec o;
  for (const char* key : {"path", "summary_path"}) {
    if (!j.contains(key) || j[key].is_null()) continue;
    if (!j[key].is_string()) throw ConfigError(std::string("output.") + key + ": expected a string");
    (std::string_view(key) == "path" ? o.path : o.summary_path) = j[key].get<std::string>();
  }
  return o;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"model", "certify", "converge", "random_systems", "tracking", "output"}, "config");
  ExperimentConfig cfg;
  if (j.contains("model")) cfg.model = parse_model(j["model"]);
  if (j.contains("certify")) cfg.certify = parse_certify(j["certify"]);
  if (j.contains("converge")) cfg.converge = parse_converge(j["converge"]);
  if (j.contains("random_systems")) cfg.random_systems = parse_random(j["random_systems"]);
  if (j.contains("tracking")) cfg.tracking = parse_tracking(j["tracking"]);
  if (j.contains("output")) cfg.output = parse_output(j["output"]);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  if (cfg.model) {
    j["model"] = {{"A", matrix_json(cfg.model->a)},
                  {"C", matrix_json(cfg.model->c)},
                  {"sigma_w", matrix_json(cfg.model->sigma_w)},
                  {"sigma_v", matrix_json(cfg.model->sigma_v)}};
  }
  if (cfg.certify) {
    j["certify"] = {{"q", cfg.certify->q}, {"theta_v", cfg.certify->theta_v}};
    if (cfg.certify->n) j["certify"]["N"] = *cfg.certify->n;
  }
  if (cfg.converge) {
    j["converge"] = {{"steps", cfg.converge->steps}, {"threshold", cfg.converge->threshold}};
    if (cfg.converge->theta_x) j["converge"]["theta_x"] = *cfg.converge->theta_x;
  }
  if (cfg.random_systems) {
    const auto& r = *cfg.random_systems;
    j["random_systems"] = {{"count", r.count}, {"nx", r.nx},       {"ny", r.ny},
                           {"seed", r.seed},   {"q", r.q},         {"N", r.n},
                           {"steps", r.steps}, {"threshold", r.threshold}};
  }
  if (cfg.tracking) {
    const TrackingConfig& c = cfg.tracking->config;
    json t = {{"dt", c.dt},
              {"horizon", c.horizon},
              {"q_lqr", matrix_json(c.q_lqr)},
              {"r_lqr", matrix_json(c.r_lqr)},
              {"theta_grid", c.theta_grid},
              {"runs", c.runs},
              {"master_seed", c.master_seed},
              {"nominal_data_seconds", c.nominal_data_seconds},
              {"em_iters", c.em_iters},
              {"ss_max_iter", c.ss_max_iter}};
    if (!c.reference.empty()) {
      json ref = json::array();
      for (const Vector& x : c.reference) ref.push_back(vector_json(x));
      t["reference"] = std::move(ref);
    }
    json noises = json::array();
    for (NoiseSetting n : cfg.tracking->noises) noises.push_back(std::string(to_string(n)));
    json filters = json::array();
    for (FilterKind f : cfg.tracking->filters) filters.push_back(std::string(to_string(f)));
    t["noises"] = std::move(noises);
    t["filters"] = std::move(filters);
    j["tracking"] = std::move(t);
  }
  json out = json::object();
  if (cfg.output.path) out["path"] = *cfg.output.path;
  if (cfg.output.summary_path) out["summary_path"] = *cfg.output.summary_path;
  if (!out.empty()) j["output"] = std::move(out);
  return j;
}

}  // namespace wdrkf::cli
