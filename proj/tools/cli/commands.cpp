#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "wdrkf/errors.hpp"
#include "wdrkf/filters.hpp"
#include "wdrkf/matops.hpp"
#include "wdrkf/sim.hpp"

namespace wdrkf::cli {
namespace {

using nlohmann::json;

// Opens the requested output file, or falls back to the given stream.
class Sink {
 public:
  Sink(const std::optional<std::string>& path, std::ostream& fallback) : out_(&fallback) {
    if (path) {
      file_.open(*path, std::ios::binary | std::ios::trunc);
      if (!file_) throw ConfigError("cannot open output file '" + *path + "'");
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

std::optional<std::string> output_path(const ExperimentConfig& cfg, const CommandOptions& opts) {
  return opts.out ? opts.out : cfg.output.path;
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) row += ',';
    row += c;
    first = false;
  }
  row += '\n';
  return row;
}

std::string optional_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

double relative_diff(double trace_ss, double trace_t) {
  return std::abs((trace_ss - trace_t) / trace_ss);
}

// Derived name of the aggregate table: runs.csv -> runs_summary.csv.
std::string summary_path_for(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return path + "_summary.csv";
  }
  return path.substr(0, dot) + "_summary" + path.substr(dot);
}

}  // namespace

std::string format_number(double v) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(9) << v;
  return s.str();
}

int threads_from_env() {
  const char* raw = std::getenv("WDRKF_THREADS");
  if (raw == nullptr || *raw == '\0') {
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 0 || v > 4096) {
    throw ConfigError(std::string("WDRKF_THREADS: expected a nonnegative integer, got '") + raw +
                      "'");
  }
  return static_cast<int>(v);
}

NominalModel to_model(const ModelSpec& spec) {
  try {
    return NominalModel(spec.a, spec.c, spec.sigma_w, spec.sigma_v);
  } catch (const Error& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

int default_block_length(const NominalModel& model) {
  return std::max(static_cast<int>(model.nx()), 2);
}

NominalModel random_system(int nx, int ny, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_stream(seed, index, Stream::kInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index r, Eigen::Index c, double scale) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * normal(rng);
    }
    return m;
  };
  auto covariance = [&](int n) {
    const Matrix g = draw(n, n, 1.0 / std::sqrt(static_cast<double>(n)));
    return Matrix(g * g.transpose() + 0.1 * Matrix::Identity(n, n));
  };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Matrix a = draw(nx, nx, 1.0);
    const Matrix c = draw(ny, nx, 1.0);
    const Matrix sw = covariance(nx);
    const Matrix sv = covariance(ny);
    NominalModel model(a, c, sw, sv);
    const CtrbObsv co = check_ctrb_obsv(model.a, model.c, model.sigma_w);
    if (co.controllable && co.observable) return model;
  }
  throw NumericalError("random_system: no controllable and observable draw in 1000 attempts");
}

ConvergenceTrace convergence_trace(const NominalModel& model, double theta_x, int steps,
                                   double threshold) {
  const SteadyStateDrkf ss = ss_drkf_solve(model, theta_x, 0.0);
  ConvergenceTrace out{theta_x, ss.lf.sigma_x_post.trace(), {}, {}, std::nullopt};
  // Covariances do not depend on the data, so zero measurements suffice.
  const std::vector<Vector> ys(static_cast<std::size_t>(steps), Vector::Zero(model.ny()));
  const std::vector<DrkfStep> run = tv_drkf_run(model, theta_x, 0.0, ys);
  for (std::size_t t = 0; t < run.size(); ++t) {
    const double tr = run[t].posterior.cov.trace();
    const double d = relative_diff(out.trace_ss, tr);
    out.trace_tv.push_back(tr);
    out.relative_diff.push_back(d);
    if (!out.first_below && d < threshold) out.first_below = static_cast<int>(t);
  }
  return out;
}

std::vector<RandomSystemResult> random_systems_study(const RandomSystemsSpec& spec) {
  std::vector<RandomSystemResult> results;
  results.reserve(static_cast<std::size_t>(spec.count));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < spec.count; ++i) {
    RandomSystemResult r{i, false, "", nan, nan, nan, nan, std::nullopt, false};
    try {
      const NominalModel model =
          random_system(spec.nx, spec.ny, spec.seed, static_cast<std::uint64_t>(i));
      const ContractionCertificate cert = theta_max(model, spec.q, spec.n);
      r.theta_max = cert.theta_max;
      r.phi = cert.phi;
      const ConvergenceTrace tr = convergence_trace(model, cert.theta_max, spec.steps, spec.threshold);
      r.trace_ss = tr.trace_ss;
      r.final_relative_diff = tr.relative_diff.back();
      r.first_below = tr.first_below;
      r.passed = r.final_relative_diff <= spec.threshold;
    } catch (const Error& e) {
      r.failed = true;
      r.failure = e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

int cmd_certify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& stdout_sink,
                std::ostream& log) {
  if (!cfg.model) throw ConfigError("certify: config needs a 'model' section");
  const CertifySpec spec = cfg.certify.value_or(CertifySpec{});
  if (spec.theta_v > 0.0) {
    log << "certify: theta_v = " << format_number(spec.theta_v)
        << " > 0; the contraction certificate only covers theta_v = 0\n";
    return kMathError;
  }
  const NominalModel model = to_model(*cfg.model);
  const int n = spec.n.value_or(default_block_length(model));
  const CtrbObsv co = check_ctrb_obsv(model.a, model.c, model.sigma_w);
  json doc = {{"N", n},
              {"q", spec.q},
              {"assumptions_checked",
               {{"controllable", co.controllable}, {"observable", co.observable}}}};
  int code = kSuccess;
  try {
    const ContractionCertificate cert = theta_max(model, spec.q, n);
    doc["phi_tilde"] = std::isfinite(cert.phi_tilde) ? json(cert.phi_tilde) : json(nullptr);
    doc["phi"] = cert.phi;
    doc["theta_max"] = cert.theta_max;
    doc["sigma_bar_q_trace"] = cert.sigma_bar_q.trace();
  } catch (const AssumptionError& e) {
    doc["error"] = e.what();
    log << "certify: assumption check failed: " << e.what() << '\n';
    code = kMathError;
  } catch (const Error& e) {
    doc["error"] = e.what();
    log << "certify: " << e.what() << '\n';
    code = kMathError;
  }
  Sink sink(output_path(cfg, opts), stdout_sink);
  sink.stream() << doc.dump(2) << '\n';
  return code;
}

int cmd_converge(const ExperimentConfig& cfg, const CommandOptions& opts,
                 std::ostream& stdout_sink, std::ostream& log) {
  if (cfg.random_systems && cfg.model) {
    throw ConfigError("converge: give either 'model' or 'random_systems', not both");
  }
  if (cfg.random_systems) {
    RandomSystemsSpec spec = *cfg.random_systems;
    if (opts.seed) spec.seed = *opts.seed;
    const auto results = random_systems_study(spec);
    Sink sink(output_path(cfg, opts), stdout_sink);
    std::ostream& out = sink.stream();
    out << "system,theta_max,phi,trace_ss,final_relative_diff,first_below_threshold,passed,"
           "failed\n";
    int passed = 0;
    int failed = 0;
    double worst = 0.0;
    for (const auto& r : results) {
      out << csv_row({std::to_string(r.index), format_number(r.theta_max), format_number(r.phi),
                      format_number(r.trace_ss), format_number(r.final_relative_diff),
                      optional_int(r.first_below), r.passed ? "1" : "0", r.failed ? "1" : "0"});
      if (r.failed) {
        ++failed;
        log << "converge: system " << r.index << " failed: " << r.failure << '\n';
      } else {
        worst = std::max(worst, r.final_relative_diff);
      }
      passed += r.passed ? 1 : 0;
    }
    // Summary row: worst final difference over completed systems, pass count.
    out << csv_row({"summary", "", "", "", format_number(worst), "", std::to_string(passed),
                    std::to_string(failed)});
    log << "converge: " << passed << "/" << spec.count << " systems within "
        << format_number(spec.threshold) << '\n';
    return failed > 0 ? kMathError : kSuccess;
  }

  if (!cfg.model) throw ConfigError("converge: config needs a 'model' or 'random_systems' section");
  const CertifySpec cert_spec = cfg.certify.value_or(CertifySpec{});
  if (cert_spec.theta_v > 0.0) {
    log << "converge: theta_v must be 0\n";
    return kMathError;
  }
  const ConvergeSpec spec = cfg.converge.value_or(ConvergeSpec{});
  const NominalModel model = to_model(*cfg.model);
  try {
    double theta_x = 0.0;
    if (spec.theta_x) {
      theta_x = *spec.theta_x;
    } else {
      const int n = cert_spec.n.value_or(default_block_length(model));
      theta_x = theta_max(model, cert_spec.q, n).theta_max;
    }
    const ConvergenceTrace tr = convergence_trace(model, theta_x, spec.steps, spec.threshold);
    Sink sink(output_path(cfg, opts), stdout_sink);
    std::ostream& out = sink.stream();
    out << "row,t,theta_x,trace_tv,trace_ss,relative_trace_diff\n";
    for (std::size_t t = 0; t < tr.trace_tv.size(); ++t) {
      out << csv_row({"step", std::to_string(t), format_number(theta_x),
                      format_number(tr.trace_tv[t]), format_number(tr.trace_ss),
                      format_number(tr.relative_diff[t])});
    }
    // Summary row: t is the first step below the threshold (empty if none).
    out << csv_row({"summary", optional_int(tr.first_below), format_number(theta_x),
                    format_number(tr.trace_tv.back()), format_number(tr.trace_ss),
                    format_number(tr.relative_diff.back())});
    return kSuccess;
  } catch (const DivergenceError& e) {
    log << "converge: " << e.what() << '\n';
    return kMathError;
  } catch (const Error& e) {
    log << "converge: " << e.what() << '\n';
    return kMathError;
  }
}

int cmd_track(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& stdout_sink,
              std::ostream& log) {
  if (!cfg.tracking) throw ConfigError("track: config needs a 'tracking' section");
  TrackingSpec spec = *cfg.tracking;
  if (opts.seed) spec.config.master_seed = *opts.seed;
  const auto records = tracking_sweep(spec.noises, spec.filters, spec.config, opts.threads);
  const auto path = output_path(cfg, opts);
  {
    Sink sink(path, stdout_sink);
    std::ostream& out = sink.stream();
    out << "noise,filter,theta,run_index,lqr_cost,avg_mse,failed\n";
    for (const auto& r : records) {
      out << csv_row({std::string(to_string(r.noise)), std::string(to_string(r.filter)),
                      r.theta ? format_number(*r.theta) : "", std::to_string(r.run_index),
                      format_number(r.metrics.lqr_cost), format_number(r.metrics.avg_mse),
                      r.metrics.failed ? "1" : "0"});
    }
  }
  std::ostringstream table;
  table << "noise,filter,theta,completed,failed,cost_mean,cost_std,mse_mean,mse_std\n";
  for (const auto& s : summarize(records)) {
    table << csv_row({std::string(to_string(s.noise)), std::string(to_string(s.filter)),
                      s.theta ? format_number(*s.theta) : "", std::to_string(s.completed),
                      std::to_string(s.failed), format_number(s.cost_mean),
                      format_number(s.cost_std), format_number(s.mse_mean),
                      format_number(s.mse_std)});
  }
  std::optional<std::string> summary = cfg.output.summary_path;
  if (!summary && path) summary = summary_path_for(*path);
  if (summary) {
    std::ofstream f(*summary, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open output file '" + *summary + "'");
    f << table.str();
  }
  log << table.str();
  for (const auto& r : records) {
    if (r.metrics.failed) {
      log << "track: failed run " << to_string(r.noise) << ' ' << to_string(r.filter) << ' '
          << (r.theta ? format_number(*r.theta) : "-") << " run " << r.run_index << ": "
          << r.metrics.failure << '\n';
    }
  }
  return kSuccess;
}

}  // namespace wdrkf::cli
