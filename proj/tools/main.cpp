#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"

int main(int argc, char** argv) {
  using namespace wdrkf::cli;

  CLI::App app{"Wasserstein distributionally robust Kalman filtering experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "Override every seed in the config");
    sub->add_option("--out", out, "Output file (stdout when omitted)");
  };
  CLI::App* certify = app.add_subcommand("certify", "Certified radius theta_max as JSON");
  CLI::App* converge =
      app.add_subcommand("converge", "Time-varying versus steady-state trace difference as CSV");
  CLI::App* track = app.add_subcommand("track", "LQR tracking sweep as CSV");
  for (CLI::App* sub : {certify, converge, track}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const ExperimentConfig cfg = load_config(config_path);
    CommandOptions opts;
    if (sub->count("--seed") > 0) opts.seed = seed;
    if (sub->count("--out") > 0) opts.out = out;
    if (sub == certify) return cmd_certify(cfg, opts, std::cout, std::cerr);
    if (sub == converge) return cmd_converge(cfg, opts, std::cout, std::cerr);
    opts.threads = threads_from_env();
    return cmd_track(cfg, opts, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const wdrkf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMathError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMathError;
  }
}
