// Batch front end: run, validate and summarize experiments described by a
// config file.
//
// Exit status: 0 success, 1 run failure, 2 bad config or usage.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmd/experiment.hpp"

namespace {

constexpr int kRunFailure = 1;
constexpr int kConfigFailure = 2;

void report(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << '\n';
}

int exit_code_for(pmd::ErrorKind kind) {
  switch (kind) {
    case pmd::ErrorKind::Parse:
    case pmd::ErrorKind::ConfigMismatch:
    case pmd::ErrorKind::InvalidParameter:
    case pmd::ErrorKind::InvalidData:
    case pmd::ErrorKind::GradientUnavailable:
      return kConfigFailure;
    default:
      return kRunFailure;
  }
}

std::filesystem::path output_dir(const pmd::ExperimentConfig& config, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("PMD_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

int cmd_run(const std::string& path, std::size_t repeat, const std::string& cli_out) {
  const pmd::ExperimentConfig base = pmd::parse_config_file(path);
  pmd::prepare_experiment(base);  // fail fast before spawning runs
  const std::filesystem::path out = output_dir(base, cli_out);

  if (repeat <= 1) {
    const auto result = pmd::run_experiment(base, out);
    std::cout << result.summary.dump(2) << '\n';
    return 0;
  }

  std::vector<std::exception_ptr> errors(repeat);
  std::vector<std::thread> workers;
  workers.reserve(repeat);
  for (std::size_t i = 0; i < repeat; ++i) {
    workers.emplace_back([&, i] {
      try {
        pmd::ExperimentConfig c = base;
        c.seed = base.seed + i;
        pmd::run_experiment(c, out / ("seed_" + std::to_string(i)));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::cout << pmd::summarize_runs(out).dump(2) << '\n';
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto prep = pmd::prepare_experiment(pmd::parse_config_file(path));
  nlohmann::ordered_json j;
  j["valid"] = true;
  j["algorithm"] = prep.config.algorithm;
  j["model"] = prep.config.model.kind;
  j["data_size"] = prep.model->data_size();
  j["iterations"] = prep.config.algorithm == "pmd" ? prep.config.pmd.iterations : prep.config.sgld.iterations;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle mirror descent experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t repeat = 1;
  std::string out;
  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--repeat", repeat, "Number of seeds run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "Output directory");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_path, "Config file")->required()->check(CLI::ExistingFile);

  std::string summary_dir;
  auto* summarize = app.add_subcommand("summarize", "Median of final metrics over per-seed runs");
  summarize->add_option("dir", summary_dir, "Directory holding seed_* runs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigFailure;
  }

  try {
    if (*run) return cmd_run(config_path, repeat, out);
    if (*validate) return cmd_validate(validate_path);
    std::cout << pmd::summarize_runs(summary_dir).dump(2) << '\n';
    return 0;
  } catch (const pmd::Error& e) {
    report(pmd::to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    report("internal", e.what());
    return kRunFailure;
  }
}
