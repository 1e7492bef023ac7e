#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "flowcast/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"flowcast: next-activity prediction for event logs"};
  app.require_subcommand(1);

  std::string config_path, out_path, iter_log, model_path, log_path;
  std::optional<std::uint64_t> seed;
  bool no_timings = false;
  std::size_t min_prefix = 1;

  auto* run = app.add_subcommand("run", "cross-validated feature-mode comparison");
  run->add_option("config", config_path, "experiment configuration (JSON)")->required();
  run->add_option("--out", out_path, "results CSV")->default_val("results.csv");
  run->add_option("--iter-log", iter_log, "per-iteration validation accuracy CSV");
  run->add_option("--seed", seed, "override the configured seed");
  run->add_flag("--no-timings", no_timings, "leave timing columns empty (reproducible output)");

  auto* train = app.add_subcommand("train", "train a single model and save it");
  train->add_option("config", config_path, "experiment configuration (JSON)")->required();
  train->add_option("--out", out_path, "model file")->required();

  auto* predict = app.add_subcommand("predict", "predict the next activity for every prefix of a log");
  predict->add_option("model", model_path, "model file")->required();
  predict->add_option("log", log_path, "event log (.csv or .xes)")->required();
  predict->add_option("--out", out_path, "predictions CSV")->default_val("predictions.csv");
  predict->add_option("--min-prefix", min_prefix, "shortest prefix to predict from")->default_val(1)->check(
      CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : flowcast::exit_code::kBadConfig;
  }

  if (*run) {
    flowcast::RunOptions options;
    options.out = out_path;
    if (!iter_log.empty()) options.iteration_log = iter_log;
    options.seed = seed;
    options.include_timings = !no_timings;
    return flowcast::cmd_run(config_path, options);
  }
  if (*train) return flowcast::cmd_train(config_path, out_path);
  return flowcast::cmd_predict(model_path, log_path, out_path, min_prefix);
}
