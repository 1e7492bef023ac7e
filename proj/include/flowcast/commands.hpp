#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include "flowcast/bundle.hpp"
#include "flowcast/config.hpp"
#include "flowcast/harness.hpp"

namespace flowcast {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kBadConfig = 2;
inline constexpr int kMissingDataset = 3;
}  // namespace exit_code

struct RunOptions {
  std::string out = "results.csv";
  std::optional<std::string> iteration_log;
  std::optional<std::uint64_t> seed;
  bool include_timings = true;
};

namespace detail {

// Loads and validates the config, reporting problems on `err`.
inline std::optional<ExperimentConfig> load_config_reporting(const std::string& path, std::ostream& err, int& code) {
  try {
    ExperimentConfig c = load_config(path);
    if (!std::filesystem::exists(c.dataset)) {
      err << "error: dataset file '" << c.dataset << "' does not exist\n";
      code = exit_code::kMissingDataset;
      return std::nullopt;
    }
    return c;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    code = exit_code::kBadConfig;
    return std::nullopt;
  }
}

inline std::string utc_now() {
  return format_timestamp(std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()));
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const RunOptions& options, std::ostream& err = std::cerr) {
  int code = exit_code::kOk;
  auto config = detail::load_config_reporting(config_path, err, code);
  if (!config) return code;
  if (options.seed) config->seed = *options.seed;
  try {
    ExperimentResult result = run_experiment(*config);
    std::ofstream out(options.out, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write results to '" + options.out + "'");
    write_results(out, result, options.include_timings);
    if (options.iteration_log) {
      std::ofstream iters(*options.iteration_log, std::ios::binary | std::ios::trunc);
      if (!iters) throw Error("cannot write iteration log to '" + *options.iteration_log + "'");
      write_iteration_log(iters, result);
    }
    bool any_failed = false;
    for (const auto& row : result.rows)
      if (row.failed) {
        any_failed = true;
        err << "error: " << row.features << " fold " << row.fold << " failed: " << row.error << '\n';
      }
    return any_failed ? exit_code::kFailure : exit_code::kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
}

// Trains one model (the first configured feature mode) on the whole log with
// a train/validation split and returns it as a bundle.
inline ModelBundle train_bundle(const ExperimentConfig& config, const EventLog& raw_log) {
  config.validate();
  const FeatureMode mode = config.modes().front();
  EventLog log = filter_long_cases(raw_log, config.max_case_len);
  const auto selected = select_attributes(log, config.usage_threshold);
  auto [training, validation] = split_train_validation(log.cases, config.train_fraction, derive_seed(config.seed, 400));
  PreparedFold fold{std::move(training), std::move(validation), {}};
  FoldModel fm = fit_fold(config, fold, selected, mode, derive_seed(config.seed, 401));

  ModelBundle b;
  b.schema = fm.encoder.schema();
  b.mode = mode;
  b.clusters = fm.encoder.clusters();
  b.network = std::move(fm.training.model);
  b.metadata = {config.seed, config_hash(config), detail::utc_now(), dataset_name(config.dataset)};
  b.check_consistency();
  return b;
}

// True when `bundle` was trained from exactly this configuration.
inline bool config_matches(const ModelBundle& bundle, const ExperimentConfig& config) {
  return bundle.metadata.config_hash == config_hash(config);
}

inline int cmd_train(const std::string& config_path, const std::string& out_model, std::ostream& err = std::cerr) {
  int code = exit_code::kOk;
  auto config = detail::load_config_reporting(config_path, err, code);
  if (!config) return code;
  try {
    EventLog log = load_log(config->dataset, config->format.value_or(format_from_path(config->dataset)));
    save_bundle(train_bundle(*config, log), out_model);
    return exit_code::kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
}

inline constexpr const char* kPredictionsHeader = "caseid,prefix_length,predicted,probability";

// One row per prefix (lengths min_prefix..L) of every case in `log`.
inline void write_predictions(std::ostream& out, const ModelBundle& bundle, const EventLog& log,
                              std::size_t min_prefix = 1, std::size_t batch_size = 256) {
  const Encoder enc = bundle.encoder();
  out << kPredictionsHeader << '\n';
  auto prefixes = generate_prefixes(log.cases, min_prefix);
  for (std::size_t start = 0; start < prefixes.size(); start += batch_size) {
    std::span<const Prefix> chunk(prefixes.data() + start, std::min(batch_size, prefixes.size() - start));
    auto seqs = encode_prefixes(enc, chunk);
    std::vector<const EncodedSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    auto preds = predict_batch(bundle.network, ptrs);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      char prob[32];
      std::snprintf(prob, sizeof prob, "%.6f", preds[i].probabilities(static_cast<Eigen::Index>(preds[i].cls)));
      csv::write_row(out, {chunk[i].source->id, std::to_string(chunk[i].length), enc.class_name(preds[i].cls), prob});
    }
  }
}

inline int cmd_predict(const std::string& model_path, const std::string& log_path, const std::string& out_path,
                       std::size_t min_prefix = 1, std::ostream& err = std::cerr) {
  try {
    ModelBundle bundle = load_bundle(model_path);
    if (!std::filesystem::exists(log_path)) {
      err << "error: event log '" << log_path << "' does not exist\n";
      return exit_code::kMissingDataset;
    }
    EventLog log = load_log(log_path, format_from_path(log_path));
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write predictions to '" + out_path + "'");
    write_predictions(out, bundle, log, min_prefix);
    return exit_code::kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
}

}  // namespace flowcast
