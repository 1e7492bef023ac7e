#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "flowcast/adam.hpp"
#include "flowcast/clustering.hpp"
#include "flowcast/encoding.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/eventlog.hpp"
#include "flowcast/gru.hpp"
#include "flowcast/random.hpp"
#include "flowcast/stats.hpp"

namespace flowcast {

inline constexpr double kGradientClipNorm = 5.0;
inline constexpr std::size_t kMinPrefixLength = 4;

struct ExperimentConfig {
  std::string dataset;
  std::optional<LogFormat> format;           // nullopt: pick from the file extension
  std::vector<std::string> features{"None"};  // None, Raw, Clust, Both, or explicit ClustN / BothN
  std::vector<std::size_t> max_clusters;     // expands bare Clust / Both entries
  std::size_t folds = 3;
  double train_fraction = 0.75;
  std::size_t iterations = 100;
  std::size_t total_epochs = 10;
  std::size_t batch_size = 256;
  std::size_t hidden_dim = 256;
  double learning_rate = 0.01;
  std::size_t max_case_len = 100;
  std::size_t max_train_prefixes = 75000;
  std::size_t max_validation_prefixes = 25000;
  std::size_t validation_sample = 10000;
  std::size_t max_test_traces = 100000;
  double usage_threshold = 0.04;
  std::uint64_t seed = 0;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(folds, "folds");
    positive(iterations, "iterations");
    positive(total_epochs, "total_epochs");
    positive(batch_size, "batch_size");
    positive(hidden_dim, "hidden_dim");
    positive(max_case_len, "max_case_len");
    positive(max_train_prefixes, "max_train_prefixes");
    positive(max_validation_prefixes, "max_validation_prefixes");
    positive(validation_sample, "validation_sample");
    positive(max_test_traces, "max_test_traces");
    if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction must be in (0, 1)");
    if (!(usage_threshold > 0 && usage_threshold < 1)) throw ConfigError("usage_threshold must be in (0, 1)");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    for (auto n : max_clusters)
      if (n == 0) throw ConfigError("max_clusters entries must be positive");
    if (features.empty()) throw ConfigError("features must list at least one feature mode");
    auto all = modes();
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (all[i] == all[j]) throw ConfigError("feature mode " + all[i].label() + " is listed twice");
  }

  // Feature modes in configuration order, bare Clust/Both expanded over max_clusters.
  std::vector<FeatureMode> modes() const {
    std::vector<FeatureMode> out;
    for (const auto& f : features) {
      if (f == "Clust" || f == "Both") {
        if (max_clusters.empty()) throw ConfigError("feature '" + f + "' needs a non-empty max_clusters list");
        for (auto n : max_clusters) out.push_back(f == "Clust" ? FeatureMode::clust(n) : FeatureMode::both(n));
      } else {
        out.push_back(FeatureMode::parse(f));
      }
    }
    return out;
  }
};

struct Fold {
  std::vector<Case> train;
  std::vector<Case> test;
};

// Random partition into k near-equal subsets; fold i tests subset i.
inline std::vector<Fold> make_folds(const std::vector<Case>& cases, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("make_folds: k must be positive");
  if (cases.size() < k)
    throw Error("make_folds: " + std::to_string(cases.size()) + " cases cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  std::vector<std::size_t> subset_of(cases.size());
  const std::size_t base = cases.size() / k, extra = cases.size() % k;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < k; ++s) {
    std::size_t n = base + (s < extra ? 1 : 0);
    for (std::size_t j = 0; j < n; ++j) subset_of[order[pos++]] = s;
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < cases.size(); ++i)
    for (std::size_t f = 0; f < k; ++f) (subset_of[i] == f ? folds[f].test : folds[f].train).push_back(cases[i]);
  return folds;
}

// Case-level random split; the validation share is rounded down.
inline std::pair<std::vector<Case>, std::vector<Case>> split_train_validation(const std::vector<Case>& cases,
                                                                              double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const auto n_validation =
      static_cast<std::size_t>(std::floor(static_cast<double>(cases.size()) * (1.0 - fraction) + 1e-9));
  const std::size_t n_train = cases.size() - n_validation;
  std::pair<std::vector<Case>, std::vector<Case>> out;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? out.first : out.second).push_back(cases[order[i]]);
  return out;
}

// A virtual case: the first `length` events of `source`.
struct Prefix {
  const Case* source = nullptr;
  std::size_t length = 0;

  std::span<const Event> events() const { return {source->events.data(), length}; }
  bool is_complete() const { return length == source->size(); }
  // Activity of the following event, nullopt when the prefix is the whole case.
  std::optional<std::string> next_activity() const {
    if (is_complete()) return std::nullopt;
    return source->events[length].activity;
  }
};

// Prefixes of length min_length..L for every case of length L >= min_length.
inline std::vector<Prefix> generate_prefixes(std::span<const Case> cases, std::size_t min_length = kMinPrefixLength) {
  std::vector<Prefix> out;
  for (const auto& c : cases)
    for (std::size_t len = std::max<std::size_t>(min_length, 1); len <= c.size(); ++len) out.push_back({&c, len});
  return out;
}

inline std::vector<Prefix> sample_prefixes(std::vector<Prefix> prefixes, std::size_t cap, std::uint64_t seed) {
  return sample_without_replacement(std::move(prefixes), cap, seed);
}

inline std::vector<EncodedSequence> encode_prefixes(const Encoder& enc, std::span<const Prefix> prefixes) {
  std::vector<EncodedSequence> out;
  out.reserve(prefixes.size());
  for (const auto& p : prefixes) out.push_back(enc.encode_prefix(p.events(), p.next_activity()));
  return out;
}

// Share of sequences whose prediction equals their target. Sequences with an
// unknown target (activity never seen in training) count as misses.
inline double accuracy(const GruNetwork& net, std::span<const EncodedSequence> seqs, std::size_t batch_size) {
  if (seqs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  std::vector<const EncodedSequence*> chunk;
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(seqs.size(), start + batch_size); ++i) chunk.push_back(&seqs[i]);
    auto preds = predict_batch(net, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i)
      if (preds[i].cls == chunk[i]->target) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(seqs.size());
}

struct TrainingResult {
  GruNetwork model;
  std::vector<double> validation_log;  // one entry per iteration
  std::size_t best_iteration = 0;      // 0-based
  double best_accuracy = std::numeric_limits<double>::quiet_NaN();
  double training_time = 0;            // seconds
};

// Iterative training with best-on-validation snapshotting. Each iteration
// consumes total_epochs * N / iterations examples in shuffled mini-batches.
inline TrainingResult train_model(const ExperimentConfig& config, std::span<const EncodedSequence> training,
                                  std::span<const EncodedSequence> validation, std::size_t input_dim,
                                  std::size_t class_count, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<const EncodedSequence*> pool;
  for (const auto& s : training)
    if (s.target < class_count) pool.push_back(&s);
  if (pool.empty()) throw Error("train_model: no training prefixes");

  TrainingResult result;
  GruNetwork net = GruNetwork::initialized(input_dim, config.hidden_dim, class_count, derive_seed(seed, 1));
  AdamState<GruParameters> adam(net.params(), {config.learning_rate, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(seed, 2));

  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::size_t cursor = 0;

  const auto total_examples = static_cast<unsigned long long>(config.total_epochs) * pool.size();
  std::vector<const EncodedSequence*> batch_seqs;
  result.model = net;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto begin = total_examples * it / config.iterations;
    const auto end = total_examples * (it + 1) / config.iterations;
    auto remaining = end - begin;
    while (remaining > 0) {
      batch_seqs.clear();
      while (batch_seqs.size() < config.batch_size && remaining > 0) {
        if (cursor == order.size()) {
          shuffle(order, rng);
          cursor = 0;
        }
        batch_seqs.push_back(pool[order[cursor++]]);
        --remaining;
      }
      Batch batch = make_batch(batch_seqs, input_dim);
      auto lg = loss_and_gradients(net, batch);
      clip_gradients(lg.gradients, kGradientClipNorm);
      adam_step(net.params(), lg.gradients, adam);
    }
    const double acc = accuracy(net, validation, config.batch_size);
    result.validation_log.push_back(acc);
    // Without a validation set the latest state is kept; ties keep the earlier snapshot.
    const bool improved = std::isnan(acc) || std::isnan(result.best_accuracy) || acc > result.best_accuracy;
    if (improved) {
      result.model = net;
      result.best_accuracy = acc;
      result.best_iteration = it;
    }
  }
  result.training_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

struct TestResult {
  double success_rate = 0;
  double prediction_time = 0;
  std::size_t predictions = 0;
};

inline TestResult test_model(const GruNetwork& model, const Encoder& encoder, std::span<const Case> test_cases,
                             const ExperimentConfig& config, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  auto prefixes = sample_prefixes(generate_prefixes(test_cases), config.max_test_traces, seed);
  if (prefixes.empty()) throw Error("test_model: no test prefixes (every test case is shorter than " +
                                    std::to_string(kMinPrefixLength) + " events)");
  auto seqs = encode_prefixes(encoder, prefixes);
  TestResult r;
  r.success_rate = accuracy(model, seqs, config.batch_size);
  r.predictions = seqs.size();
  r.prediction_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

struct ResultRow {
  std::string dataset;
  std::string features;
  std::size_t fold = 0;
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t input_vector_size = 0;
  std::size_t cl = 0;
  double training_time = 0;
  double prediction_time = 0;
  std::vector<double> iteration_log;
  bool failed = false;
  std::string error;
};

struct SummaryRow {
  std::string dataset;
  std::string features;
  std::string statistic;  // "mean" or "stdev"
  double success_rate = 0;
  double input_vector_size = 0;
  double cl = 0;
  double training_time = 0;
  double prediction_time = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;         // mode-major, folds ascending
  std::vector<SummaryRow> summaries;   // mean then stdev per mode
};

// Everything a fold shares across feature modes.
struct PreparedFold {
  std::vector<Case> training;
  std::vector<Case> validation;
  std::vector<Case> test;
};

struct FoldModel {
  Encoder encoder;
  TrainingResult training;
};

// Schema, clusters, prefixes and training for one fold and feature mode.
// Everything is derived from `fold.training` / `fold.validation` only.
inline FoldModel fit_fold(const ExperimentConfig& config, const PreparedFold& fold,
                          const std::vector<std::string>& selected, const FeatureMode& mode, std::uint64_t seed) {
  AttributeSchema schema = build_schema(fold.training, selected);
  std::optional<ClusterModel> clusters;
  if (mode.uses_clusters()) clusters = fit_clusters(fold.training, schema, mode.max_clusters, derive_seed(seed, 10));
  Encoder encoder(std::move(schema), mode, std::move(clusters));

  auto train_prefixes = sample_prefixes(generate_prefixes(fold.training), config.max_train_prefixes, derive_seed(seed, 11));
  auto valid_prefixes =
      sample_prefixes(generate_prefixes(fold.validation), config.max_validation_prefixes, derive_seed(seed, 12));
  valid_prefixes = sample_prefixes(std::move(valid_prefixes), config.validation_sample, derive_seed(seed, 13));
  auto train_seqs = encode_prefixes(encoder, train_prefixes);
  auto valid_seqs = encode_prefixes(encoder, valid_prefixes);
  auto training = train_model(config, train_seqs, valid_seqs, encoder.width(), encoder.class_count(),
                              derive_seed(seed, 14));
  return {std::move(encoder), std::move(training)};
}

inline std::size_t worker_threads() {
  if (const char* env = std::getenv("FLOWCAST_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

inline std::string dataset_name(const std::string& path) {
  auto slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.rfind('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

// Cross-validated comparison of feature modes on an already loaded log.
inline ExperimentResult run_experiment(const ExperimentConfig& config, const EventLog& raw_log) {
  config.validate();
  const auto modes = config.modes();
  const auto setup_started = std::chrono::steady_clock::now();
  EventLog log = filter_long_cases(raw_log, config.max_case_len);
  const auto selected = select_attributes(log, config.usage_threshold);
  auto folds = make_folds(log.cases, config.folds, derive_seed(config.seed, 100));
  std::vector<PreparedFold> prepared;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto [training, validation] =
        split_train_validation(folds[f].train, config.train_fraction, derive_seed(config.seed, 200, f));
    prepared.push_back({std::move(training), std::move(validation), std::move(folds[f].test)});
  }
  const double shared_setup =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_started).count() /
      static_cast<double>(folds.size());
  const std::string name = dataset_name(config.dataset);

  ExperimentResult result;
  result.rows.resize(modes.size() * folds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < result.rows.size();) {
      const std::size_t m = job / folds.size(), f = job % folds.size();
      ResultRow& row = result.rows[job];
      row.dataset = name;
      row.features = modes[m].label();
      row.fold = f;
      const std::uint64_t seed = derive_seed(config.seed, 300, f, m);
      try {
        auto started = std::chrono::steady_clock::now();
        FoldModel fm = fit_fold(config, prepared[f], selected, modes[m], seed);
        row.training_time =
            shared_setup + std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        row.input_vector_size = fm.encoder.width();
        row.cl = fm.encoder.clusters() ? fm.encoder.clusters()->label_count : 0;
        row.iteration_log = fm.training.validation_log;
        auto tr = test_model(fm.training.model, fm.encoder, prepared[f].test, config, derive_seed(seed, 20));
        row.success_rate = tr.success_rate;
        row.prediction_time = tr.prediction_time;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        row.success_rate = std::numeric_limits<double>::quiet_NaN();
      }
    }
  };
  const std::size_t threads = std::min(worker_threads(), result.rows.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work);
  }

  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<double> rate, width, cl, train_t, pred_t;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& row = result.rows[m * folds.size() + f];
      if (row.failed) continue;
      rate.push_back(row.success_rate);
      width.push_back(static_cast<double>(row.input_vector_size));
      cl.push_back(static_cast<double>(row.cl));
      train_t.push_back(row.training_time);
      pred_t.push_back(row.prediction_time);
    }
    SummaryRow mean_row{name, modes[m].label(), "mean", mean(rate), mean(width), mean(cl), mean(train_t), mean(pred_t)};
    SummaryRow sd_row{name, modes[m].label(), "stdev", sample_stdev(rate), sample_stdev(width), sample_stdev(cl),
                      sample_stdev(train_t), sample_stdev(pred_t)};
    result.summaries.push_back(mean_row);
    result.summaries.push_back(sd_row);
  }
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  EventLog log = load_log(config.dataset, config.format.value_or(format_from_path(config.dataset)));
  return run_experiment(config, log);
}

namespace detail {

inline std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kResultsHeader =
    "dataset,features,fold,success_rate,input_vector_size,cl,training_time_s,prediction_time_s";

// Writes per-fold rows followed by each mode's mean/stdev rows. With
// `include_timings` false the two timing columns are left empty so reruns
// produce byte-identical files.
inline void write_results(std::ostream& out, const ExperimentResult& result, bool include_timings = true) {
  using detail::fixed6;
  out << kResultsHeader << '\n';
  auto timing = [&](double v) { return include_timings ? fixed6(v) : std::string{}; };
  std::size_t s = 0;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    csv::write_row(out, {r.dataset, r.features, std::to_string(r.fold), fixed6(r.success_rate),
                         std::to_string(r.input_vector_size), std::to_string(r.cl),
                         r.failed ? std::string{} : timing(r.training_time),
                         r.failed ? std::string{} : timing(r.prediction_time)});
    const bool last_of_mode = i + 1 == result.rows.size() || result.rows[i + 1].features != r.features;
    while (last_of_mode && s < result.summaries.size() && result.summaries[s].features == r.features) {
      const auto& sr = result.summaries[s++];
      csv::write_row(out, {sr.dataset, sr.features, sr.statistic, fixed6(sr.success_rate), fixed6(sr.input_vector_size),
                           fixed6(sr.cl), timing(sr.training_time), timing(sr.prediction_time)});
    }
  }
}

inline void write_iteration_log(std::ostream& out, const ExperimentResult& result) {
  out << "fold,mode,iteration,validation_accuracy\n";
  for (const auto& r : result.rows)
    for (std::size_t i = 0; i < r.iteration_log.size(); ++i)
      csv::write_row(out, {std::to_string(r.fold), r.features, std::to_string(i + 1), detail::fixed6(r.iteration_log[i])});
}

}  // namespace flowcast
