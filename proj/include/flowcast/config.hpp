#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "flowcast/errors.hpp"
#include "flowcast/harness.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

// Raised for config files that are not valid JSON; carries the location.
struct ConfigSyntaxError : ConfigError {
  ConfigSyntaxError(const std::string& what, std::size_t line, std::size_t column)
      : ConfigError(what), line(line), column(column) {}
  std::size_t line;
  std::size_t column;
};

namespace detail {

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "dataset",    "format",         "features",   "max_clusters",   "folds",
      "train_fraction", "iterations", "total_epochs", "batch_size",   "hidden_dim",
      "learning_rate", "max_case_len", "max_train_prefixes", "max_validation_prefixes",
      "validation_sample", "max_test_traces", "usage_threshold", "seed"};
  return keys;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("");
      if (it->is_number_unsigned()) {
        out = it->template get<T>();
      } else {
        auto v = it->template get<std::int64_t>();
        if (v < 0) throw ConfigError(std::string("config: '") + key + "' must not be negative");
        out = static_cast<T>(v);
      }
    } else {
      out = it->template get<T>();
    }
  } catch (const ConfigError& e) {
    if (*e.what()) throw;
    throw ConfigError(std::string("config: '") + key + "' has the wrong type");
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: '") + key + "' has the wrong type");
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!detail::config_keys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
  if (!j.contains("dataset")) throw ConfigError("config: missing required key 'dataset'");

  ExperimentConfig c;
  detail::read_field(j, "dataset", c.dataset);
  if (j.contains("format")) {
    std::string f;
    detail::read_field(j, "format", f);
    if (f == "csv") c.format = LogFormat::Csv;
    else if (f == "xes") c.format = LogFormat::Xes;
    else throw ConfigError("config: 'format' must be \"csv\" or \"xes\"");
  }
  detail::read_field(j, "features", c.features);
  detail::read_field(j, "max_clusters", c.max_clusters);
  detail::read_field(j, "folds", c.folds);
  detail::read_field(j, "train_fraction", c.train_fraction);
  detail::read_field(j, "iterations", c.iterations);
  detail::read_field(j, "total_epochs", c.total_epochs);
  detail::read_field(j, "batch_size", c.batch_size);
  detail::read_field(j, "hidden_dim", c.hidden_dim);
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "max_case_len", c.max_case_len);
  detail::read_field(j, "max_train_prefixes", c.max_train_prefixes);
  detail::read_field(j, "max_validation_prefixes", c.max_validation_prefixes);
  detail::read_field(j, "validation_sample", c.validation_sample);
  detail::read_field(j, "max_test_traces", c.max_test_traces);
  detail::read_field(j, "usage_threshold", c.usage_threshold);
  detail::read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"dataset", c.dataset},
                   {"features", c.features},
                   {"max_clusters", c.max_clusters},
                   {"folds", c.folds},
                   {"train_fraction", c.train_fraction},
                   {"iterations", c.iterations},
                   {"total_epochs", c.total_epochs},
                   {"batch_size", c.batch_size},
                   {"hidden_dim", c.hidden_dim},
                   {"learning_rate", c.learning_rate},
                   {"max_case_len", c.max_case_len},
                   {"max_train_prefixes", c.max_train_prefixes},
                   {"max_validation_prefixes", c.max_validation_prefixes},
                   {"validation_sample", c.validation_sample},
                   {"max_test_traces", c.max_test_traces},
                   {"usage_threshold", c.usage_threshold},
                   {"seed", c.seed}};
  if (c.format) j["format"] = *c.format == LogFormat::Csv ? "csv" : "xes";
  return j;
}

// Stable fingerprint of every configuration value (hex FNV-1a of the canonical JSON).
inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
  return buf;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigSyntaxError("config: invalid JSON at line " + std::to_string(line) + ", column " +
                                std::to_string(column) + ": " + e.what(),
                            line, column);
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str());
  // Relative dataset paths are resolved against the config file's directory.
  std::filesystem::path dataset(c.dataset);
  if (dataset.is_relative()) c.dataset = (std::filesystem::path(path).parent_path() / dataset).lexically_normal().string();
  return c;
}

}  // namespace flowcast
