#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowcast/clustering.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/eventlog.hpp"
#include "flowcast/onehot.hpp"

namespace flowcast {

enum class FeatureKind { None, Clust, Raw, Both };

struct FeatureMode {
  FeatureKind kind = FeatureKind::None;
  std::size_t max_clusters = 0;  // N in ClustN / BothN

  bool uses_clusters() const { return kind == FeatureKind::Clust || kind == FeatureKind::Both; }
  bool uses_raw() const { return kind == FeatureKind::Raw || kind == FeatureKind::Both; }

  // "None", "Raw", "Clust20", "Both40".
  std::string label() const {
    switch (kind) {
      case FeatureKind::None: return "None";
      case FeatureKind::Raw: return "Raw";
      case FeatureKind::Clust: return "Clust" + std::to_string(max_clusters);
      case FeatureKind::Both: return "Both" + std::to_string(max_clusters);
    }
    return {};
  }

  static FeatureMode none() { return {FeatureKind::None, 0}; }
  static FeatureMode raw() { return {FeatureKind::Raw, 0}; }
  static FeatureMode clust(std::size_t n) { return {FeatureKind::Clust, n}; }
  static FeatureMode both(std::size_t n) { return {FeatureKind::Both, n}; }

  static FeatureMode parse(const std::string& text) {
    auto with_count = [&](std::size_t prefix, FeatureKind kind) {
      std::string digits = text.substr(prefix);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("feature mode '" + text + "' needs a positive cluster count");
      auto n = std::stoull(digits);
      if (n < 1) throw ConfigError("feature mode '" + text + "' needs a positive cluster count");
      return FeatureMode{kind, static_cast<std::size_t>(n)};
    };
    if (text == "None") return none();
    if (text == "Raw") return raw();
    if (text.rfind("Clust", 0) == 0) return with_count(5, FeatureKind::Clust);
    if (text.rfind("Both", 0) == 0) return with_count(4, FeatureKind::Both);
    throw ConfigError("unknown feature mode '" + text + "'");
  }

  bool operator==(const FeatureMode&) const = default;
};

inline constexpr std::size_t kUnknownTarget = std::numeric_limits<std::size_t>::max();

// One prefix, encoded. Steps are binary, so each step stores its active columns.
struct EncodedSequence {
  std::vector<std::vector<std::size_t>> steps;
  std::size_t width = 0;
  std::size_t target = kUnknownTarget;  // |activities| is the finished class
  std::string caseid;
  std::size_t prefix_length = 0;

  std::size_t length() const { return steps.size(); }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(steps.size()),
                                              static_cast<Eigen::Index>(width));
    for (std::size_t t = 0; t < steps.size(); ++t)
      for (auto c : steps[t]) m(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = 1.0;
    return m;
  }
};

// Builds per-event input vectors: activity block, raw attribute block, then
// cluster block, with blocks present according to the feature mode.
class Encoder {
 public:
  Encoder(AttributeSchema schema, FeatureMode mode, std::optional<ClusterModel> clusters = std::nullopt)
      : schema_(std::move(schema)),
        mode_(mode),
        clusters_(std::move(clusters)),
        activities_(schema_.activities),
        raw_vocab_(global_vocab(schema_)) {
    if (mode_.uses_clusters()) {
      if (mode_.max_clusters < 1) throw ConfigError("encoder: " + mode_.label() + " needs max_clusters >= 1");
      if (!clusters_) throw ConfigError("encoder: " + mode_.label() + " requires a cluster model");
    }
    width_ = activities_.size();
    if (mode_.uses_raw()) {
      raw_offset_ = width_;
      width_ += raw_vocab_.width();
    }
    if (mode_.uses_clusters()) {
      cluster_offset_ = width_;
      width_ += clusters_->label_count;
    }
  }

  const AttributeSchema& schema() const { return schema_; }
  const FeatureMode& mode() const { return mode_; }
  const std::optional<ClusterModel>& clusters() const { return clusters_; }
  std::size_t width() const { return width_; }
  std::size_t class_count() const { return activities_.size() + 1; }
  std::size_t finished_class() const { return activities_.size(); }
  const std::vector<std::string>& activities() const { return activities_.values(); }

  std::optional<std::size_t> activity_class(const std::string& activity) const { return activities_.slot(activity); }

  // Active columns of the event's input vector, ascending.
  std::vector<std::size_t> active_columns(const Event& e) const {
    std::vector<std::size_t> cols;
    auto act = activities_.slot(e.activity);
    if (act) cols.push_back(*act);
    if (mode_.uses_raw()) append_attribute_slots(e, raw_vocab_, raw_offset_, cols);
    if (mode_.uses_clusters() && act) {
      if (auto label = clusters_->assign(e)) cols.push_back(cluster_offset_ + *label - 1);
    }
    return cols;
  }

  std::vector<double> encode_event(const Event& e) const {
    std::vector<double> v(width_, 0.0);
    for (auto c : active_columns(e)) v[c] = 1.0;
    return v;
  }

  // `next_activity` == nullopt means the prefix is the whole case.
  EncodedSequence encode_prefix(std::span<const Event> prefix, const std::optional<std::string>& next_activity) const {
    EncodedSequence seq;
    seq.width = width_;
    seq.steps.reserve(prefix.size());
    for (const auto& e : prefix) seq.steps.push_back(active_columns(e));
    if (!next_activity) {
      seq.target = finished_class();
    } else if (auto slot = activities_.slot(*next_activity)) {
      seq.target = *slot;
    }
    if (!prefix.empty()) seq.caseid = prefix.front().caseid;
    seq.prefix_length = prefix.size();
    return seq;
  }

  // Name of an output class, "FINISHED" for the end-of-case class.
  std::string class_name(std::size_t cls) const {
    return cls < activities_.size() ? activities_[cls] : std::string("FINISHED");
  }

 private:
  AttributeSchema schema_;
  FeatureMode mode_;
  std::optional<ClusterModel> clusters_;
  Universe activities_;
  AttributeVocab raw_vocab_;
  std::size_t width_ = 0;
  std::size_t raw_offset_ = 0;
  std::size_t cluster_offset_ = 0;
};

inline std::vector<double> encode_event(const Event& e, const Encoder& enc) { return enc.encode_event(e); }

}  // namespace flowcast
