#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flowcast/eventlog.hpp"
#include "flowcast/onehot.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

struct KMeansResult {
  Eigen::MatrixXd centroids;        // k x dims
  std::vector<std::size_t> labels;  // 0-based, one per input point
  std::vector<double> sse_history;  // SSE after every assignment pass
  std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }
};

namespace detail {

inline constexpr double kVarianceFloor = 1e-9;
inline constexpr std::size_t kMaxKMeansIterations = 300;

// Distinct points with multiplicities. Clustering one-hot data is dominated
// by duplicates, so all routines work on this compressed form.
struct WeightedPoints {
  Eigen::MatrixXd rows;  // n x dims, rows pairwise distinct
  Eigen::VectorXd weights;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(rows.cols()); }
  double total_weight() const { return weights.sum(); }
};

// Collapses duplicate rows. `origin[i]` is the distinct row of input point i.
inline WeightedPoints deduplicate(const Eigen::MatrixXd& points, std::vector<std::size_t>& origin) {
  std::map<std::vector<double>, std::size_t> seen;
  std::vector<std::vector<double>> distinct;
  std::vector<double> counts;
  origin.assign(static_cast<std::size_t>(points.rows()), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::vector<double> row(points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j) row[j] = points(i, j);
    auto [it, inserted] = seen.try_emplace(row, distinct.size());
    if (inserted) {
      distinct.push_back(std::move(row));
      counts.push_back(0.0);
    }
    counts[it->second] += 1.0;
    origin[i] = it->second;
  }
  WeightedPoints wp;
  wp.rows.resize(static_cast<Eigen::Index>(distinct.size()), points.cols());
  wp.weights.resize(static_cast<Eigen::Index>(distinct.size()));
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) wp.rows(i, j) = distinct[i][j];
    wp.weights(i) = counts[i];
  }
  return wp;
}

inline WeightedPoints subset(const WeightedPoints& pts, const std::vector<std::size_t>& idx) {
  WeightedPoints out;
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), pts.rows.cols());
  out.weights.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.rows.row(i) = pts.rows.row(idx[i]);
    out.weights(i) = pts.weights(idx[i]);
  }
  return out;
}

inline std::size_t nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double& dist2) {
  std::size_t best = 0;
  dist2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    double d = (centroids.row(c) - x).squaredNorm();
    if (d < dist2) {
      dist2 = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

// Weighted k-means++ seeding.
inline Eigen::MatrixXd seed_centroids(const WeightedPoints& pts, std::size_t k, Rng& rng) {
  const auto n = pts.size();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), pts.rows.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto pick = [&](const std::vector<double>& mass) {
    double total = 0;
    for (double m : mass) total += m;
    if (!(total > 0)) return std::size_t{0};
    double r = uniform01(rng) * total;
    for (std::size_t i = 0; i < n; ++i) {
      r -= mass[i];
      if (r < 0) return i;
    }
    for (std::size_t i = n; i-- > 0;)
      if (mass[i] > 0) return i;
    return std::size_t{0};
  };
  std::vector<double> mass(n);
  for (std::size_t i = 0; i < n; ++i) mass[i] = pts.weights(i);
  centroids.row(0) = pts.rows.row(pick(mass));
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts.rows.row(i) - centroids.row(c - 1)).squaredNorm());
      mass[i] = pts.weights(i) * d2[i];
    }
    centroids.row(c) = pts.rows.row(pick(mass));
  }
  return centroids;
}

// Lloyd iterations from the given centroids. Empty clusters are reseeded to
// the point farthest from its centroid; if every point already sits on a
// centroid the empty cluster is dropped instead.
inline KMeansResult lloyd(const WeightedPoints& pts, Eigen::MatrixXd centroids) {
  const auto n = pts.size();
  KMeansResult res;
  std::vector<std::size_t> labels(n, std::numeric_limits<std::size_t>::max());
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0;; ++iter) {
    bool changed = false;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto c = nearest(centroids, pts.rows.row(i), dist[i]);
      if (c != labels[i]) changed = true;
      labels[i] = c;
      sse += pts.weights(i) * dist[i];
    }
    res.sse_history.push_back(sse);
    if (!changed || iter + 1 >= kMaxKMeansIterations) break;

    const auto k = static_cast<std::size_t>(centroids.rows());
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centroids.rows(), centroids.cols());
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(labels[i]) += pts.weights(i) * pts.rows.row(i);
      mass[labels[i]] += pts.weights(i);
    }
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < k; ++c) {
      if (mass[c] > 0) {
        centroids.row(c) = sums.row(c) / mass[c];
        keep.push_back(c);
        continue;
      }
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      if (dist[far] > 0) {
        centroids.row(c) = pts.rows.row(far);
        dist[far] = 0;
        keep.push_back(c);
      }
    }
    if (keep.size() != k) {
      Eigen::MatrixXd kept(static_cast<Eigen::Index>(keep.size()), centroids.cols());
      for (std::size_t c = 0; c < keep.size(); ++c) kept.row(c) = centroids.row(keep[c]);
      centroids = std::move(kept);
      std::fill(labels.begin(), labels.end(), std::numeric_limits<std::size_t>::max());
    }
  }
  res.centroids = std::move(centroids);
  res.labels = std::move(labels);
  return res;
}

inline KMeansResult weighted_kmeans(const WeightedPoints& pts, std::size_t k, Rng& rng) {
  k = std::clamp<std::size_t>(k, 1, std::max<std::size_t>(pts.size(), 1));
  return lloyd(pts, seed_centroids(pts, k, rng));
}

// Spherical identical-variance Gaussian BIC of a hard clustering, using the
// per-dimension maximum-likelihood variance.
inline double bic(const WeightedPoints& pts, const KMeansResult& clustering) {
  const double R = pts.total_weight();
  const double M = static_cast<double>(pts.dims());
  const double K = static_cast<double>(clustering.k());
  std::vector<double> mass(clustering.k(), 0.0);
  double sse = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mass[clustering.labels[i]] += pts.weights(i);
    sse += pts.weights(i) * (pts.rows.row(i) - clustering.centroids.row(clustering.labels[i])).squaredNorm();
  }
  double variance = R - K > 0 ? sse / (M * (R - K)) : 0.0;
  variance = std::max(variance, kVarianceFloor);
  double loglik = -0.5 * R * M * std::log(2 * std::numbers::pi * variance) - sse / (2 * variance);
  for (double rn : mass)
    if (rn > 0) loglik += rn * std::log(rn / R);
  const double params = (K - 1) + M * K + 1;
  return loglik - 0.5 * params * std::log(R);
}

// Cluster-count search by BIC-scored 2-means splitting, capped at `max_k`.
inline KMeansResult weighted_xmeans(const WeightedPoints& pts, std::size_t max_k, Rng& rng) {
  max_k = std::max<std::size_t>(max_k, 1);
  KMeansResult current = weighted_kmeans(pts, 1, rng);
  if (pts.dims() == 0) return current;

  while (current.k() < max_k) {
    struct Split {
      std::size_t cluster;
      double gain;
      Eigen::MatrixXd children;
    };
    std::vector<Split> splits;
    for (std::size_t c = 0; c < current.k(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (current.labels[i] == c) members.push_back(i);
      if (members.size() < 2) continue;
      WeightedPoints region = subset(pts, members);
      KMeansResult parent;
      parent.centroids = current.centroids.row(c);
      parent.labels.assign(region.size(), 0);
      KMeansResult children = weighted_kmeans(region, 2, rng);
      if (children.k() < 2) continue;
      double gain = bic(region, children) - bic(region, parent);
      if (gain > 0) splits.push_back({c, gain, children.centroids});
    }
    if (splits.empty()) break;
    std::stable_sort(splits.begin(), splits.end(), [](const Split& a, const Split& b) { return a.gain > b.gain; });

    std::size_t budget = max_k - current.k();
    std::vector<const Split*> chosen(current.k(), nullptr);
    for (const auto& s : splits) {
      if (budget == 0) break;
      chosen[s.cluster] = &s;
      --budget;
    }
    std::vector<Eigen::RowVectorXd> next;
    for (std::size_t c = 0; c < current.k(); ++c) {
      if (chosen[c]) {
        next.push_back(chosen[c]->children.row(0));
        next.push_back(chosen[c]->children.row(1));
      } else {
        next.push_back(current.centroids.row(c));
      }
    }
    Eigen::MatrixXd init(static_cast<Eigen::Index>(next.size()), pts.rows.cols());
    for (std::size_t c = 0; c < next.size(); ++c) init.row(c) = next[c];
    auto refined = lloyd(pts, std::move(init));
    if (refined.k() <= current.k()) {
      current = std::move(refined);
      break;
    }
    current = std::move(refined);
  }
  return current;
}

inline KMeansResult expand(const KMeansResult& compressed, const std::vector<std::size_t>& origin) {
  KMeansResult out;
  out.centroids = compressed.centroids;
  out.sse_history = compressed.sse_history;
  out.labels.reserve(origin.size());
  for (auto o : origin) out.labels.push_back(compressed.labels[o]);
  return out;
}

}  // namespace detail

// Plain k-means with k-means++ seeding. `points` is one point per row; k is
// reduced to the number of distinct points when larger.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> origin;
  auto pts = detail::deduplicate(points, origin);
  Rng rng(seed);
  return detail::expand(detail::weighted_kmeans(pts, k, rng), origin);
}

// X-means: k chosen in [1, max_k] by BIC-guided splitting.
inline KMeansResult xmeans(const Eigen::MatrixXd& points, std::size_t max_k, std::uint64_t seed) {
  std::vector<std::size_t> origin;
  auto pts = detail::deduplicate(points, origin);
  Rng rng(seed);
  return detail::expand(detail::weighted_xmeans(pts, max_k, rng), origin);
}

// One activity's clustering: the attribute vocabulary seen in its training
// bucket and the centroids found over those one-hot vectors.
class BucketClustering {
 public:
  BucketClustering() = default;
  BucketClustering(std::string activity, AttributeVocab vocab, Eigen::MatrixXd centroids)
      : activity_(std::move(activity)), vocab_(std::move(vocab)), centroids_(std::move(centroids)) {
    norms_ = centroids_.rowwise().squaredNorm();
  }

  const std::string& activity() const { return activity_; }
  const AttributeVocab& vocab() const { return vocab_; }
  const Eigen::MatrixXd& centroids() const { return centroids_; }
  std::size_t k() const { return static_cast<std::size_t>(centroids_.rows()); }

  // 1-based label of the centroid nearest to the event's bucket vector.
  std::size_t assign(const Event& e) const {
    std::vector<std::size_t> slots;
    append_attribute_slots(e, vocab_, 0, slots);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids_.rows(); ++c) {
      double dot = 0;
      for (auto s : slots) dot += centroids_(c, static_cast<Eigen::Index>(s));
      double d = norms_(c) - 2 * dot + static_cast<double>(slots.size());
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::size_t>(c);
      }
    }
    return best + 1;
  }

  bool operator==(const BucketClustering& o) const {
    return activity_ == o.activity_ && vocab_ == o.vocab_ && centroids_.rows() == o.centroids_.rows() &&
           centroids_.cols() == o.centroids_.cols() && centroids_ == o.centroids_;
  }

 private:
  std::string activity_;
  AttributeVocab vocab_;
  Eigen::MatrixXd centroids_;
  Eigen::VectorXd norms_;
};

struct ClusterModel {
  std::map<std::string, BucketClustering> per_activity;
  std::size_t max_cc = 1;
  std::size_t label_count = 0;  // cl: largest k over all activities

  // 1-based cluster label, or nullopt when the activity was never seen in training.
  std::optional<std::size_t> assign(const Event& e) const {
    auto it = per_activity.find(e.activity);
    if (it == per_activity.end()) return std::nullopt;
    return it->second.assign(e);
  }

  void recompute_label_count() {
    label_count = 0;
    for (const auto& [_, b] : per_activity) label_count = std::max(label_count, b.k());
  }

  bool operator==(const ClusterModel&) const = default;
};

// Clusters every activity bucket of the training cases independently.
inline ClusterModel fit_clusters(const std::vector<Case>& training_cases, const AttributeSchema& schema,
                                 std::size_t max_cc, std::uint64_t seed) {
  if (max_cc < 1) throw ConfigError("fit_clusters: max_cc must be >= 1");
  ClusterModel model;
  model.max_cc = max_cc;
  for (const auto& [activity, bucket] : bucket_events(training_cases)) {
    AttributeVocab vocab = bucket_vocab(bucket, schema.attributes);
    const auto dims = static_cast<Eigen::Index>(vocab.width());
    if (dims == 0) {
      model.per_activity.emplace(activity,
                                 BucketClustering(activity, std::move(vocab), Eigen::MatrixXd::Zero(1, 0)));
      continue;
    }
    std::map<std::vector<std::size_t>, double> patterns;
    std::vector<std::size_t> slots;
    for (const Event* e : bucket) {
      slots.clear();
      append_attribute_slots(*e, vocab, 0, slots);
      patterns[slots] += 1.0;
    }
    detail::WeightedPoints pts;
    pts.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(patterns.size()), dims);
    pts.weights.resize(static_cast<Eigen::Index>(patterns.size()));
    Eigen::Index row = 0;
    for (const auto& [active, count] : patterns) {
      for (auto s : active) pts.rows(row, static_cast<Eigen::Index>(s)) = 1.0;
      pts.weights(row++) = count;
    }
    Rng rng(derive_seed(seed, activity));
    auto result = detail::weighted_xmeans(pts, max_cc, rng);
    model.per_activity.emplace(activity, BucketClustering(activity, std::move(vocab), std::move(result.centroids)));
  }
  model.recompute_label_count();
  return model;
}

}  // namespace flowcast
