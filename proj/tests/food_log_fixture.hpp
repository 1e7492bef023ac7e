#pragma once

// The five-event eat/drink example log with its fixed cluster assignment.

#include <string>
#include <vector>

#include "flowcast/clustering.hpp"
#include "flowcast/eventlog.hpp"

namespace food_log {

using namespace flowcast;

inline Event event(std::string caseid, std::string activity, std::string food, std::int64_t ms) {
  return Event{std::move(caseid), std::move(activity), Timestamp{std::chrono::milliseconds{ms}}, {{"food", std::move(food)}}};
}

// Rows 1-2 form case "1", rows 3-5 case "2". Each event carries its row number.
inline std::vector<Case> cases() {
  auto row = [](int r, std::string caseid, std::string activity, std::string food) {
    Event e = event(std::move(caseid), std::move(activity), std::move(food), r);
    e.attrs["row"] = std::to_string(r);
    return e;
  };
  return {{"1", {row(1, "1", "eat", "salad"), row(2, "1", "drink", "water")}},
          {"2", {row(3, "2", "eat", "pizza"), row(4, "2", "eat", "pizza"), row(5, "2", "drink", "soda")}}};
}

// Column order: activities eat, drink; food salad, pizza, water, soda.
inline AttributeSchema schema() {
  return {{"eat", "drink"}, {"food"}, {{"food", {"salad", "pizza", "water", "soda"}}}};
}

// eat: cluster 1 = salad, cluster 2 = pizza. drink: cluster 1 = water, cluster 2 = soda.
inline ClusterModel clusters() {
  auto bucket = [](const std::string& activity, std::vector<std::string> values, Eigen::MatrixXd centroids) {
    AttributeVocab vocab{{"food"}, {Universe(std::move(values))}};
    return BucketClustering(activity, std::move(vocab), std::move(centroids));
  };
  Eigen::MatrixXd eat(2, 2), drink(2, 2);
  eat << 0, 1, 1, 0;    // vocab [pizza, salad]
  drink << 0, 1, 1, 0;  // vocab [soda, water]
  ClusterModel m;
  m.max_cc = 2;
  m.per_activity.emplace("eat", bucket("eat", {"pizza", "salad"}, eat));
  m.per_activity.emplace("drink", bucket("drink", {"soda", "water"}, drink));
  m.recompute_label_count();
  return m;
}

inline std::vector<std::vector<double>> expected_rows() {
  return {{1, 0, 1, 0, 0, 0, 1, 0},
          {0, 1, 0, 0, 1, 0, 1, 0},
          {1, 0, 0, 1, 0, 0, 0, 1},
          {1, 0, 0, 1, 0, 0, 0, 1},
          {0, 1, 0, 0, 0, 1, 0, 1}};
}

}  // namespace food_log
