#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>

#include <Eigen/Dense>

namespace flowcast {

struct AdamHyperparameters {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Any fixed-size collection of Eigen matrices indexed 0..size()-1.
template <typename Params>
concept ParameterSet = requires(Params p, const Params cp, std::size_t i) {
  { p[i] } -> std::same_as<Eigen::MatrixXd&>;
  { cp[i] } -> std::same_as<const Eigen::MatrixXd&>;
  { Params::size() } -> std::convertible_to<std::size_t>;
};

template <ParameterSet Params>
struct AdamState {
  AdamHyperparameters hyper;
  Params first_moment;
  Params second_moment;
  std::size_t step = 0;

  AdamState(const Params& like, AdamHyperparameters h = {}) : hyper(h), first_moment(like), second_moment(like) {
    for (std::size_t i = 0; i < Params::size(); ++i) {
      first_moment[i].setZero();
      second_moment[i].setZero();
    }
  }
};

template <ParameterSet Params>
void adam_step(Params& params, const Params& grads, AdamState<Params>& state) {
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < Params::size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    params[i].array() -= h.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + h.epsilon);
  }
}

}  // namespace flowcast
