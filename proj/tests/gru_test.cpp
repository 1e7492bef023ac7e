#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flowcast/gru.hpp"
#include "oracles.hpp"

using namespace flowcast;

namespace {

GruNetwork random_network(std::size_t D, std::size_t H, std::size_t C, std::uint64_t seed) {
  GruNetwork net = GruNetwork::initialized(D, H, C, seed);
  std::mt19937 gen(static_cast<unsigned>(seed));
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto* b : {&net.params().bz, &net.params().br, &net.params().bh, &net.params().bo})
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = u(gen);
  return net;
}

Batch dense_batch(std::size_t D, std::vector<Eigen::Index> lengths, std::vector<std::size_t> targets, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Eigen::MatrixXd> seqs;
  for (auto len : lengths) {
    Eigen::MatrixXd s(len, static_cast<Eigen::Index>(D));
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = n(gen);
    seqs.push_back(s);
  }
  return make_batch(seqs, targets);
}

double sigmoid(double a) { return 1 / (1 + std::exp(-a)); }

}  // namespace

TEST(Gru, GradientsMatchFiniteDifferences) {
  GruNetwork net = random_network(3, 4, 3, 17);
  Batch batch = dense_batch(3, {3, 5}, {2, 0}, 5);
  EXPECT_LT(oracle::max_gradient_error(net, batch), 1e-4);
}

TEST(Gru, GradientsMatchFiniteDifferencesOnOneHotPrefixes) {
  EncodedSequence a{{{0}, {2, 4}, {1}, {3}}, 5, 1, "a", 4};
  EncodedSequence b{{{4}, {0, 3}}, 5, 2, "b", 2};
  EncodedSequence c{{{1}, {1}, {2}, {0, 4}, {3}, {2}}, 5, 0, "c", 6};
  const EncodedSequence* seqs[] = {&a, &b, &c};
  GruNetwork net = random_network(5, 6, 3, 3);
  EXPECT_LT(oracle::max_gradient_error(net, make_batch(seqs, 5)), 1e-4);
}

TEST(Gru, ScalarRecurrenceByHand) {
  GruNetwork net(1, 1, 2);
  auto& p = net.params();
  p.Wz(0, 0) = 0.5, p.Uz(0, 0) = -0.3, p.bz(0) = 0.1;
  p.Wr(0, 0) = -0.7, p.Ur(0, 0) = 0.2, p.br(0) = 0.05;
  p.Wh(0, 0) = 0.9, p.Uh(0, 0) = 0.4, p.bh(0) = -0.2;
  p.Wo << 1.5, -0.5;
  p.bo << 0.1, 0.3;
  const std::vector<double> xs{1.0, -2.0, 0.5};

  double h = 0;
  for (double x : xs) {
    double z = sigmoid(0.5 * x - 0.3 * h + 0.1);
    double r = sigmoid(-0.7 * x + 0.2 * h + 0.05);
    double c = std::tanh(0.9 * x + 0.4 * (r * h) - 0.2);
    h = (1 - z) * h + z * c;
  }
  const double l0 = 1.5 * h + 0.1, l1 = -0.5 * h + 0.3;
  const double p0 = std::exp(l0) / (std::exp(l0) + std::exp(l1));

  Eigen::MatrixXd seq(3, 1);
  seq << 1.0, -2.0, 0.5;
  std::vector<Eigen::MatrixXd> seqs{seq};
  std::vector<std::size_t> targets{0};
  auto tr = forward(net, make_batch(seqs, targets));
  EXPECT_NEAR(tr.hidden.back()(0, 0), h, 1e-14);
  EXPECT_NEAR(tr.probs(0, 0), p0, 1e-14);
  EXPECT_NEAR(loss_and_gradients(net, make_batch(seqs, targets)).loss, -std::log(p0), 1e-12);
}

TEST(Gru, PaddingDoesNotChangeShortSequence) {
  GruNetwork net = random_network(3, 4, 3, 8);
  Batch both = dense_batch(3, {3, 5}, {0, 1}, 11);
  Batch alone = dense_batch(3, {3, 5}, {0, 1}, 11);
  // Rebuild the first sequence as a one-element batch.
  Eigen::MatrixXd first(3, 3);
  for (Eigen::Index t = 0; t < 3; ++t) first.row(t) = Eigen::MatrixXd(alone.inputs[t]).col(0).transpose();
  std::vector<Eigen::MatrixXd> seqs{first};
  std::vector<std::size_t> targets{0};
  auto solo = forward(net, make_batch(seqs, targets));
  auto padded = forward(net, both);
  EXPECT_LT((padded.probs.col(0) - solo.probs.col(0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((padded.hidden.back().col(0) - solo.hidden.back().col(0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gru, ProbabilitiesFormDistributions) {
  GruNetwork net = random_network(3, 5, 4, 2);
  Batch batch = dense_batch(3, {1, 4, 7}, {0, 1, 3}, 3);
  auto tr = forward(net, batch);
  ASSERT_EQ(tr.probs.rows(), 4);
  ASSERT_EQ(tr.probs.cols(), 3);
  for (Eigen::Index b = 0; b < 3; ++b) {
    EXPECT_NEAR(tr.probs.col(b).sum(), 1.0, 1e-12);
    EXPECT_GT(tr.probs.col(b).minCoeff(), 0.0);
  }
}

TEST(Gru, NonFiniteParametersAreReported) {
  GruNetwork net = random_network(3, 4, 3, 1);
  net.params().Uh(1, 2) = std::numeric_limits<double>::quiet_NaN();
  Batch batch = dense_batch(3, {2}, {0}, 1);
  try {
    forward(net, batch);
    FAIL() << "expected NumericFault";
  } catch (const NumericFault& e) {
    EXPECT_NE(std::string(e.what()).find("Uh"), std::string::npos) << e.what();
  }
}

TEST(Gru, InitializationRangeAndZeroBiases) {
  const std::size_t H = 16;
  auto net = GruNetwork::initialized(7, H, 5, 42);
  const double bound = 1 / std::sqrt(static_cast<double>(H));
  const auto& p = net.params();
  for (const auto* W : {&p.Wz, &p.Uz, &p.Wr, &p.Ur, &p.Wh, &p.Uh, &p.Wo})
    EXPECT_LE(W->cwiseAbs().maxCoeff(), bound);
  for (const auto* b : {&p.bz, &p.br, &p.bh, &p.bo}) EXPECT_EQ(b->cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(net, GruNetwork::initialized(7, H, 5, 42));
  EXPECT_FALSE(net == GruNetwork::initialized(7, H, 5, 43));
}

TEST(Gru, ClipGradientsScalesGlobalNorm) {
  auto g = GruParameters::zeros(2, 2, 2);
  g.Wz(0, 0) = 6;
  g.bo(1) = 8;
  EXPECT_DOUBLE_EQ(clip_gradients(g, 5.0), 10.0);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(g.Wz(0, 0), 3.0);
  auto small = GruParameters::zeros(2, 2, 2);
  small.bz(0) = 1;
  clip_gradients(small, 5.0);
  EXPECT_DOUBLE_EQ(small.bz(0), 1.0);
}

TEST(Gru, ArgmaxTiesGoToLowestIndex) {
  Eigen::VectorXd p(4);
  p << 0.1, 0.4, 0.4, 0.1;
  EXPECT_EQ(argmax(p), 1u);
}

TEST(Gru, PredictMatchesBatchPrediction) {
  GruNetwork net = random_network(4, 3, 3, 6);
  EncodedSequence a{{{0}, {1}, {2}, {3}}, 4, 0, "a", 4};
  EncodedSequence b{{{3}, {3}}, 4, 1, "b", 2};
  const EncodedSequence* seqs[] = {&a, &b};
  auto batch = predict_batch(net, seqs);
  auto single = predict(net, b);
  EXPECT_EQ(batch[1].cls, single.cls);
  EXPECT_LT((batch[1].probabilities - single.probabilities).cwiseAbs().maxCoeff(), 1e-15);
}
