#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "flowcast/encoding.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

// Trainable tensors of a one-layer GRU with a softmax head. Biases are stored
// as single-column matrices so every tensor has the same type.
struct GruParameters {
  static constexpr std::size_t kCount = 11;
  static constexpr std::array<const char*, kCount> kNames{"Wz", "Uz", "bz", "Wr", "Ur", "br",
                                                         "Wh", "Uh", "bh", "Wo", "bo"};

  Eigen::MatrixXd Wz, Uz, bz;  // update gate
  Eigen::MatrixXd Wr, Ur, br;  // reset gate
  Eigen::MatrixXd Wh, Uh, bh;  // candidate state
  Eigen::MatrixXd Wo, bo;      // output head

  static GruParameters zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim) {
    const auto D = static_cast<Eigen::Index>(input_dim);
    const auto H = static_cast<Eigen::Index>(hidden_dim);
    const auto C = static_cast<Eigen::Index>(output_dim);
    GruParameters p;
    for (auto* W : {&p.Wz, &p.Wr, &p.Wh}) *W = Eigen::MatrixXd::Zero(H, D);
    for (auto* U : {&p.Uz, &p.Ur, &p.Uh}) *U = Eigen::MatrixXd::Zero(H, H);
    for (auto* b : {&p.bz, &p.br, &p.bh}) *b = Eigen::MatrixXd::Zero(H, 1);
    p.Wo = Eigen::MatrixXd::Zero(C, H);
    p.bo = Eigen::MatrixXd::Zero(C, 1);
    return p;
  }

  static constexpr std::size_t size() { return kCount; }

  Eigen::MatrixXd& operator[](std::size_t i) { return *members()[i]; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return *const_cast<GruParameters*>(this)->members()[i]; }

  GruParameters zeros_like() const {
    GruParameters z = *this;
    for (std::size_t i = 0; i < kCount; ++i) z[i].setZero();
    return z;
  }

  double squared_norm() const {
    double s = 0;
    for (std::size_t i = 0; i < kCount; ++i) s += (*this)[i].squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < kCount; ++i)
      if (!(*this)[i].allFinite()) return false;
    return true;
  }

  bool operator==(const GruParameters& o) const {
    for (std::size_t i = 0; i < kCount; ++i) {
      const auto& a = (*this)[i];
      const auto& b = o[i];
      if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
    }
    return true;
  }

 private:
  std::array<Eigen::MatrixXd*, kCount> members() { return {&Wz, &Uz, &bz, &Wr, &Ur, &br, &Wh, &Uh, &bh, &Wo, &bo}; }
};

class GruNetwork {
 public:
  GruNetwork() = default;
  GruNetwork(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim)
      : input_dim_(input_dim),
        hidden_dim_(hidden_dim),
        output_dim_(output_dim),
        params_(GruParameters::zeros(input_dim, hidden_dim, output_dim)) {}

  // Weights uniform in [-1/sqrt(H), 1/sqrt(H)], biases zero.
  static GruNetwork initialized(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                                std::uint64_t seed) {
    GruNetwork net(input_dim, hidden_dim, output_dim);
    Rng rng(seed);
    const double scale = std::sqrt(1.0 / static_cast<double>(hidden_dim));
    auto& p = net.params_;
    for (auto* W : {&p.Wz, &p.Uz, &p.Wr, &p.Ur, &p.Wh, &p.Uh, &p.Wo})
      for (Eigen::Index j = 0; j < W->cols(); ++j)
        for (Eigen::Index i = 0; i < W->rows(); ++i) (*W)(i, j) = (2 * uniform01(rng) - 1) * scale;
    return net;
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  GruParameters& params() { return params_; }
  const GruParameters& params() const { return params_; }

  bool operator==(const GruNetwork&) const = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  std::size_t output_dim_ = 0;
  GruParameters params_;
};

// Left-aligned, end-padded mini-batch. inputs[t] is D x B; mask is B x T.
struct Batch {
  std::vector<Eigen::SparseMatrix<double>> inputs;
  Eigen::MatrixXd mask;
  std::vector<std::size_t> targets;

  std::size_t size() const { return static_cast<std::size_t>(mask.rows()); }
  std::size_t steps() const { return inputs.size(); }
};

inline Batch make_batch(std::span<const EncodedSequence* const> seqs, std::size_t width) {
  Batch batch;
  const auto B = static_cast<Eigen::Index>(seqs.size());
  std::size_t T = 0;
  for (const auto* s : seqs) T = std::max(T, s->length());
  batch.mask = Eigen::MatrixXd::Zero(B, static_cast<Eigen::Index>(T));
  batch.inputs.reserve(T);
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t t = 0; t < T; ++t) {
    triplets.clear();
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto* s = seqs[b];
      if (t >= s->length()) continue;
      batch.mask(b, static_cast<Eigen::Index>(t)) = 1.0;
      for (auto c : s->steps[t]) triplets.emplace_back(static_cast<Eigen::Index>(c), b, 1.0);
    }
    Eigen::SparseMatrix<double> x(static_cast<Eigen::Index>(width), B);
    x.setFromTriplets(triplets.begin(), triplets.end());
    batch.inputs.push_back(std::move(x));
  }
  for (const auto* s : seqs) batch.targets.push_back(s->target);
  return batch;
}

// Dense sequences (T_i x D each) for real-valued inputs.
inline Batch make_batch(std::span<const Eigen::MatrixXd> seqs, std::span<const std::size_t> targets) {
  Batch batch;
  const auto B = static_cast<Eigen::Index>(seqs.size());
  Eigen::Index T = 0, D = 0;
  for (const auto& s : seqs) {
    T = std::max(T, s.rows());
    D = std::max(D, s.cols());
  }
  batch.mask = Eigen::MatrixXd::Zero(B, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(D, B);
    for (Eigen::Index b = 0; b < B; ++b)
      if (t < seqs[b].rows()) {
        dense.col(b) = seqs[b].row(t).transpose();
        batch.mask(b, t) = 1.0;
      }
    batch.inputs.push_back(dense.sparseView(0.0, 0.0));
  }
  batch.targets.assign(targets.begin(), targets.end());
  return batch;
}

// Activations kept for backpropagation. Matrices are H x B (probs C x B).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> hidden;  // steps()+1 entries, hidden[0] = 0
  std::vector<Eigen::MatrixXd> update, reset, candidate;
  Eigen::MatrixXd probs;

  // B x C, one distribution per sequence.
  Eigen::MatrixXd probabilities() const { return probs.transpose(); }
};

namespace detail {

inline Eigen::ArrayXXd sigmoid(const Eigen::MatrixXd& a) { return 1.0 / (1.0 + (-a.array()).exp()); }

[[noreturn]] inline void numeric_fault(const GruNetwork& net, const std::string& where) {
  std::string bad;
  for (std::size_t i = 0; i < GruParameters::size(); ++i)
    if (!net.params()[i].allFinite()) bad += std::string(bad.empty() ? "" : ", ") + GruParameters::kNames[i];
  throw NumericFault("non-finite values in " + where +
                     (bad.empty() ? std::string("; all parameters finite") : "; non-finite parameters: " + bad));
}

}  // namespace detail

inline ForwardTrace forward(const GruNetwork& net, const Batch& batch) {
  const auto& p = net.params();
  const auto H = static_cast<Eigen::Index>(net.hidden_dim());
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (batch.targets.size() != batch.size()) throw Error("forward: target count does not match batch size");
  ForwardTrace tr;
  tr.hidden.reserve(batch.steps() + 1);
  tr.hidden.push_back(Eigen::MatrixXd::Zero(H, B));
  for (std::size_t t = 0; t < batch.steps(); ++t) {
    const auto& x = batch.inputs[t];
    if (x.rows() != static_cast<Eigen::Index>(net.input_dim()))
      throw Error("forward: input width " + std::to_string(x.rows()) + " does not match network input " +
                  std::to_string(net.input_dim()));
    const Eigen::MatrixXd& h = tr.hidden.back();
    auto affine = [&](const Eigen::MatrixXd& W, const Eigen::MatrixXd& U, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& state) {
      Eigen::MatrixXd a = W * x;
      a.noalias() += U * state;
      a.colwise() += b.col(0);
      return a;
    };
    Eigen::MatrixXd z = detail::sigmoid(affine(p.Wz, p.Uz, p.bz, h)).matrix();
    Eigen::MatrixXd r = detail::sigmoid(affine(p.Wr, p.Ur, p.br, h)).matrix();
    Eigen::MatrixXd rh = (r.array() * h.array()).matrix();
    Eigen::MatrixXd c = affine(p.Wh, p.Uh, p.bh, rh).array().tanh().matrix();
    Eigen::ArrayXXd next = (1.0 - z.array()) * h.array() + z.array() * c.array();
    Eigen::RowVectorXd m = batch.mask.col(static_cast<Eigen::Index>(t)).transpose();
    Eigen::MatrixXd h_next =
        (next.rowwise() * m.array() + h.array().rowwise() * (1.0 - m.array())).matrix();
    tr.update.push_back(std::move(z));
    tr.reset.push_back(std::move(r));
    tr.candidate.push_back(std::move(c));
    tr.hidden.push_back(std::move(h_next));
  }
  Eigen::MatrixXd logits = p.Wo * tr.hidden.back();
  logits.colwise() += p.bo.col(0);
  Eigen::RowVectorXd top = logits.colwise().maxCoeff();
  Eigen::MatrixXd e = (logits.rowwise() - top).array().exp().matrix();
  Eigen::RowVectorXd total = e.colwise().sum();
  tr.probs = e.array().rowwise() / total.array();
  if (!tr.probs.allFinite()) detail::numeric_fault(net, "forward pass");
  return tr;
}

struct LossAndGradients {
  double loss = 0;
  GruParameters gradients;
};

// Mean categorical cross-entropy and its gradient by backpropagation through time.
inline LossAndGradients loss_and_gradients(const GruNetwork& net, const Batch& batch) {
  const auto& p = net.params();
  ForwardTrace tr = forward(net, batch);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto C = static_cast<Eigen::Index>(net.output_dim());

  LossAndGradients out;
  out.gradients = p.zeros_like();
  auto& g = out.gradients;

  Eigen::MatrixXd dlogits = tr.probs;
  for (Eigen::Index b = 0; b < B; ++b) {
    auto target = static_cast<Eigen::Index>(batch.targets[b]);
    if (target < 0 || target >= C) throw Error("loss_and_gradients: target class out of range");
    out.loss -= std::log(tr.probs(target, b));
    dlogits(target, b) -= 1.0;
  }
  out.loss /= static_cast<double>(B);
  dlogits /= static_cast<double>(B);

  g.Wo = dlogits * tr.hidden.back().transpose();
  g.bo = dlogits.rowwise().sum();
  Eigen::MatrixXd dh = p.Wo.transpose() * dlogits;

  for (std::size_t t = batch.steps(); t-- > 0;) {
    const auto& x = batch.inputs[t];
    const Eigen::ArrayXXd h = tr.hidden[t].array();
    const Eigen::ArrayXXd z = tr.update[t].array();
    const Eigen::ArrayXXd r = tr.reset[t].array();
    const Eigen::ArrayXXd c = tr.candidate[t].array();
    Eigen::RowVectorXd m = batch.mask.col(static_cast<Eigen::Index>(t)).transpose();

    Eigen::ArrayXXd dnext = dh.array().rowwise() * m.array();
    Eigen::ArrayXXd dprev = dh.array().rowwise() * (1.0 - m.array());
    dprev += dnext * (1.0 - z);

    Eigen::MatrixXd dcand = (dnext * z * (1.0 - c * c)).matrix();
    Eigen::MatrixXd rh = (r * h).matrix();
    g.Wh += dcand * x.transpose();
    g.Uh += dcand * rh.transpose();
    g.bh += dcand.rowwise().sum();
    Eigen::ArrayXXd drh = (p.Uh.transpose() * dcand).array();
    dprev += drh * r;

    Eigen::MatrixXd dreset = (drh * h * r * (1.0 - r)).matrix();
    g.Wr += dreset * x.transpose();
    g.Ur += dreset * tr.hidden[t].transpose();
    g.br += dreset.rowwise().sum();
    dprev += (p.Ur.transpose() * dreset).array();

    Eigen::MatrixXd dupdate = (dnext * (c - h) * z * (1.0 - z)).matrix();
    g.Wz += dupdate * x.transpose();
    g.Uz += dupdate * tr.hidden[t].transpose();
    g.bz += dupdate.rowwise().sum();
    dprev += (p.Uz.transpose() * dupdate).array();

    dh = dprev.matrix();
  }
  if (!std::isfinite(out.loss) || !g.all_finite()) detail::numeric_fault(net, "loss or gradients");
  return out;
}

// Rescales gradients so their global L2 norm does not exceed `max_norm`.
inline double clip_gradients(GruParameters& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0) {
    const double scale = max_norm / norm;
    for (std::size_t i = 0; i < GruParameters::size(); ++i) grads[i] *= scale;
  }
  return norm;
}

struct Prediction {
  std::size_t cls = 0;
  Eigen::VectorXd probabilities;
};

// Argmax with ties going to the lowest class index.
inline std::size_t argmax(const Eigen::Ref<const Eigen::VectorXd>& p) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p(i) > p(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

inline std::vector<Prediction> predict_batch(const GruNetwork& net, std::span<const EncodedSequence* const> seqs) {
  std::vector<Prediction> out;
  if (seqs.empty()) return out;
  Batch batch = make_batch(seqs, net.input_dim());
  std::fill(batch.targets.begin(), batch.targets.end(), 0);
  ForwardTrace tr = forward(net, batch);
  out.reserve(seqs.size());
  for (Eigen::Index b = 0; b < tr.probs.cols(); ++b) {
    Eigen::VectorXd probs = tr.probs.col(b);
    out.push_back({argmax(probs), std::move(probs)});
  }
  return out;
}

inline Prediction predict(const GruNetwork& net, const EncodedSequence& seq) {
  if (seq.width != net.input_dim())
    throw Error("predict: sequence width " + std::to_string(seq.width) + " does not match network input " +
                std::to_string(net.input_dim()));
  const EncodedSequence* one[] = {&seq};
  return std::move(predict_batch(net, one).front());
}

}  // namespace flowcast
