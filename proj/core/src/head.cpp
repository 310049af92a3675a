#include "ivprobe/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ivprobe/errors.hpp"

namespace ivprobe {
namespace {

Matrix activate(Matrix z, Activation a) {
  if (a == Activation::Tanh) z = z.array().tanh();
  return z;
}

Matrix glorot(std::size_t out, std::size_t in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(out, in);
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
  return w;
}

}  // namespace

ClassifierHead::ClassifierHead(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("classifier head needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.in_dim() == 0 || l.out_dim() == 0) throw InvalidInput("head layer has an empty dimension");
    if (static_cast<std::size_t>(l.bias.size()) != l.out_dim()) {
      throw InvalidInput("head layer " + std::to_string(i) + ": bias length does not match output width");
    }
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
      throw InvalidInput("head layer " + std::to_string(i) + ": input width does not chain");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw InvalidInput("head layer " + std::to_string(i) + ": non-finite parameter");
    }
  }
  if (layers_.back().activation != Activation::Identity) {
    throw InvalidInput("final head layer must use the identity activation");
  }
  if (class_count() < 2) throw InvalidInput("head must produce at least two classes");
}

Matrix ClassifierHead::forward(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim()) {
    throw InvalidInput("head expects dimension " + std::to_string(input_dim()) + ", got " +
                       std::to_string(x.cols()));
  }
  Matrix h = x;
  for (const auto& l : layers_) {
    h = activate((h * l.weights.transpose()).rowwise() + l.bias.transpose(), l.activation);
  }
  return h;
}

LabelVector head_predict(const ClassifierHead& head, const RepresentationMatrix& x) {
  const Matrix logits = head.forward(x.values());
  std::vector<std::uint32_t> labels(x.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(argmax_lowest(logits.row(i)));
  }
  return LabelVector(std::move(labels), head.class_count());
}

double head_accuracy(const ClassifierHead& head, const RepresentationMatrix& x, const LabelVector& y) {
  if (x.rows() != y.size()) throw InvalidInput("head_accuracy: row count does not match labels");
  const auto predicted = head_predict(head, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += predicted[i] == y[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

ClassifierHead train_head(const RepresentationMatrix& x, const LabelVector& y, const ProbeConfig& cfg,
                          std::optional<std::size_t> hidden) {
  cfg.validate();
  if (x.rows() != y.size()) throw InvalidInput("train_head: row count does not match labels");
  if (y.distinct_classes() < 2) throw DegenerateLabels("train_head: at least two distinct classes are required");
  if (hidden && *hidden == 0) throw InvalidInput("train_head: hidden width must be positive");

  const auto n = x.rows();
  const auto d = x.cols();
  const auto classes = y.class_count();
  std::mt19937_64 rng(cfg.seed);

  std::vector<DenseLayer> layers;
  if (hidden) {
    layers.push_back({glorot(*hidden, d, rng), Vector::Zero(*hidden), Activation::Tanh});
    layers.push_back({glorot(classes, *hidden, rng), Vector::Zero(classes), Activation::Identity});
  } else {
    layers.push_back({Matrix::Zero(classes, d), Vector::Zero(classes), Activation::Identity});
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Matrix> acts(layers.size() + 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double eta = cfg.learning_rate / std::sqrt(static_cast<double>(epoch + 1));
    for (std::size_t first = 0; first < n; first += cfg.batch_size) {
      const auto last = std::min(n, first + cfg.batch_size);
      const auto m = static_cast<Eigen::Index>(last - first);
      acts[0].resize(m, static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < m; ++i) acts[0].row(i) = x.values().row(order[first + i]);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        acts[l + 1] = activate((acts[l] * layers[l].weights.transpose()).rowwise() + layers[l].bias.transpose(),
                               layers[l].activation);
      }

      // Softmax cross-entropy gradient with respect to the logits.
      Matrix delta = acts.back();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double top = delta.row(i).maxCoeff();
        delta.row(i) = (delta.row(i).array() - top).exp();
        delta.row(i) /= delta.row(i).sum();
        delta(i, y[order[first + i]]) -= 1.0;
      }
      delta /= static_cast<double>(m);

      for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix grad_w = delta.transpose() * acts[l];
        const Vector grad_b = delta.colwise().sum().transpose();
        if (l > 0) {
          delta = delta * layers[l].weights;
          if (layers[l - 1].activation == Activation::Tanh) {
            delta.array() *= 1.0 - acts[l].array().square();
          }
        }
        layers[l].weights *= (1.0 - eta * cfg.l2_penalty);
        layers[l].weights -= eta * grad_w;
        layers[l].bias -= eta * grad_b;
      }
    }
  }
  return ClassifierHead(std::move(layers));
}

AccuracyDelta accuracy_delta(const ClassifierHead& head, const RepresentationMatrix& before,
                             const RepresentationMatrix& after, const LabelVector& y) {
  if (before.cols() != after.cols() || before.rows() != after.rows()) {
    throw InvalidInput("accuracy_delta: before and after matrices differ in shape");
  }
  AccuracyDelta r;
  r.start = head_accuracy(head, before, y);
  r.after = head_accuracy(head, after, y);
  r.delta = r.after - r.start;
  return r;
}

}  // namespace ivprobe
