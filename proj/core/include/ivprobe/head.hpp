#pragma once

// Frozen classifier head applied to (possibly intervened) representations.

#include <cstddef>
#include <optional>
#include <vector>

#include "ivprobe/linalg.hpp"
#include "ivprobe/probe.hpp"

namespace ivprobe {

enum class Activation { Identity, Tanh };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

/// Stack of affine layers, each followed by an activation. The final layer
/// is linear and its width is the class count.
class ClassifierHead {
 public:
  /// Throws InvalidInput when layers don't chain, the last activation is not
  /// identity, a parameter is non-finite, or the output has fewer than 2 classes.
  explicit ClassifierHead(std::vector<DenseLayer> layers);

  std::size_t input_dim() const noexcept { return layers_.front().in_dim(); }
  std::size_t class_count() const noexcept { return layers_.back().out_dim(); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// n x class_count logits.
  Matrix forward(const Matrix& x) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Argmax of the forward pass per row, ties to the lowest class id.
LabelVector head_predict(const ClassifierHead& head, const RepresentationMatrix& x);

double head_accuracy(const ClassifierHead& head, const RepresentationMatrix& x, const LabelVector& y);

/// Trains a linear head (hidden = nullopt) or a one-hidden-layer tanh head on
/// softmax cross-entropy with seeded minibatch SGD. `cfg.loss` is ignored.
ClassifierHead train_head(const RepresentationMatrix& x, const LabelVector& y, const ProbeConfig& cfg,
                          std::optional<std::size_t> hidden = std::nullopt);

struct AccuracyDelta {
  double start = 0.0;
  double after = 0.0;
  double delta = 0.0;
};

AccuracyDelta accuracy_delta(const ClassifierHead& head, const RepresentationMatrix& before,
                             const RepresentationMatrix& after, const LabelVector& y);

}  // namespace ivprobe
