#pragma once

// Linear diagnostic probes: training by seeded minibatch SGD, argmax
// evaluation, and extraction of the weight rowspace that the nullspace
// projection removes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ivprobe/linalg.hpp"

namespace ivprobe {

/// Per-example class ids in [0, class_count).
class LabelVector {
 public:
  LabelVector(std::vector<std::uint32_t> values, std::size_t class_count,
              std::vector<std::string> class_names = {});

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<std::uint32_t>& values() const noexcept { return values_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::uint32_t operator[](std::size_t i) const { return values_[i]; }

  std::vector<std::size_t> class_histogram() const;
  std::size_t distinct_classes() const;
  LabelVector select(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<std::uint32_t> values_;
  std::size_t class_count_;
  std::vector<std::string> class_names_;
};

enum class LossKind { Hinge, Logistic };

struct ProbeConfig {
  std::size_t epochs = 50;
  double learning_rate = 0.01;  // decays as learning_rate / sqrt(t), t = 1-based epoch
  double l2_penalty = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Hinge;

  void validate() const;
};

/// Affine classifier scores = W x + b.
///
/// A binary hinge probe stores a single row; its score is compared against an
/// implicit zero score for class 0. Every other probe has one row per class.
struct LinearProbe {
  Matrix weights;
  Vector bias;
  std::size_t class_count = 0;
  double train_accuracy = 0.0;
  std::optional<double> eval_accuracy;
  bool degenerate = false;  // all weight rows are zero

  /// n x class_count score matrix.
  Matrix scores(const Matrix& x) const;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& scores);

/// Frequency of the most common class.
double majority_baseline(const LabelVector& y);

/// Trains a probe by minibatch SGD with per-epoch shuffling. Deterministic for
/// fixed (x, y, cfg). Throws DegenerateLabels when fewer than two classes occur.
LinearProbe train_probe(const RepresentationMatrix& x, const LabelVector& y, const ProbeConfig& cfg);

/// Fraction of rows whose argmax score equals the label.
double evaluate_probe(const LinearProbe& probe, const RepresentationMatrix& x, const LabelVector& y);

/// Nonzero weight rows of the probe. Throws DegenerateProbe when there are none.
std::vector<Vector> probe_rowspace(const LinearProbe& probe);

}  // namespace ivprobe
