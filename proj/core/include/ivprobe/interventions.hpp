#pragma once

// Iterative nullspace projection and the interventions built from its basis.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ivprobe/errors.hpp"
#include "ivprobe/linalg.hpp"
#include "ivprobe/probe.hpp"

namespace ivprobe {

struct InlpConfig {
  std::size_t max_iters = 200;
  double stop_margin = 0.02;  // "at baseline" means accuracy <= baseline + stop_margin
  std::size_t patience = 3;   // consecutive at-baseline iterations before stopping
  ProbeConfig probe;
  std::uint64_t seed = 0;     // probe at iteration i is seeded with seed + i

  void validate() const;
};

/// One INLP iteration: a probe trained on the data with the first `k_before`
/// directions removed, its eval accuracy, and what it contributed.
struct InlpStep {
  std::size_t step = 0;
  std::size_t k_before = 0;
  std::size_t directions_added = 0;
  std::size_t cumulative_k = 0;
  double probe_accuracy = 0.0;
  double majority_baseline = 0.0;
  std::optional<double> downstream_accuracy;
};

struct InterventionTrace {
  std::vector<InlpStep> steps;
  bool hit_max_iters = false;
};

struct InlpResult {
  AccumulatedBasis basis;
  InterventionTrace trace;
};

/// Thrown when the basis spans the whole space before the stop rule fires.
class SaturationError : public Error {
 public:
  SaturationError(const std::string& what, InlpResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const InlpResult& partial() const noexcept { return partial_; }

 private:
  InlpResult partial_;
};

/// Trains a probe on the amnesic projection of the training data, scores it on
/// the amnesic projection of the eval data, and either stops (accuracy within
/// stop_margin of the eval majority baseline for `patience` consecutive
/// iterations) or adds the probe's rowspace to the basis. Iterations at the
/// baseline never add directions. Each basis step corresponds to one
/// iteration that contributed at least one direction.
InlpResult run_inlp(const RepresentationMatrix& x_train, const LabelVector& y_train,
                    const RepresentationMatrix& x_eval, const LabelVector& y_eval, const InlpConfig& cfg);

/// k orthonormalized standard-Gaussian directions in R^d, one per step.
AccumulatedBasis random_basis(std::size_t d, std::size_t k, std::uint64_t seed);

enum class ProjectionMode { Amnesic, Mnestic };

/// Calls `visit(i, projected)` for every step i of the basis, where
/// `projected` uses only the directions of steps 0..i.
void for_each_step(const RepresentationMatrix& x, const AccumulatedBasis& basis, ProjectionMode mode,
                   const std::function<void(std::size_t, const RepresentationMatrix&)>& visit);

/// Materialized form of for_each_step; one matrix per step.
std::vector<RepresentationMatrix> stepwise_apply(const RepresentationMatrix& x, const AccumulatedBasis& basis,
                                                 ProjectionMode mode);

/// Per control basis, the mean alignment of its directions with the probe basis.
std::vector<AlignmentScore> control_alignment_report(std::span<const AccumulatedBasis> random_bases,
                                                     const AccumulatedBasis& probe_basis);

}  // namespace ivprobe
