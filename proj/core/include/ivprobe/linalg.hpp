#pragma once

// Dense linear algebra for probe-direction bookkeeping: an orthonormal basis
// accumulated step by step, the two complementary projections it induces
// (removal of the spanned directions, and retention of only those
// directions), and a directional alignment score against that span.
//
// All arithmetic is double precision. Every function here is pure.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ivprobe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// n x d matrix of encoded examples, one example per row.
///
/// Entries are finite and both dimensions are positive. The values are
/// immutable after construction; projections return new matrices.
class RepresentationMatrix {
 public:
  /// Throws InvalidInput on an empty shape or a non-finite entry.
  explicit RepresentationMatrix(Matrix values);

  static RepresentationMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const noexcept { return values_; }
  double operator()(std::size_t r, std::size_t c) const { return values_(r, c); }

  /// Rows selected by index, in the given order.
  RepresentationMatrix select_rows(std::span<const std::size_t> indices) const;

 private:
  Matrix values_;
};

/// Ordered orthonormal directions in R^dim, grouped into contiguous steps.
///
/// `step_ends()[i]` is one past the last direction added at step i, so step i
/// covers [step_ends()[i-1], step_ends()[i]). Steps are never empty.
class AccumulatedBasis {
 public:
  explicit AccumulatedBasis(std::size_t dim);

  /// Adopts already-orthonormal rows. Validates the orthonormality and step
  /// partition invariants within `tolerance` and throws InvalidInput otherwise.
  static AccumulatedBasis from_directions(Matrix directions, std::vector<std::size_t> step_ends,
                                          double tolerance = 1e-6);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(directions_.rows()); }
  bool empty() const noexcept { return size() == 0; }
  std::size_t step_count() const noexcept { return step_ends_.size(); }

  /// k x dim, one unit direction per row.
  const Matrix& directions() const noexcept { return directions_; }
  const std::vector<std::size_t>& step_ends() const noexcept { return step_ends_; }

  /// Half-open direction range [first, second) of one step.
  std::pair<std::size_t, std::size_t> step_range(std::size_t step) const;

  /// The basis made of steps [0, steps).
  AccumulatedBasis prefix(std::size_t steps) const;

  /// Same directions, partitioned by a different set of step ends.
  AccumulatedBasis regroup(std::vector<std::size_t> step_ends) const;

  /// Largest |G_ij - delta_ij| over the Gram matrix of the directions.
  double orthonormality_error() const;

 private:
  friend AccumulatedBasis extend_basis(const AccumulatedBasis&, const Matrix&);

  std::size_t dim_;
  Matrix directions_;
  std::vector<std::size_t> step_ends_;
};

/// Appends the orthonormalized residue of `candidates` (one candidate per row)
/// as a new step. Each candidate is orthogonalized against all prior
/// directions and the already-accepted candidates with two passes of modified
/// Gram-Schmidt. Residuals below max(1e-8 * original norm, 1e-10) are dropped;
/// no step is appended if nothing survives.
AccumulatedBasis extend_basis(const AccumulatedBasis& basis, const Matrix& candidates);
AccumulatedBasis extend_basis(const AccumulatedBasis& basis, std::span<const Vector> candidates);

/// X with the component inside span(basis) removed from every row.
RepresentationMatrix amnesic_project(const RepresentationMatrix& x, const AccumulatedBasis& basis);

/// Component of every row of X inside span(basis).
RepresentationMatrix mnestic_project(const RepresentationMatrix& x, const AccumulatedBasis& basis);

/// Fraction of a vector's length that lies inside a span: 0 for orthogonal, 1 for contained.
struct AlignmentScore {
  double value = 0.0;
};

AlignmentScore subspace_alignment(const Vector& v, const AccumulatedBasis& basis);

}  // namespace ivprobe
