#include "ivprobe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ivprobe/errors.hpp"

namespace ivprobe {
namespace {

constexpr double kRelativeDropTolerance = 1e-8;
constexpr double kAbsoluteDropTolerance = 1e-10;

void require_same_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                       " vs " + std::to_string(want) + ")");
  }
}

// Coefficients of every row of X in the basis, n x k.
Matrix coefficients(const Matrix& x, const Matrix& directions) {
  return x * directions.transpose();
}

}  // namespace

RepresentationMatrix::RepresentationMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw InvalidInput("representation matrix must have at least one row and one column");
  }
  if (!values_.allFinite()) {
    throw InvalidInput("representation matrix contains a non-finite entry");
  }
}

RepresentationMatrix RepresentationMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = rows.size();
  const auto d = n == 0 ? 0 : rows.begin()->size();
  Matrix m(n, d);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != d) throw InvalidInput("ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return RepresentationMatrix(std::move(m));
}

RepresentationMatrix RepresentationMatrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), values_.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) throw InvalidInput("row index out of range");
    out.row(i) = values_.row(indices[i]);
  }
  return RepresentationMatrix(std::move(out));
}

AccumulatedBasis::AccumulatedBasis(std::size_t dim) : dim_(dim), directions_(0, dim) {
  if (dim == 0) throw InvalidInput("basis dimension must be positive");
}

AccumulatedBasis AccumulatedBasis::from_directions(Matrix directions,
                                                   std::vector<std::size_t> step_ends,
                                                   double tolerance) {
  AccumulatedBasis b(static_cast<std::size_t>(directions.cols()));
  const auto k = static_cast<std::size_t>(directions.rows());
  std::size_t prev = 0;
  for (auto end : step_ends) {
    if (end <= prev || end > k) throw InvalidInput("step boundaries must be increasing and non-empty");
    prev = end;
  }
  if (prev != k) throw InvalidInput("step boundaries do not cover every direction");
  b.directions_ = std::move(directions);
  b.step_ends_ = std::move(step_ends);
  if (!b.directions_.allFinite()) throw InvalidInput("basis contains a non-finite entry");
  if (b.orthonormality_error() > tolerance) throw InvalidInput("basis directions are not orthonormal");
  return b;
}

std::pair<std::size_t, std::size_t> AccumulatedBasis::step_range(std::size_t step) const {
  if (step >= step_ends_.size()) throw InvalidInput("step index out of range");
  return {step == 0 ? 0 : step_ends_[step - 1], step_ends_[step]};
}

AccumulatedBasis AccumulatedBasis::prefix(std::size_t steps) const {
  if (steps > step_ends_.size()) throw InvalidInput("prefix longer than step count");
  AccumulatedBasis b(dim_);
  const auto k = steps == 0 ? 0 : step_ends_[steps - 1];
  b.directions_ = directions_.topRows(k);
  b.step_ends_.assign(step_ends_.begin(), step_ends_.begin() + steps);
  return b;
}

AccumulatedBasis AccumulatedBasis::regroup(std::vector<std::size_t> step_ends) const {
  AccumulatedBasis b(dim_);
  std::size_t prev = 0;
  for (auto end : step_ends) {
    if (end <= prev || end > size()) throw InvalidInput("step boundaries must be increasing and non-empty");
    prev = end;
  }
  if (prev != size()) throw InvalidInput("step boundaries do not cover every direction");
  b.directions_ = directions_;
  b.step_ends_ = std::move(step_ends);
  return b;
}

double AccumulatedBasis::orthonormality_error() const {
  if (empty()) return 0.0;
  const Matrix gram = directions_ * directions_.transpose();
  return (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

AccumulatedBasis extend_basis(const AccumulatedBasis& basis, const Matrix& candidates) {
  if (candidates.rows() > 0) require_same_dim(candidates.cols(), basis.dim(), "extend_basis");
  if (!candidates.allFinite()) throw InvalidInput("extend_basis: candidate contains a non-finite entry");

  const auto k0 = basis.size();
  Matrix grown(k0 + candidates.rows(), basis.dim());
  grown.topRows(k0) = basis.directions();
  std::size_t k = k0;

  for (Eigen::Index c = 0; c < candidates.rows(); ++c) {
    Vector v = candidates.row(c).transpose();
    const double original = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < k; ++j) {
        v -= grown.row(j).dot(v) * grown.row(j).transpose();
      }
    }
    const double residual = v.norm();
    if (residual < std::max(kRelativeDropTolerance * original, kAbsoluteDropTolerance)) continue;
    grown.row(k++) = v.transpose() / residual;
  }

  AccumulatedBasis out = basis;
  if (k == k0) return out;
  out.directions_ = grown.topRows(k);
  out.step_ends_.push_back(k);
  return out;
}

AccumulatedBasis extend_basis(const AccumulatedBasis& basis, std::span<const Vector> candidates) {
  Matrix rows(candidates.size(), basis.dim());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    require_same_dim(candidates[i].size(), basis.dim(), "extend_basis");
    rows.row(i) = candidates[i].transpose();
  }
  return extend_basis(basis, rows);
}

RepresentationMatrix amnesic_project(const RepresentationMatrix& x, const AccumulatedBasis& basis) {
  require_same_dim(x.cols(), basis.dim(), "amnesic_project");
  if (basis.empty()) return x;
  const Matrix& b = basis.directions();
  return RepresentationMatrix(x.values() - coefficients(x.values(), b) * b);
}

RepresentationMatrix mnestic_project(const RepresentationMatrix& x, const AccumulatedBasis& basis) {
  require_same_dim(x.cols(), basis.dim(), "mnestic_project");
  if (basis.empty()) return RepresentationMatrix(Matrix::Zero(x.rows(), x.cols()));
  const Matrix& b = basis.directions();
  return RepresentationMatrix(coefficients(x.values(), b) * b);
}

AlignmentScore subspace_alignment(const Vector& v, const AccumulatedBasis& basis) {
  require_same_dim(v.size(), basis.dim(), "subspace_alignment");
  if (!v.allFinite()) throw InvalidInput("subspace_alignment: non-finite vector");
  const double norm = v.norm();
  if (norm == 0.0) throw InvalidInput("subspace_alignment: zero vector");
  if (basis.empty()) return {0.0};
  const double inside = (basis.directions() * v).norm();
  return {std::clamp(inside / norm, 0.0, 1.0)};
}

}  // namespace ivprobe
