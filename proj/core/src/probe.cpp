#include "ivprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ivprobe/errors.hpp"

namespace ivprobe {
namespace {

void require_rows(const RepresentationMatrix& x, const LabelVector& y, const char* what) {
  if (x.rows() != y.size()) {
    throw InvalidInput(std::string(what) + ": " + std::to_string(x.rows()) + " rows but " +
                       std::to_string(y.size()) + " labels");
  }
}

// Gathers the rows named by [first, last) of `order` into `out`.
void gather(const Matrix& x, const std::vector<std::size_t>& order, std::size_t first,
            std::size_t last, Matrix& out) {
  out.resize(static_cast<Eigen::Index>(last - first), x.cols());
  for (std::size_t i = first; i < last; ++i) out.row(i - first) = x.row(order[i]);
}

}  // namespace

LabelVector::LabelVector(std::vector<std::uint32_t> values, std::size_t class_count,
                         std::vector<std::string> class_names)
    : values_(std::move(values)), class_count_(class_count), class_names_(std::move(class_names)) {
  if (class_count_ < 2) throw InvalidInput("label vector needs class_count >= 2");
  if (!class_names_.empty() && class_names_.size() != class_count_) {
    throw InvalidInput("class_names must be empty or have class_count entries");
  }
  for (auto v : values_) {
    if (v >= class_count_) {
      throw InvalidInput("label " + std::to_string(v) + " out of range for " +
                         std::to_string(class_count_) + " classes");
    }
  }
}

std::vector<std::size_t> LabelVector::class_histogram() const {
  std::vector<std::size_t> counts(class_count_, 0);
  for (auto v : values_) ++counts[v];
  return counts;
}

std::size_t LabelVector::distinct_classes() const {
  const auto h = class_histogram();
  return static_cast<std::size_t>(std::count_if(h.begin(), h.end(), [](auto c) { return c > 0; }));
}

LabelVector LabelVector::select(const std::vector<std::size_t>& indices) const {
  std::vector<std::uint32_t> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= values_.size()) throw InvalidInput("label index out of range");
    out.push_back(values_[i]);
  }
  return LabelVector(std::move(out), class_count_, class_names_);
}

void ProbeConfig::validate() const {
  if (epochs < 1) throw InvalidInput("probe epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("probe learning_rate must be > 0");
  if (!(l2_penalty >= 0.0)) throw InvalidInput("probe l2_penalty must be >= 0");
  if (batch_size < 1) throw InvalidInput("probe batch_size must be >= 1");
}

Matrix LinearProbe::scores(const Matrix& x) const {
  if (x.cols() != weights.cols()) {
    throw InvalidInput("probe expects dimension " + std::to_string(weights.cols()) + ", got " +
                       std::to_string(x.cols()));
  }
  Matrix s = (x * weights.transpose()).rowwise() + bias.transpose();
  if (weights.rows() == 1 && class_count == 2) {
    Matrix two(s.rows(), 2);
    two.col(0).setZero();
    two.col(1) = s.col(0);
    return two;
  }
  return s;
}

std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& scores) {
  std::size_t best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c) {
    if (scores(c) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(c);
  }
  return best;
}

double majority_baseline(const LabelVector& y) {
  if (y.empty()) throw InvalidInput("majority_baseline: empty label vector");
  const auto h = y.class_histogram();
  return static_cast<double>(*std::max_element(h.begin(), h.end())) / static_cast<double>(y.size());
}

LinearProbe train_probe(const RepresentationMatrix& x, const LabelVector& y, const ProbeConfig& cfg) {
  cfg.validate();
  require_rows(x, y, "train_probe");
  if (y.distinct_classes() < 2) {
    throw DegenerateLabels("train_probe: at least two distinct classes are required");
  }

  const auto n = x.rows();
  const auto d = static_cast<Eigen::Index>(x.cols());
  const auto classes = y.class_count();
  const bool single_row = cfg.loss == LossKind::Hinge && classes == 2;
  const auto rows = static_cast<Eigen::Index>(single_row ? 1 : classes);

  LinearProbe probe;
  probe.class_count = classes;
  probe.weights = Matrix::Zero(rows, d);
  probe.bias = Vector::Zero(rows);

  // Targets: +-1 per one-vs-rest row for hinge, one-hot for logistic.
  Matrix targets(n, rows);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < rows; ++c) {
      const bool positive = single_row ? y[i] == 1 : y[i] == static_cast<std::uint32_t>(c);
      if (cfg.loss == LossKind::Hinge) {
        targets(i, c) = positive ? 1.0 : -1.0;
      } else {
        targets(i, c) = positive ? 1.0 : 0.0;
      }
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  Matrix batch;
  Matrix grad_scores;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double eta = cfg.learning_rate / std::sqrt(static_cast<double>(epoch + 1));
    for (std::size_t first = 0; first < n; first += cfg.batch_size) {
      const auto last = std::min(n, first + cfg.batch_size);
      gather(x.values(), order, first, last, batch);
      const auto m = batch.rows();

      Matrix s = (batch * probe.weights.transpose()).rowwise() + probe.bias.transpose();
      grad_scores.resize(m, rows);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto target = targets.row(static_cast<Eigen::Index>(order[first + i]));
        if (cfg.loss == LossKind::Hinge) {
          for (Eigen::Index c = 0; c < rows; ++c) {
            grad_scores(i, c) = target(c) * s(i, c) < 1.0 ? -target(c) : 0.0;
          }
        } else {
          const double top = s.row(i).maxCoeff();
          Eigen::RowVectorXd p = (s.row(i).array() - top).exp();
          p /= p.sum();
          grad_scores.row(i) = p - target;
        }
      }
      const double inv_m = 1.0 / static_cast<double>(m);
      probe.weights *= (1.0 - eta * cfg.l2_penalty);
      probe.weights.noalias() -= (eta * inv_m) * grad_scores.transpose() * batch;
      probe.bias -= (eta * inv_m) * grad_scores.colwise().sum().transpose();
    }
  }

  probe.degenerate = probe.weights.rowwise().norm().maxCoeff() == 0.0;
  probe.train_accuracy = evaluate_probe(probe, x, y);
  return probe;
}

double evaluate_probe(const LinearProbe& probe, const RepresentationMatrix& x, const LabelVector& y) {
  require_rows(x, y, "evaluate_probe");
  if (y.empty()) return 0.0;
  const Matrix s = probe.scores(x.values());
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (argmax_lowest(s.row(i)) == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

std::vector<Vector> probe_rowspace(const LinearProbe& probe) {
  std::vector<Vector> rows;
  for (Eigen::Index r = 0; r < probe.weights.rows(); ++r) {
    if (probe.weights.row(r).squaredNorm() > 0.0) rows.push_back(probe.weights.row(r).transpose());
  }
  if (rows.empty()) throw DegenerateProbe("probe_rowspace: every weight row is zero");
  return rows;
}

}  // namespace ivprobe
