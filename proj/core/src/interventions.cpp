#include "ivprobe/interventions.hpp"

#include <random>
#include <string>

namespace ivprobe {

void InlpConfig::validate() const {
  if (max_iters < 1) throw InvalidInput("inlp max_iters must be >= 1");
  if (!(stop_margin >= 0.0)) throw InvalidInput("inlp stop_margin must be >= 0");
  if (patience < 1) throw InvalidInput("inlp patience must be >= 1");
  probe.validate();
}

InlpResult run_inlp(const RepresentationMatrix& x_train, const LabelVector& y_train,
                    const RepresentationMatrix& x_eval, const LabelVector& y_eval, const InlpConfig& cfg) {
  cfg.validate();
  if (x_train.cols() != x_eval.cols()) throw InvalidInput("run_inlp: train and eval dimensions differ");
  if (x_train.rows() != y_train.size() || x_eval.rows() != y_eval.size()) {
    throw InvalidInput("run_inlp: row counts do not match labels");
  }
  if (y_train.distinct_classes() < 2) throw DegenerateLabels("run_inlp: at least two classes are required");

  const auto d = x_train.cols();
  const double baseline = majority_baseline(y_eval);
  InlpResult result{AccumulatedBasis(d), {}};
  std::size_t at_baseline = 0;

  for (std::size_t i = 0; i < cfg.max_iters; ++i) {
    ProbeConfig pc = cfg.probe;
    pc.seed = cfg.seed + i;
    const auto train = amnesic_project(x_train, result.basis);
    const auto eval = amnesic_project(x_eval, result.basis);
    LinearProbe probe = train_probe(train, y_train, pc);
    probe.eval_accuracy = evaluate_probe(probe, eval, y_eval);

    InlpStep rec;
    rec.step = i;
    rec.k_before = result.basis.size();
    rec.probe_accuracy = *probe.eval_accuracy;
    rec.majority_baseline = baseline;

    // A probe at the baseline contributes nothing; it only counts toward patience.
    const bool at_floor = rec.probe_accuracy <= baseline + cfg.stop_margin;
    at_baseline = at_floor ? at_baseline + 1 : 0;
    if (at_floor) {
      rec.cumulative_k = rec.k_before;
      result.trace.steps.push_back(rec);
      if (at_baseline >= cfg.patience) return result;
      continue;
    }

    if (!probe.degenerate) {
      result.basis = extend_basis(result.basis, probe_rowspace(probe));
    }
    rec.cumulative_k = result.basis.size();
    rec.directions_added = rec.cumulative_k - rec.k_before;
    result.trace.steps.push_back(rec);

    if (result.basis.size() >= d) {
      throw SaturationError("run_inlp: basis saturated all " + std::to_string(d) +
                                " dimensions before probes reached the majority baseline",
                            std::move(result));
    }
  }
  result.trace.hit_max_iters = true;
  return result;
}

AccumulatedBasis random_basis(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (d == 0) throw InvalidInput("random_basis: dimension must be positive");
  if (k < 1 || k > d) {
    throw InvalidInput("random_basis: need 1 <= k <= d, got k=" + std::to_string(k) + ", d=" + std::to_string(d));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  AccumulatedBasis basis(d);
  // Draw until k directions survive; a Gaussian draw is dependent with probability zero.
  while (basis.size() < k) {
    Matrix candidate(1, d);
    for (std::size_t c = 0; c < d; ++c) candidate(0, c) = gauss(rng);
    basis = extend_basis(basis, candidate);
  }
  return basis;
}

void for_each_step(const RepresentationMatrix& x, const AccumulatedBasis& basis, ProjectionMode mode,
                   const std::function<void(std::size_t, const RepresentationMatrix&)>& visit) {
  if (x.cols() != basis.dim()) throw InvalidInput("stepwise_apply: dimension mismatch");
  Matrix kept = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t s = 0; s < basis.step_count(); ++s) {
    const auto [first, last] = basis.step_range(s);
    const auto dirs = basis.directions().middleRows(first, last - first);
    kept.noalias() += (x.values() * dirs.transpose()) * dirs;
    if (mode == ProjectionMode::Mnestic) {
      visit(s, RepresentationMatrix(kept));
    } else {
      visit(s, RepresentationMatrix(x.values() - kept));
    }
  }
}

std::vector<RepresentationMatrix> stepwise_apply(const RepresentationMatrix& x, const AccumulatedBasis& basis,
                                                 ProjectionMode mode) {
  std::vector<RepresentationMatrix> out;
  out.reserve(basis.step_count());
  for_each_step(x, basis, mode, [&](std::size_t, const RepresentationMatrix& m) { out.push_back(m); });
  return out;
}

std::vector<AlignmentScore> control_alignment_report(std::span<const AccumulatedBasis> random_bases,
                                                     const AccumulatedBasis& probe_basis) {
  std::vector<AlignmentScore> out;
  out.reserve(random_bases.size());
  for (const auto& b : random_bases) {
    if (b.dim() != probe_basis.dim()) throw InvalidInput("control_alignment_report: dimension mismatch");
    if (b.empty()) throw InvalidInput("control_alignment_report: empty control basis");
    double total = 0.0;
    for (Eigen::Index r = 0; r < b.directions().rows(); ++r) {
      total += subspace_alignment(b.directions().row(r).transpose(), probe_basis).value;
    }
    out.push_back({total / static_cast<double>(b.size())});
  }
  return out;
}

}  // namespace ivprobe
