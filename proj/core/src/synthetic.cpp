#include "ivprobe/synthetic.hpp"

#include <random>

#include "ivprobe/errors.hpp"

namespace ivprobe {
namespace {

constexpr std::size_t kMonoWidth = 2;
constexpr std::size_t kRelationWidth = 3;
constexpr std::size_t kBlockWidth = kMonoWidth + kRelationWidth;

// Planted directions, block-major: block b owns rows [5b, 5b+5) as
// (mono up, mono down, hypernym, hyponym, unrelated); nuisance rows follow.
Matrix planted_directions(const SyntheticSpec& spec) {
  const auto count = spec.redundancy * kBlockWidth + spec.nuisance_dim;
  std::seed_seq seq{spec.seed, std::uint64_t{0x706c616e74}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix raw(count, spec.ambient_dim);
  for (Eigen::Index r = 0; r < raw.rows(); ++r)
    for (Eigen::Index c = 0; c < raw.cols(); ++c) raw(r, c) = gauss(rng);

  const auto basis = extend_basis(AccumulatedBasis(spec.ambient_dim), raw);
  if (basis.size() != count) throw Error("planted direction draw was rank deficient");
  return basis.directions();
}

}  // namespace

std::string_view feature_name(Feature f) noexcept {
  switch (f) {
    case Feature::Monotonicity: return "monotonicity";
    case Feature::Relation: return "relation";
    case Feature::Composite: return "composite";
    case Feature::Entailment: return "entailment";
  }
  return "unknown";
}

Feature parse_feature(std::string_view name) {
  for (auto f : {Feature::Monotonicity, Feature::Relation, Feature::Composite, Feature::Entailment}) {
    if (feature_name(f) == name) return f;
  }
  throw InvalidInput("unknown feature '" + std::string(name) + "'");
}

std::size_t feature_class_count(Feature f) noexcept {
  switch (f) {
    case Feature::Monotonicity: return 2;
    case Feature::Relation: return 3;
    case Feature::Composite: return 6;
    case Feature::Entailment: return 2;
  }
  return 0;
}

std::vector<std::string> feature_class_names(Feature f) {
  switch (f) {
    case Feature::Monotonicity: return {"up", "down"};
    case Feature::Relation: return {"hypernym", "hyponym", "unrelated"};
    case Feature::Composite:
      return {"up/hypernym", "up/hyponym", "up/unrelated", "down/hypernym", "down/hyponym", "down/unrelated"};
    case Feature::Entailment: return {"entail", "non-entail"};
  }
  return {};
}

NaturalLogicLabels::NaturalLogicLabels(std::vector<Monotonicity> monotonicity, std::vector<Relation> relation)
    : monotonicity_(std::move(monotonicity)), relation_(std::move(relation)) {
  if (monotonicity_.size() != relation_.size()) {
    throw InvalidInput("monotonicity and relation label counts differ");
  }
}

LabelVector NaturalLogicLabels::feature(Feature f) const {
  std::vector<std::uint32_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto m = monotonicity_[i];
    const auto r = relation_[i];
    switch (f) {
      case Feature::Monotonicity: out[i] = static_cast<std::uint32_t>(m); break;
      case Feature::Relation: out[i] = static_cast<std::uint32_t>(r); break;
      case Feature::Composite: out[i] = composite_id(m, r); break;
      case Feature::Entailment: out[i] = static_cast<std::uint32_t>(entailment_label(m, r)); break;
    }
  }
  return LabelVector(std::move(out), feature_class_count(f), feature_class_names(f));
}

void SyntheticSpec::validate() const {
  if (n_examples < 1) throw InvalidInput("synthetic spec: n_examples must be >= 1");
  if (ambient_dim < 1) throw InvalidInput("synthetic spec: ambient_dim must be >= 1");
  if (redundancy < 1) throw InvalidInput("synthetic spec: redundancy must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidInput("synthetic spec: noise_sigma must be finite and >= 0");
  }
  if (!(nuisance_scale >= 0.0) || !std::isfinite(nuisance_scale)) {
    throw InvalidInput("synthetic spec: nuisance_scale must be finite and >= 0");
  }
  const auto needed = redundancy * kBlockWidth + nuisance_dim;
  if (needed > ambient_dim) {
    throw InvalidInput("synthetic spec: redundancy * 5 + nuisance_dim = " + std::to_string(needed) +
                       " exceeds ambient_dim = " + std::to_string(ambient_dim));
  }
}

SyntheticDataset generate(const SyntheticSpec& spec) {
  spec.validate();
  const Matrix planted = planted_directions(spec);
  const auto d = static_cast<Eigen::Index>(spec.ambient_dim);
  const auto nuisance_offset = static_cast<Eigen::Index>(spec.redundancy * kBlockWidth);

  std::seed_seq seq{spec.seed, std::uint64_t{0x73616d706c65}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> pick_mono(0, 1);
  std::uniform_int_distribution<int> pick_relation(0, 2);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix x(spec.n_examples, d);
  std::vector<Monotonicity> mono(spec.n_examples);
  std::vector<Relation> relation(spec.n_examples);

  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    mono[i] = static_cast<Monotonicity>(pick_mono(rng));
    relation[i] = static_cast<Relation>(pick_relation(rng));

    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
    for (std::size_t b = 0; b < spec.redundancy; ++b) {
      const auto base = static_cast<Eigen::Index>(b * kBlockWidth);
      row += planted.row(base + static_cast<Eigen::Index>(mono[i]));
      row += planted.row(base + static_cast<Eigen::Index>(kMonoWidth) + static_cast<Eigen::Index>(relation[i]));
    }
    for (std::size_t j = 0; j < spec.nuisance_dim; ++j) {
      row += spec.nuisance_scale * gauss(rng) * planted.row(nuisance_offset + static_cast<Eigen::Index>(j));
    }
    if (spec.noise_sigma > 0.0) {
      for (Eigen::Index c = 0; c < d; ++c) row(c) += spec.noise_sigma * gauss(rng);
    }
    x.row(static_cast<Eigen::Index>(i)) = row;
  }

  return {RepresentationMatrix(std::move(x)), NaturalLogicLabels(std::move(mono), std::move(relation))};
}

AccumulatedBasis planted_subspace(const SyntheticSpec& spec, Feature feature) {
  spec.validate();
  std::size_t offset = 0;
  std::size_t width = 0;
  switch (feature) {
    case Feature::Monotonicity: offset = 0; width = kMonoWidth; break;
    case Feature::Relation: offset = kMonoWidth; width = kRelationWidth; break;
    default:
      throw InvalidInput("planted_subspace: feature '" + std::string(feature_name(feature)) +
                         "' has no planted code");
  }
  const Matrix planted = planted_directions(spec);
  Matrix dirs(spec.redundancy * width, spec.ambient_dim);
  std::vector<std::size_t> ends;
  for (std::size_t b = 0; b < spec.redundancy; ++b) {
    dirs.middleRows(static_cast<Eigen::Index>(b * width), static_cast<Eigen::Index>(width)) =
        planted.middleRows(static_cast<Eigen::Index>(b * kBlockWidth + offset), static_cast<Eigen::Index>(width));
    ends.push_back((b + 1) * width);
  }
  return AccumulatedBasis::from_directions(std::move(dirs), std::move(ends));
}

}  // namespace ivprobe
