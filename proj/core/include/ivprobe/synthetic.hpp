#pragma once

// Natural-logic label model and a generator of representations with planted,
// redundantly encoded monotonicity and lexical-relation codes.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ivprobe/linalg.hpp"
#include "ivprobe/probe.hpp"

namespace ivprobe {

enum class Monotonicity : std::uint8_t { Up = 0, Down = 1 };
enum class Relation : std::uint8_t { Hypernym = 0, Hyponym = 1, Unrelated = 2 };
enum class Entailment : std::uint8_t { Entail = 0, NonEntail = 1 };

enum class Feature { Monotonicity, Relation, Composite, Entailment };

/// Upward contexts preserve truth under substitution by a hypernym, downward
/// contexts under substitution by a hyponym. Everything else is non-entailment.
constexpr Entailment entailment_label(Monotonicity m, Relation r) noexcept {
  if (m == Monotonicity::Up && r == Relation::Hypernym) return Entailment::Entail;
  if (m == Monotonicity::Down && r == Relation::Hyponym) return Entailment::Entail;
  return Entailment::NonEntail;
}

constexpr std::uint32_t composite_id(Monotonicity m, Relation r) noexcept {
  return static_cast<std::uint32_t>(m) * 3u + static_cast<std::uint32_t>(r);
}

std::string_view feature_name(Feature f) noexcept;
/// Throws InvalidInput on an unknown name.
Feature parse_feature(std::string_view name);
std::size_t feature_class_count(Feature f) noexcept;
std::vector<std::string> feature_class_names(Feature f);

/// Per-example monotonicity and relation; composite and entailment are derived.
class NaturalLogicLabels {
 public:
  NaturalLogicLabels() = default;
  NaturalLogicLabels(std::vector<Monotonicity> monotonicity, std::vector<Relation> relation);

  std::size_t size() const noexcept { return monotonicity_.size(); }
  const std::vector<Monotonicity>& monotonicity() const noexcept { return monotonicity_; }
  const std::vector<Relation>& relation() const noexcept { return relation_; }

  LabelVector feature(Feature f) const;

 private:
  std::vector<Monotonicity> monotonicity_;
  std::vector<Relation> relation_;
};

struct SyntheticSpec {
  std::size_t n_examples = 2000;
  std::size_t ambient_dim = 64;
  std::size_t redundancy = 1;   // disjoint planted copies per feature
  double noise_sigma = 0.05;    // isotropic, every coordinate
  std::size_t nuisance_dim = 0; // label-independent planted directions
  double nuisance_scale = 1.0;  // std-dev of the coefficient on each nuisance direction
  std::uint64_t seed = 0;

  /// Throws InvalidInput when redundancy * 5 + nuisance_dim exceeds ambient_dim
  /// or a count/scale is out of range.
  void validate() const;
};

struct SyntheticDataset {
  RepresentationMatrix representations;
  NaturalLogicLabels labels;
};

/// Row i = sum over blocks of (monotonicity one-hot over the block's 2 planted
/// directions + relation one-hot over its 3 planted directions) + nuisance +
/// noise. Deterministic per spec.
SyntheticDataset generate(const SyntheticSpec& spec);

/// Exact planted basis of a feature across all redundant blocks, one step per
/// block. Only monotonicity and relation have planted codes.
AccumulatedBasis planted_subspace(const SyntheticSpec& spec, Feature feature);

}  // namespace ivprobe
