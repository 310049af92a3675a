#include <vector>

#include <gtest/gtest.h>

#include "ivprobe/errors.hpp"
#include "ivprobe/interventions.hpp"
#include "ivprobe/synthetic.hpp"
#include "oracles.hpp"

using namespace ivprobe;

namespace {

std::vector<std::uint32_t> ids(const NaturalLogicLabels& l, Feature f) { return l.feature(f).values(); }

// Best accuracy of any rule that looks at one label column only: for each
// value, predict the majority entailment class among examples with that value.
double best_single_feature_rule(const std::vector<std::uint32_t>& feature, const std::vector<std::uint32_t>& target,
                                std::size_t values) {
  std::vector<std::array<std::size_t, 2>> counts(values, {0, 0});
  for (std::size_t i = 0; i < feature.size(); ++i) ++counts[feature[i]][target[i]];
  std::size_t best = 0;
  for (const auto& c : counts) best += std::max(c[0], c[1]);
  return static_cast<double>(best) / static_cast<double>(feature.size());
}

}  // namespace

TEST(EntailmentLabel, Table) {
  using M = Monotonicity;
  using R = Relation;
  EXPECT_EQ(entailment_label(M::Up, R::Hypernym), Entailment::Entail);
  EXPECT_EQ(entailment_label(M::Down, R::Hyponym), Entailment::Entail);
  EXPECT_EQ(entailment_label(M::Up, R::Unrelated), Entailment::NonEntail);
  EXPECT_EQ(entailment_label(M::Down, R::Hypernym), Entailment::NonEntail);
  EXPECT_EQ(entailment_label(M::Up, R::Hyponym), Entailment::NonEntail);
  EXPECT_EQ(entailment_label(M::Down, R::Unrelated), Entailment::NonEntail);
}

TEST(Features, NamesAndCounts) {
  for (auto f : {Feature::Monotonicity, Feature::Relation, Feature::Composite, Feature::Entailment}) {
    EXPECT_EQ(parse_feature(feature_name(f)), f);
    EXPECT_EQ(feature_class_names(f).size(), feature_class_count(f));
  }
  EXPECT_EQ(feature_class_count(Feature::Composite), 6u);
  EXPECT_EQ(feature_class_count(Feature::Entailment), 2u);
  EXPECT_THROW(parse_feature("sentiment"), InvalidInput);
}

TEST(NaturalLogicLabels, DerivedColumns) {
  NaturalLogicLabels l({Monotonicity::Down, Monotonicity::Up}, {Relation::Unrelated, Relation::Hypernym});
  EXPECT_EQ(ids(l, Feature::Composite), (std::vector<std::uint32_t>{5, 0}));
  EXPECT_EQ(ids(l, Feature::Entailment), (std::vector<std::uint32_t>{1, 0}));
  EXPECT_THROW(NaturalLogicLabels({Monotonicity::Up}, {}), InvalidInput);
}

TEST(SyntheticSpec, Validation) {
  SyntheticSpec s;
  EXPECT_NO_THROW(s.validate());
  s.redundancy = 13;  // 65 > 64
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.redundancy = 12;
  s.nuisance_dim = 5;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.redundancy = 0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.noise_sigma = -1.0;
  EXPECT_THROW(s.validate(), InvalidInput);
  s = {};
  s.n_examples = 0;
  EXPECT_THROW(generate(s), InvalidInput);
}

TEST(Generate, DeterministicPerSeed) {
  SyntheticSpec s;
  s.n_examples = 300;
  s.nuisance_dim = 3;
  auto a = generate(s);
  auto b = generate(s);
  EXPECT_EQ(a.representations.values(), b.representations.values());
  EXPECT_EQ(ids(a.labels, Feature::Composite), ids(b.labels, Feature::Composite));
  s.seed = 1;
  EXPECT_NE(generate(s).representations.values(), a.representations.values());
}

TEST(Generate, EntailFractionIsAThird) {
  SyntheticSpec s;
  s.n_examples = 10000;
  s.ambient_dim = 8;
  auto y = generate(s).labels.feature(Feature::Entailment);
  EXPECT_NEAR(static_cast<double>(y.class_histogram()[0]) / 10000.0, 1.0 / 3.0, 0.03);
}

TEST(Generate, LabelsAreIndependent) {
  SyntheticSpec s;
  s.n_examples = 10000;
  s.ambient_dim = 8;
  auto ds = generate(s);
  EXPECT_LE(oracle::mutual_information(ids(ds.labels, Feature::Monotonicity), ids(ds.labels, Feature::Relation)),
            0.01);
}

TEST(Generate, EntailmentRecomputableFromParts) {
  SyntheticSpec s;
  s.n_examples = 500;
  auto ds = generate(s);
  auto e = ids(ds.labels, Feature::Entailment);
  auto c = ids(ds.labels, Feature::Composite);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto m = ds.labels.monotonicity()[i];
    const auto r = ds.labels.relation()[i];
    EXPECT_EQ(e[i], static_cast<std::uint32_t>(entailment_label(m, r)));
    EXPECT_EQ(c[i], static_cast<std::uint32_t>(m) * 3 + static_cast<std::uint32_t>(r));
  }
}

TEST(Generate, NoiselessRankBound) {
  for (std::size_t r : {1, 2, 4}) {
    SyntheticSpec s;
    s.n_examples = 200;
    s.ambient_dim = 40;
    s.redundancy = r;
    s.noise_sigma = 0.0;
    EXPECT_LE(oracle::svd_rank(generate(s).representations.values()), 5 * r);
  }
}

TEST(Generate, NoiselessRowsLieInPlantedCodes) {
  SyntheticSpec s;
  s.n_examples = 50;
  s.ambient_dim = 20;
  s.redundancy = 2;
  s.noise_sigma = 0.0;
  auto ds = generate(s);
  auto mono = planted_subspace(s, Feature::Monotonicity);
  auto rel = planted_subspace(s, Feature::Relation);
  // Each block contributes exactly one unit mono direction and one unit relation direction.
  auto m = mnestic_project(ds.representations, mono);
  auto r = mnestic_project(ds.representations, rel);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_NEAR(m.values().row(i).squaredNorm(), 2.0, 1e-9);
    EXPECT_NEAR(r.values().row(i).squaredNorm(), 2.0, 1e-9);
  }
  EXPECT_LE((m.values() + r.values() - ds.representations.values()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Generate, NoiselessMonotonicityIsPerfectlyProbeable) {
  SyntheticSpec s;
  s.n_examples = 1000;
  s.noise_sigma = 0.0;
  auto ds = generate(s);
  auto y = ds.labels.feature(Feature::Monotonicity);
  // Oracle: the sign of the coordinate along (down - up) separates the classes.
  auto mono = planted_subspace(s, Feature::Monotonicity);
  Vector axis = (mono.directions().row(1) - mono.directions().row(0)).transpose();
  std::vector<std::uint32_t> oracle_pred;
  for (std::size_t i = 0; i < y.size(); ++i) oracle_pred.push_back(ds.representations.values().row(i).dot(axis) > 0);
  ASSERT_EQ(oracle::agreement(oracle_pred, y.values()), 1.0);
  EXPECT_EQ(train_probe(ds.representations, y, {}).train_accuracy, 1.0);
}

TEST(PlantedSubspace, ShapeAndErrors) {
  SyntheticSpec s;
  auto b = planted_subspace(s, Feature::Monotonicity);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_LE(b.orthonormality_error(), 1e-12);
  s.redundancy = 3;
  EXPECT_EQ(planted_subspace(s, Feature::Relation).size(), 9u);
  EXPECT_EQ(planted_subspace(s, Feature::Relation).step_count(), 3u);
  EXPECT_THROW(planted_subspace(s, Feature::Entailment), InvalidInput);
  EXPECT_THROW(planted_subspace(s, Feature::Composite), InvalidInput);
}

TEST(PlantedSubspace, InlpBasisAlignsWithPlantedCode) {
  SyntheticSpec s;
  s.n_examples = 1000;
  s.noise_sigma = 0.0;
  auto ds = generate(s);
  auto y = ds.labels.feature(Feature::Monotonicity);
  auto r = run_inlp(ds.representations, y, ds.representations, y, {});
  ASSERT_FALSE(r.basis.empty());
  std::vector<AccumulatedBasis> singles;
  for (Eigen::Index i = 0; i < r.basis.directions().rows(); ++i) {
    singles.push_back(AccumulatedBasis::from_directions(r.basis.directions().row(i), {1}));
  }
  std::vector<double> scores;
  for (auto a : control_alignment_report(singles, planted_subspace(s, Feature::Monotonicity))) {
    scores.push_back(a.value);
  }
  EXPECT_GE(oracle::mean(scores), 0.95);
}

TEST(PlantedSubspace, RemovalDropsMonotonicityProbeToBaseline) {
  SyntheticSpec s;
  s.n_examples = 2000;
  s.redundancy = 3;
  s.ambient_dim = 32;
  auto ds = generate(s);
  auto y = ds.labels.feature(Feature::Monotonicity);
  std::vector<std::size_t> tr, ev;
  for (std::size_t i = 0; i < y.size(); ++i) (i % 5 == 0 ? ev : tr).push_back(i);
  auto x = amnesic_project(ds.representations, planted_subspace(s, Feature::Monotonicity));
  auto probe = train_probe(x.select_rows(tr), y.select(tr), {});
  auto ye = y.select(ev);
  EXPECT_LE(evaluate_probe(probe, x.select_rows(ev), ye), majority_baseline(ye) + 0.02);
}

TEST(Generate, EntailmentNotSeparableFromOneCode) {
  SyntheticSpec s;
  s.n_examples = 6000;
  s.ambient_dim = 16;
  auto ds = generate(s);
  auto e = ids(ds.labels, Feature::Entailment);
  // Oracle: the best rule on either label column alone is the majority guess, 4/6.
  EXPECT_NEAR(best_single_feature_rule(ids(ds.labels, Feature::Monotonicity), e, 2), 4.0 / 6.0, 0.03);
  EXPECT_NEAR(best_single_feature_rule(ids(ds.labels, Feature::Relation), e, 3), 4.0 / 6.0, 0.03);

  LabelVector y(e, 2);
  std::vector<std::size_t> tr, ev;
  for (std::size_t i = 0; i < e.size(); ++i) (i % 5 == 0 ? ev : tr).push_back(i);
  for (auto f : {Feature::Monotonicity, Feature::Relation}) {
    auto only = mnestic_project(ds.representations, planted_subspace(s, f));
    for (auto loss : {LossKind::Hinge, LossKind::Logistic}) {
      ProbeConfig cfg;
      cfg.loss = loss;
      auto probe = train_probe(only.select_rows(tr), y.select(tr), cfg);
      EXPECT_LE(evaluate_probe(probe, only.select_rows(ev), y.select(ev)), 0.67 + 0.03);
    }
  }
}

TEST(Generate, NuisanceDirectionsCarryNoLabel) {
  SyntheticSpec s;
  s.n_examples = 4000;
  s.ambient_dim = 20;
  s.nuisance_dim = 5;
  s.noise_sigma = 0.0;
  auto ds = generate(s);
  auto mono = planted_subspace(s, Feature::Monotonicity);
  auto rel = planted_subspace(s, Feature::Relation);
  auto rest = amnesic_project(amnesic_project(ds.representations, mono), rel);
  auto y = ds.labels.feature(Feature::Composite);
  std::vector<std::size_t> tr, ev;
  for (std::size_t i = 0; i < y.size(); ++i) (i % 5 == 0 ? ev : tr).push_back(i);
  auto probe = train_probe(rest.select_rows(tr), y.select(tr), {});
  auto ye = y.select(ev);
  EXPECT_LE(evaluate_probe(probe, rest.select_rows(ev), ye), majority_baseline(ye) + 0.03);
  EXPECT_GT(rest.values().norm(), 1.0);
}
