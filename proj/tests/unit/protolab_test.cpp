#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "osda/errors.hpp"
#include "osda/protolab.hpp"
#include "osda/synthbench.hpp"
#include "support/testing.hpp"

namespace osda {
namespace {

using testing::code_of;

SourceLogits logits(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SourceLogits{m};
}

EmbeddingSet embed(std::initializer_list<std::initializer_list<double>> rows) { return EmbeddingSet(logits(rows).data); }

Partition partition(int k, std::vector<std::uint32_t> assign) {
  Partition p;
  p.k = k;
  p.assign = std::move(assign);
  return p;
}

PrototypeSet unit_prototypes(const Matrix& rows, double tau = 0.07) {
  PrototypeSet ps;
  ps.protos = rows;
  ps.protos_norm = rows.rowwise().normalized();
  ps.tau = tau;
  ps.defined.assign(static_cast<std::size_t>(rows.rows()), true);
  return ps;
}

// Random aligned instance where every class is someone's argmax.
struct Instance {
  EmbeddingSet e;
  SourceLogits l;
  Partition p;
};

Instance random_instance(Rng& rng, int n, int d, int c, int k) {
  Instance in;
  in.e = EmbeddingSet(testing::random_matrix(rng, n, d));
  in.l = SourceLogits{testing::random_matrix(rng, n, c, 2.0)};
  for (int j = 0; j < c; ++j) in.l.data(j, j) += 10.0;
  std::vector<std::uint32_t> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i < k ? i : rng.below(k));
  in.p = partition(k, a);
  return in;
}

TEST(Csas, MaxOfTheMeanLogit) {
  const auto l = logits({{2, 0}, {0, 1}});
  const std::vector<std::size_t> both = {0, 1};
  EXPECT_DOUBLE_EQ(csas(l, both), 1.0);
}

TEST(Csas, SingleMember) {
  const auto l = logits({{3, -1}});
  const std::vector<std::size_t> one = {0};
  EXPECT_DOUBLE_EQ(csas(l, one), 3.0);
}

TEST(Csas, EmptyMembersAreRejected) {
  const auto l = logits({{3, -1}});
  EXPECT_EQ(code_of([&] { csas(l, {}); }), Errc::EmptyCluster);
}

TEST(NormalizeCsas, SubtractsTheMinimumRatio) {
  const std::vector<double> phi = {1.0, 0.2};
  const std::vector<std::size_t> sizes = {2, 1};
  const auto out = normalize_csas(phi, sizes);
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_EQ(out[1], 0.0);
}

TEST(NormalizeCsas, SingleClusterIsZero) {
  const std::vector<double> phi = {5.0};
  const std::vector<std::size_t> sizes = {3};
  EXPECT_EQ(normalize_csas(phi, sizes), std::vector<double>{0.0});
}

TEST(NormalizeCsas, EqualRatiosAreAllZero) {
  const std::vector<double> phi = {1.0, 0.5};
  const std::vector<std::size_t> sizes = {2, 1};
  EXPECT_EQ(normalize_csas(phi, sizes), (std::vector<double>{0.0, 0.0}));
}

TEST(NormalizeCsas, NeverNegativeAndAlwaysHasAZero) {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto k = 1 + rng.below(8);
    std::vector<double> phi(k);
    std::vector<std::size_t> sizes(k);
    for (std::size_t i = 0; i < k; ++i) {
      phi[i] = rng.uniform(-5.0, 5.0);
      sizes[i] = 1 + rng.below(20);
    }
    const auto out = normalize_csas(phi, sizes);
    EXPECT_TRUE(std::all_of(out.begin(), out.end(), [](double v) { return v >= 0.0; }));
    EXPECT_NE(std::find(out.begin(), out.end(), 0.0), out.end());
  }
}

TEST(ClusterAttributes, PriorFromArgmaxCounts) {
  const auto l = logits({{1, 0}, {2, 0}, {3, 0}, {0, 1}});
  const auto e = embed({{1, 0}, {1, 0}, {1, 0}, {0, 1}});
  const auto a = cluster_attributes(l, e, partition(1, {0, 0, 0, 0}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a[0].prior[0], 0.75);
  EXPECT_DOUBLE_EQ(a[0].prior[1], 0.25);
  EXPECT_EQ(a[0].size, 4u);
}

TEST(ClusterAttributes, AbsentClassIsMasked) {
  const auto l = logits({{0, 1}, {0, 2}});
  const auto e = embed({{1, 0}, {0, 1}});
  const auto a = cluster_attributes(l, e, partition(1, {0, 0}));
  EXPECT_FALSE(a[0].valid[0]);
  EXPECT_TRUE(a[0].valid[1]);
  EXPECT_EQ(a[0].prior[0], 0.0);
}

TEST(ClusterAttributes, ConditionalMeanOverClassMembers) {
  const auto l = logits({{1, 0}, {1, 0}});
  const auto e = embed({{1, 0}, {0, 1}});
  const auto a = cluster_attributes(l, e, partition(1, {0, 0}));
  EXPECT_DOUBLE_EQ(a[0].cond_mean(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(a[0].cond_mean(0, 1), 0.5);
}

TEST(ClusterAttributes, PriorsSumToOneAndAZeroClusterExists) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, 30, 3, 3, 4);
    const auto attrs = cluster_attributes(in.l, in.e, in.p);
    bool zero = false;
    for (const auto& a : attrs) {
      EXPECT_NEAR(a.prior.sum(), 1.0, 1e-12);
      EXPECT_GE(a.csas_norm, 0.0);
      zero = zero || a.csas_norm == 0.0;
    }
    EXPECT_TRUE(zero);
  }
}

TEST(Zeta, UniformIsAllOnes) {
  const auto w = zeta_weights(WeightScheme::Uniform, logits({{1, 2}, {3, -4}, {0, 0}}));
  EXPECT_EQ(w.zeta, Vector::Ones(3));
}

TEST(Zeta, MlsSubtractsTheDatasetMinimum) {
  const auto w = zeta_weights(WeightScheme::Mls, logits({{2, 0}, {1, -1}, {3, 2}}));
  EXPECT_DOUBLE_EQ(w.zeta[0], 1.0);
  EXPECT_DOUBLE_EQ(w.zeta[1], 0.0);
  EXPECT_DOUBLE_EQ(w.zeta[2], 2.0);
}

TEST(Zeta, MspIsTheTopSoftmaxProbability) {
  const auto w = zeta_weights(WeightScheme::Msp, logits({{2, 0}}));
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(w.zeta[0], e2 / (e2 + 1.0), 1e-15);
  EXPECT_NEAR(w.zeta[0], 0.88080, 1e-5);
}

TEST(Zeta, CsasSingleRun) {
  // Cluster 0: {[2,0],[0,1]} with phi 1.0; cluster 1: {[0.2,0.1]} with phi 0.2.
  const auto l = logits({{2, 0}, {0, 1}, {0.2, 0.1}});
  McPartitions mc;
  mc.runs.push_back(partition(2, {0, 0, 1}));
  const auto w = zeta_weights(WeightScheme::Csas, l, mc);
  EXPECT_NEAR(w.zeta[0], 0.3, 1e-15);
  EXPECT_NEAR(w.zeta[1], 0.3, 1e-15);
  EXPECT_EQ(w.zeta[2], 0.0);
}

TEST(Zeta, CsasAveragesTheRuns) {
  Rng rng(2);
  const auto a = random_instance(rng, 20, 2, 2, 3);
  const auto b = random_instance(rng, 20, 2, 2, 2);
  McPartitions mc;
  mc.runs = {a.p, b.p};
  const auto w = zeta_weights(WeightScheme::Csas, a.l, mc);
  const Vector expected = 0.5 * (csas_zeta(a.l, a.p) + csas_zeta(a.l, b.p));
  EXPECT_LT((w.zeta - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Zeta, CsasWithoutPartitionsIsRejected) {
  const auto l = logits({{1, 0}});
  EXPECT_EQ(code_of([&] { zeta_weights(WeightScheme::Csas, l); }), Errc::MissingPartitions);
  EXPECT_EQ(code_of([&] { zeta_weights(WeightScheme::Csas, l, McPartitions{}); }), Errc::MissingPartitions);
}

TEST(Zeta, NonNegativeUnderEveryScheme) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, 25, 3, 3, 4);
    McPartitions mc;
    mc.runs.push_back(in.p);
    for (auto s : {WeightScheme::Uniform, WeightScheme::Msp, WeightScheme::Mls, WeightScheme::Csas}) {
      const auto w = zeta_weights(s, in.l, mc);
      EXPECT_GE(w.zeta.minCoeff(), 0.0) << to_string(s);
    }
  }
}

TEST(Zeta, SchemeNamesRoundTrip) {
  for (auto s : {WeightScheme::Uniform, WeightScheme::Msp, WeightScheme::Mls, WeightScheme::Csas}) {
    EXPECT_EQ(parse_weight_scheme(to_string(s)), s);
  }
  EXPECT_FALSE(parse_weight_scheme("entropy").has_value());
}

TEST(Prototypes, UniformWeightsGiveTheClassMean) {
  const auto ps = prototypes(embed({{1, 0}, {0, 1}}), logits({{1, 0}, {1, 0}}), {WeightScheme::Uniform, Vector::Ones(2)});
  EXPECT_DOUBLE_EQ(ps.protos(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(ps.protos(0, 1), 0.5);
  EXPECT_TRUE(ps.defined[0]);
  EXPECT_FALSE(ps.defined[1]);
}

TEST(Prototypes, ZeroWeightIsExcluded) {
  Vector z(2);
  z << 1, 0;
  const auto ps = prototypes(embed({{1, 0}, {0, 1}}), logits({{1, 0}, {1, 0}}), {WeightScheme::Uniform, z});
  EXPECT_DOUBLE_EQ(ps.protos(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(ps.protos(0, 1), 0.0);
}

TEST(Prototypes, ClusterAttributeFormMatchesWorkedExample) {
  // Cluster A: two class-0 samples at [1,0], phi 1.0; cluster B: one class-0
  // sample at [0,1], phi 0.2. Normalized: 0.6 and 0.0.
  const auto l = logits({{1.5, 0}, {0.5, 0}, {0.2, 0}});
  const auto e = embed({{1, 0}, {1, 0}, {0, 1}});
  const auto p = partition(2, {0, 0, 1});
  const auto attrs = cluster_attributes(l, e, p);
  EXPECT_NEAR(attrs[0].csas_norm, 0.6, 1e-15);
  EXPECT_EQ(attrs[1].csas_norm, 0.0);
  EXPECT_EQ(attrs[0].prior[0], 1.0);

  const auto via_clusters = prototypes_from_clusters(attrs);
  const auto via_zeta = prototypes(e, l, {WeightScheme::Csas, csas_zeta(l, p)});
  EXPECT_DOUBLE_EQ(via_clusters.protos(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(via_clusters.protos(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(via_zeta.protos(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(via_zeta.protos(0, 1), 0.0);
}

TEST(Prototypes, ClusterFormEqualsWeightedFormOnRandomPartitions) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + static_cast<int>(rng.below(40));
    const int c = 2 + static_cast<int>(rng.below(3));
    const int k = 2 + static_cast<int>(rng.below(5));
    const auto in = random_instance(rng, n, 1 + static_cast<int>(rng.below(6)), c, k);
    PrototypeSet a, b;
    try {
      a = prototypes_from_clusters(cluster_attributes(in.l, in.e, in.p));
    } catch (const Error& err) {
      EXPECT_EQ(code_of([&] { prototypes(in.e, in.l, {WeightScheme::Csas, csas_zeta(in.l, in.p)}); }), err.code());
      continue;
    }
    b = prototypes(in.e, in.l, {WeightScheme::Csas, csas_zeta(in.l, in.p)});
    ASSERT_EQ(a.defined, b.defined);
    for (int j = 0; j < c; ++j) {
      if (!a.defined[static_cast<std::size_t>(j)]) continue;
      EXPECT_LT(testing::max_rel_dev(a.protos.row(j), b.protos.row(j), b.protos.row(j).cwiseAbs().maxCoeff()), 1e-9);
    }
  }
}

TEST(Prototypes, ClusterRelabelingChangesNothing) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = random_instance(rng, 30, 3, 3, 5);
    std::vector<std::uint32_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Partition q = in.p;
    for (auto& a : q.assign) a = perm[a];

    const Vector za = csas_zeta(in.l, in.p);
    const Vector zb = csas_zeta(in.l, q);
    EXPECT_EQ(za, zb);
    try {
      const auto pa = prototypes(in.e, in.l, {WeightScheme::Csas, za});
      const auto pb = prototypes(in.e, in.l, {WeightScheme::Csas, zb});
      EXPECT_EQ(pa.protos, pb.protos);
    } catch (const Error& err) {
      EXPECT_EQ(err.code(), Errc::AllClassesUndefined);
    }
  }
}

TEST(Prototypes, NoPositiveMassAnywhereIsRejected) {
  EXPECT_EQ(code_of([] {
              prototypes(embed({{1, 0}, {0, 1}}), logits({{1, 0}, {0, 1}}), {WeightScheme::Csas, Vector::Zero(2)});
            }),
            Errc::AllClassesUndefined);
}

TEST(Prototypes, NegativeWeightsAreRejected) {
  Vector z(2);
  z << 1, -1;
  EXPECT_EQ(code_of([&] { prototypes(embed({{1, 0}, {0, 1}}), logits({{1, 0}, {0, 1}}), {WeightScheme::Mls, z}); }),
            Errc::BadValue);
}

TEST(Prototypes, NormalizedRowsHaveUnitNorm) {
  Rng rng(6);
  const auto in = random_instance(rng, 40, 5, 3, 1);
  const auto ps = prototypes(in.e, in.l, zeta_weights(WeightScheme::Msp, in.l));
  for (Eigen::Index j = 0; j < ps.c(); ++j) EXPECT_NEAR(ps.protos_norm.row(j).norm(), 1.0, 1e-9);
}

TEST(PseudoLogits, UnitCosineOverTau) {
  Matrix p(1, 2);
  p << 1, 0;
  const auto out = pseudo_logits(embed({{2, 0}, {0, 3}}), unit_prototypes(p));
  EXPECT_NEAR(out.logits(0, 0), 1.0 / 0.07, 1e-12);
  EXPECT_NEAR(out.logits(0, 0), 14.2857, 1e-4);
  EXPECT_EQ(out.logits(1, 0), 0.0);
}

TEST(PseudoLogits, DiagonalEmbedding) {
  const auto out = pseudo_logits(embed({{1, 1}}), unit_prototypes(Matrix::Identity(2, 2)));
  EXPECT_NEAR(out.logits(0, 0), (1.0 / std::sqrt(2.0)) / 0.07, 1e-12);
  EXPECT_NEAR(out.logits(0, 1), 10.1015, 1e-4);
  EXPECT_EQ(out.hard[0], 0u);
  EXPECT_EQ(out.conf[0], out.logits(0, 0));
}

TEST(PseudoLogits, UndefinedPrototypeIsRejected) {
  auto ps = unit_prototypes(Matrix::Identity(2, 2));
  ps.defined[1] = false;
  EXPECT_EQ(code_of([&] { pseudo_logits(embed({{1, 1}}), ps); }), Errc::UndefinedPrototype);
}

TEST(PseudoLogits, ZeroEmbeddingIsRejected) {
  EXPECT_EQ(code_of([] { pseudo_logits(embed({{0, 0}}), unit_prototypes(Matrix::Identity(2, 2))); }),
            Errc::ZeroNormEmbedding);
}

TEST(PseudoLogits, BoundedByInverseTau) {
  Rng rng(17);
  for (double tau : {0.07, 0.5, 2.0}) {
    const auto out = pseudo_logits(EmbeddingSet(testing::random_matrix(rng, 200, 6)),
                                   unit_prototypes(testing::random_matrix(rng, 4, 6), tau));
    EXPECT_LE(out.logits.cwiseAbs().maxCoeff(), 1.0 / tau);
  }
}

TEST(PseudoLogits, InvariantToRowAndPrototypeScaling) {
  Rng rng(23);
  const Matrix x = testing::random_matrix(rng, 50, 5);
  const Matrix p = testing::random_matrix(rng, 3, 5);
  const auto base = pseudo_logits(EmbeddingSet(x), unit_prototypes(p));

  Matrix xs = x;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) xs.row(i) *= rng.uniform(0.01, 100.0);
  const auto scaled_rows = pseudo_logits(EmbeddingSet(xs), unit_prototypes(p));
  EXPECT_LT((scaled_rows.logits - base.logits).cwiseAbs().maxCoeff(), 1e-12);

  const auto scaled_protos = pseudo_logits(EmbeddingSet(x), unit_prototypes(37.5 * p));
  EXPECT_LT((scaled_protos.logits - base.logits).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PseudoLogits, HardLabelsIgnoreTau) {
  Rng rng(29);
  const Matrix x = testing::random_matrix(rng, 300, 4);
  const Matrix p = testing::random_matrix(rng, 3, 4);
  const auto a = pseudo_logits(EmbeddingSet(x), unit_prototypes(p, 0.07));
  for (double tau : {0.01, 1.0, 10.0}) EXPECT_EQ(pseudo_logits(EmbeddingSet(x), unit_prototypes(p, tau)).hard, a.hard);
}

TEST(PseudoLabels, FileRoundTrip) {
  testing::TempDir dir;
  Rng rng(1);
  const auto ps = make_pseudo_label_set(testing::random_f32_matrix(rng, 10, 3));
  write_pseudo_labels(dir / "p.psl", ps);
  const auto back = read_pseudo_labels(dir / "p.psl");
  EXPECT_EQ(back.logits, ps.logits);
  EXPECT_EQ(back.hard, ps.hard);
}

TEST(RunPseudolabel, EqualsTheComposedSteps) {
  const auto b = make_benchmark(SynthConfig{});
  ProtoConfig cfg;
  cfg.k = 8;
  cfg.n_mc = 4;
  const auto run = run_pseudolabel(b.data.target, b.target_logits, cfg, {}, 5);
  const auto mc = mc_partitions(b.data.target, 8, 4, 5);
  const auto w = zeta_weights(WeightScheme::Csas, b.target_logits, mc);
  const auto manual = pseudo_logits(b.data.target, prototypes(b.data.target, b.target_logits, w));
  EXPECT_EQ(run.weights.zeta, w.zeta);
  EXPECT_EQ(run.labels.logits, manual.logits);
}

}  // namespace
}  // namespace osda
