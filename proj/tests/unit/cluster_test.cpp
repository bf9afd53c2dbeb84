#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "osda/cluster.hpp"
#include "osda/errors.hpp"
#include "osda/synthbench.hpp"
#include "support/testing.hpp"

namespace osda {
namespace {

using testing::code_of;

EmbeddingSet column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return EmbeddingSet(m);
}

bool all_nonempty(const Partition& p) {
  const auto sizes = p.sizes();
  return std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
}

TEST(KMeans, SeparatesTwoPoints) {
  const auto p = kmeans_fit(column({0, 10}), 2, 1);
  EXPECT_NE(p.assign[0], p.assign[1]);
  EXPECT_EQ(p.objective, 0.0);
}

TEST(KMeans, SingleClusterIsTheColumnMean) {
  Rng rng(4);
  const EmbeddingSet e(testing::random_matrix(rng, 30, 5));
  const auto p = kmeans_fit(e, 1, 9);
  const Eigen::RowVectorXd mean = e.data.colwise().mean();
  EXPECT_LT((p.centroids.row(0) - mean).norm(), 1e-12);
  EXPECT_TRUE(std::all_of(p.assign.begin(), p.assign.end(), [](auto a) { return a == 0; }));
}

TEST(KMeans, FourPointsMatchExhaustiveOptimum) {
  const auto e = column({0, 1, 9, 10});
  EXPECT_DOUBLE_EQ(testing::exhaustive_two_means(e.data), 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = kmeans_fit(e, 2, seed);
    std::vector<double> c = {p.centroids(0, 0), p.centroids(1, 0)};
    std::sort(c.begin(), c.end());
    EXPECT_DOUBLE_EQ(c[0], 0.5);
    EXPECT_DOUBLE_EQ(c[1], 9.5);
    EXPECT_DOUBLE_EQ(p.objective, 1.0);
  }
}

TEST(KMeans, KLargerThanNIsRejected) {
  EXPECT_EQ(code_of([] { kmeans_fit(column({1, 2}), 3, 0); }), Errc::KTooLarge);
  EXPECT_EQ(code_of([] { mc_partitions(column({1, 2}), 3, 2, 0); }), Errc::KTooLarge);
}

TEST(KMeans, ObjectiveNeverIncreases) {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 20 + static_cast<Eigen::Index>(rng.below(80));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(6));
    const EmbeddingSet e(testing::random_matrix(rng, n, d));
    const int k = 1 + static_cast<int>(rng.below(8));
    const auto p = kmeans_fit(e, k, rng.next_u64());
    ASSERT_FALSE(p.history.empty());
    for (std::size_t i = 1; i < p.history.size(); ++i) EXPECT_LE(p.history[i], p.history[i - 1]);
    EXPECT_DOUBLE_EQ(p.history.back(), p.objective);
    EXPECT_GE(p.objective, 0.0);
    EXPECT_TRUE(all_nonempty(p));
  }
}

TEST(KMeans, AssignmentsAreNearestCentroid) {
  Rng rng(2);
  const EmbeddingSet e(testing::random_matrix(rng, 60, 3));
  const auto p = kmeans_fit(e, 5, 3);
  EXPECT_EQ(assign(p, e), p.assign);
}

TEST(KMeans, ObjectiveIsTheSumOfSquaredDistances) {
  Rng rng(8);
  const EmbeddingSet e(testing::random_matrix(rng, 50, 4));
  const auto p = kmeans_fit(e, 4, 1);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < e.n(); ++i) sse += (e.data.row(i) - p.centroids.row(p.assign[i])).squaredNorm();
  EXPECT_NEAR(p.objective, sse, 1e-9 * sse);
}

TEST(KMeans, UniformScalingScalesTheObjective) {
  Rng rng(21);
  for (double gamma : {0.25, 2.0, 3.0, 10.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = testing::random_matrix(rng, 40, 3);
      const std::uint64_t seed = rng.next_u64();
      const auto a = kmeans_fit(EmbeddingSet(x), 4, seed);
      const auto b = kmeans_fit(EmbeddingSet(gamma * x), 4, seed);
      EXPECT_EQ(a.assign, b.assign) << "gamma " << gamma;
      EXPECT_NEAR(b.objective, gamma * gamma * a.objective, 1e-9 * b.objective);
    }
  }
}

TEST(KMeans, BestOfFiftySeedsReachesTheOptimumOnTinyInstances) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = 3 + static_cast<Eigen::Index>(rng.below(6));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Matrix x = testing::random_matrix(rng, n, d);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 50; ++seed) best = std::min(best, kmeans_fit(EmbeddingSet(x), 2, seed).objective);
    const double opt = testing::exhaustive_two_means(x);
    EXPECT_NEAR(best, opt, 1e-12 * std::max(1.0, opt));
  }
}

TEST(KMeans, DuplicatePointsStillFillEveryCluster) {
  Matrix x = Matrix::Zero(6, 2);
  x(5, 0) = 1.0;
  const auto p = kmeans_fit(EmbeddingSet(x), 4, 0);
  EXPECT_TRUE(all_nonempty(p));
}

TEST(KMeans, NormalizedClusteringUsesUnitRows) {
  Rng rng(5);
  const Matrix x = testing::random_matrix(rng, 30, 3);
  KMeansConfig cfg;
  cfg.normalize = true;
  const auto a = kmeans_fit(EmbeddingSet(x), 3, 2, cfg);
  EXPECT_TRUE(a.normalized);
  // Scaling each row by its own positive factor leaves a normalized run unchanged.
  Matrix y = x;
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) *= 1.0 + static_cast<double>(i);
  const auto b = kmeans_fit(EmbeddingSet(y), 3, 2, cfg);
  EXPECT_EQ(a.assign, b.assign);
}

TEST(Assign, PointAtCentroidTakesItsLabel) {
  Partition p;
  p.k = 3;
  p.centroids.resize(3, 2);
  p.centroids << 0, 0, 5, 5, -3, 1;
  Matrix q(1, 2);
  q << -3, 1;
  EXPECT_EQ(assign(p, EmbeddingSet(q)), std::vector<std::uint32_t>{2});
}

TEST(Assign, TiesGoToTheLowestIndex) {
  Partition p;
  p.k = 2;
  p.centroids.resize(2, 1);
  p.centroids << -1, 1;
  EXPECT_EQ(assign(p, column({0})), std::vector<std::uint32_t>{0});
}

TEST(Assign, DimensionMismatchIsRejected) {
  Partition p;
  p.k = 1;
  p.centroids = Matrix::Zero(1, 3);
  EXPECT_EQ(code_of([&] { assign(p, EmbeddingSet(Matrix::Zero(2, 4))); }), Errc::DimMismatch);
}

TEST(McPartitions, SingleRunEqualsKMeansFit) {
  Rng rng(3);
  const EmbeddingSet e(testing::random_matrix(rng, 50, 4));
  const auto mc = mc_partitions(e, 5, 1, 42);
  ASSERT_EQ(mc.runs.size(), 1u);
  const auto p = kmeans_fit(e, 5, 42);
  EXPECT_EQ(mc.runs[0].assign, p.assign);
  EXPECT_EQ(mc.runs[0].centroids, p.centroids);
  EXPECT_EQ(mc.runs[0].objective, p.objective);
}

TEST(McPartitions, RunRUsesBaseSeedPlusR) {
  Rng rng(6);
  const EmbeddingSet e(testing::random_matrix(rng, 40, 3));
  const auto mc = mc_partitions(e, 4, 5, 100);
  EXPECT_EQ(mc.base_seed, 100u);
  for (std::size_t r = 0; r < mc.runs.size(); ++r) {
    EXPECT_EQ(mc.runs[r].seed, 100 + r);
    EXPECT_EQ(mc.runs[r].assign, kmeans_fit(e, 4, 100 + r).assign);
  }
}

TEST(McPartitions, DeterministicAndScheduleIndependent) {
  Rng rng(10);
  const EmbeddingSet e(testing::random_matrix(rng, 80, 5));
  const auto a = mc_partitions(e, 6, 8, 7, {}, 1);
  const auto b = mc_partitions(e, 6, 8, 7, {}, 4);
  const auto c = mc_partitions(e, 6, 8, 7);
  ASSERT_EQ(a.runs.size(), 8u);
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    EXPECT_EQ(a.runs[r].assign, b.runs[r].assign);
    EXPECT_EQ(a.runs[r].centroids, b.runs[r].centroids);
    EXPECT_EQ(a.runs[r].assign, c.runs[r].assign);
  }
}

TEST(McPartitions, DefaultShapeOnTheSyntheticBenchmark) {
  const auto b = make_benchmark(SynthConfig{});
  const auto mc = mc_partitions(b.data.target, 16, 32, 0);
  ASSERT_EQ(mc.runs.size(), 32u);
  for (const auto& run : mc.runs) {
    EXPECT_EQ(run.k, 16);
    EXPECT_EQ(run.assign.size(), static_cast<std::size_t>(b.data.target.n()));
    EXPECT_TRUE(all_nonempty(run));
  }
}

TEST(McPartitions, ZeroRunsIsRejected) {
  EXPECT_EQ(code_of([] { mc_partitions(column({1, 2, 3}), 2, 0, 0); }), Errc::BadValue);
}

TEST(Partition, FileRoundTripKeepsAssignments) {
  testing::TempDir dir;
  Rng rng(1);
  const EmbeddingSet e(testing::random_matrix(rng, 25, 2));
  const auto p = kmeans_fit(e, 3, 0);
  write_partition(dir / "p.prt", p);
  const auto q = read_partition(dir / "p.prt");
  EXPECT_EQ(q.k, 3);
  EXPECT_EQ(q.assign, p.assign);
}

TEST(Partition, AssignmentBeyondKIsRejected) {
  testing::TempDir dir;
  Partition p;
  p.k = 2;
  p.assign = {0, 1, 2};
  write_partition(dir / "p.prt", p);
  EXPECT_EQ(code_of([&] { read_partition(dir / "p.prt"); }), Errc::LabelOutOfRange);
}

}  // namespace
}  // namespace osda
