#pragma once

#include <cstdint>

#include "osda/cluster.hpp"
#include "osda/embstore.hpp"
#include "osda/matrix.hpp"
#include "osda/protolab.hpp"

namespace osda {

// Defaults are the moderate-shift benchmark used by the ablations.
struct SynthConfig {
  int d = 16;
  int c = 3;
  int c_open = 2;
  int n_per_class = 200;
  /// Distance of closed-set class means from the origin.
  double center_radius = 3.5;
  /// Isotropic standard deviation of every class cluster.
  double spread = 1.0;
  /// Each open-set mean sits at the centroid of the closed-set means, moved
  /// this far along a direction orthogonal to all of them.
  double open_offset = 1.0;
  /// Target shift: x -> scale * R x + translation * u. R rotates by
  /// `rotation` radians in the plane of the first two class means; u is a
  /// random unit vector orthogonal to every class mean.
  double rotation = 0.85;
  double translation = 2.0;
  double scale = 0.75;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  EmbeddingSet source;
  LabelSet source_labels;
  EmbeddingSet target;
  /// Labels >= c are the open-set classes.
  LabelSet target_labels;
  Matrix closed_means;
  Matrix open_means;
};

/// Gaussian clusters per class. Source holds closed-set classes only; the
/// target holds every class pushed through the affine shift.
SynthDataset gen_dataset(const SynthConfig& cfg);

struct LinearModel {
  Matrix weights;  // c x d
  Vector bias;     // c
};

struct SourceFitConfig {
  int max_iters = 3000;
  double grad_tol = 1e-6;
  double learning_rate = 0.5;
  /// L2 penalty on the weights; keeps the optimum finite on separable data.
  double weight_decay = 1e-2;
};

/// Multinomial logistic regression by full-batch gradient descent.
/// DegenerateData unless at least two classes are present.
LinearModel fit_source_model(const EmbeddingSet& x, const LabelSet& y, const SourceFitConfig& cfg = {});

SourceLogits source_logits(const LinearModel& model, const EmbeddingSet& x);

/// Straight-line re-derivation of the CSAS pseudo-logits from the given
/// partitions, written with plain loops and no shared code beyond the
/// partitions themselves. Limited to n <= 200.
PseudoLabelSet oracle_from_partitions(const EmbeddingSet& e, const SourceLogits& l, const McPartitions& mc,
                                      double tau);

/// Clusters with mc_partitions and hands the runs to oracle_from_partitions.
PseudoLabelSet oracle_pipeline(const EmbeddingSet& e, const SourceLogits& l, int k, int n_mc, std::uint64_t seed,
                               double tau, const KMeansConfig& kcfg = {});

/// Everything the ablations need: dataset, fitted source model and its
/// logits on the target.
struct Benchmark {
  SynthDataset data;
  LinearModel model;
  SourceLogits target_logits;
};

Benchmark make_benchmark(const SynthConfig& cfg, const SourceFitConfig& fit = {});

}  // namespace osda
