#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "osda/cluster.hpp"
#include "osda/embstore.hpp"
#include "osda/matrix.hpp"

namespace osda {

enum class WeightScheme { Uniform, Msp, Mls, Csas };

std::string_view to_string(WeightScheme s) noexcept;
std::optional<WeightScheme> parse_weight_scheme(std::string_view name) noexcept;

/// Row-wise argmax; ties resolve to the lowest column.
std::vector<std::uint32_t> argmax_rows(const Matrix& m);

/// Closed-set affinity of a cluster: the largest entry of the members' mean
/// logit vector. Raw logits, no softmax.
double csas(const SourceLogits& l, std::span<const std::size_t> members);

/// phi_hat_k = phi_k - size_k * min_i(phi_i / size_i). The cluster(s) attaining
/// the minimum ratio map to exactly 0 and rounding never produces negatives.
std::vector<double> normalize_csas(std::span<const double> phi, std::span<const std::size_t> sizes);

struct ClusterStats {
  double csas = 0.0;
  double csas_norm = 0.0;
  std::size_t size = 0;
  /// Fraction of members whose source argmax is each class.
  Vector prior;
  /// Mean feature of the members predicted as each class; rows of absent
  /// classes are zero and flagged invalid.
  Matrix cond_mean;
  std::vector<bool> valid;
};

using ClusterAttributes = std::vector<ClusterStats>;

ClusterAttributes cluster_attributes(const SourceLogits& l, const EmbeddingSet& e, const Partition& p);

struct WeightVector {
  WeightScheme scheme = WeightScheme::Uniform;
  Vector zeta;
};

/// Per-sample weight for a single partition: phi_hat(D_k(x)) / |D_k(x)|.
Vector csas_zeta(const SourceLogits& l, const Partition& p);

/// Uniform, MSP and MLS weights. The CSAS scheme needs partitions and throws
/// MissingPartitions through this overload.
WeightVector zeta_weights(WeightScheme scheme, const SourceLogits& l);
/// CSAS weights are the mean of csas_zeta over the Monte-Carlo runs; the
/// other schemes ignore `mc`.
WeightVector zeta_weights(WeightScheme scheme, const SourceLogits& l, const McPartitions& mc);

struct PrototypeSet {
  Matrix protos;
  Matrix protos_norm;
  double tau = 0.07;
  std::vector<bool> defined;

  Eigen::Index c() const noexcept { return protos.rows(); }
};

/// Weighted mean feature of each class as predicted by the source argmax.
/// A class without positive weight mass is left undefined; if every class is
/// undefined the call throws AllClassesUndefined.
PrototypeSet prototypes(const EmbeddingSet& e, const SourceLogits& l, const WeightVector& w, double tau = 0.07);

/// The same prototypes assembled from per-cluster prior, conditional mean and
/// normalized CSAS of a single partition.
PrototypeSet prototypes_from_clusters(const ClusterAttributes& attrs, double tau = 0.07);

struct PseudoLabelSet {
  Matrix logits;
  std::vector<std::uint32_t> hard;
  Vector conf;

  Eigen::Index n() const noexcept { return logits.rows(); }
  Eigen::Index c() const noexcept { return logits.cols(); }
};

/// Fills `hard` and `conf` from the logits.
PseudoLabelSet make_pseudo_label_set(Matrix logits);

/// Cosine similarity to each unit prototype divided by tau.
PseudoLabelSet pseudo_logits(const EmbeddingSet& e, const PrototypeSet& ps);

/// "PSL1": magic, n, c, float32 logits.
void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabelSet& ps);
PseudoLabelSet read_pseudo_labels(const std::filesystem::path& path);

struct ProtoConfig {
  WeightScheme scheme = WeightScheme::Csas;
  double tau = 0.07;
  int k = 16;
  int n_mc = 32;
};

struct PseudoLabelRun {
  WeightVector weights;
  PrototypeSet prototypes;
  PseudoLabelSet labels;
};

/// Clustering (CSAS only), weighting, prototypes and pseudo-logits in one call.
PseudoLabelRun run_pseudolabel(const EmbeddingSet& e, const SourceLogits& l, const ProtoConfig& cfg,
                               const KMeansConfig& kcfg, std::uint64_t seed);

}  // namespace osda
