#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "osda/embstore.hpp"
#include "osda/matrix.hpp"

namespace osda {

struct KMeansConfig {
  int max_iters = 100;
  /// Stop once the relative objective improvement drops to or below tol.
  double tol = 1e-6;
  /// L2-normalize embeddings before clustering.
  bool normalize = false;
};

/// One K-means result. Centroids live in the clustering space (normalized
/// embeddings when `normalized` is set).
struct Partition {
  int k = 0;
  std::vector<std::uint32_t> assign;
  Matrix centroids;
  double objective = 0.0;
  std::uint64_t seed = 0;
  bool normalized = false;
  /// Objective after the initial assignment and after every Lloyd iteration.
  std::vector<double> history;

  std::vector<std::size_t> sizes() const;
};

struct McPartitions {
  std::vector<Partition> runs;
  std::uint64_t base_seed = 0;
};

/// Lloyd iterations from a k-means++ seeding. Clusters that empty out are
/// refilled with the point farthest from its centroid, so every returned
/// cluster is nonempty.
Partition kmeans_fit(const EmbeddingSet& e, int k, std::uint64_t seed, const KMeansConfig& cfg = {});

/// Nearest-centroid labels under squared Euclidean distance; ties go to the
/// lowest centroid index.
std::vector<std::uint32_t> assign(const Partition& p, const EmbeddingSet& e);

/// `n_mc` independent fits, run r seeded with base_seed + r. Runs may execute
/// on up to `threads` workers (0 = hardware concurrency); the result is
/// ordered by run index regardless of scheduling.
McPartitions mc_partitions(const EmbeddingSet& e, int k, int n_mc, std::uint64_t base_seed,
                           const KMeansConfig& cfg = {}, unsigned threads = 0);

/// "PRT1": magic, n, k, then n u32 assignments.
void write_partition(const std::filesystem::path& path, const Partition& p);
/// Reads back assignments and k; centroids are left empty.
Partition read_partition(const std::filesystem::path& path);

}  // namespace osda
