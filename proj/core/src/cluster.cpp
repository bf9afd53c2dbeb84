#include "osda/cluster.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "osda/binio.hpp"
#include "osda/errors.hpp"
#include "osda/rng.hpp"

namespace osda {

namespace {

Matrix clustering_space(const Matrix& x, bool normalize) {
  if (!normalize) return x;
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

std::uint32_t nearest(const Matrix& x, Eigen::Index i, const Matrix& centroids) {
  std::uint32_t best = 0;
  double best_d = sq_dist(x, i, centroids, 0);
  for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
    const double dj = sq_dist(x, i, centroids, j);
    if (dj < best_d) {
      best_d = dj;
      best = static_cast<std::uint32_t>(j);
    }
  }
  return best;
}

Matrix kmeanspp(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centroids(k, x.cols());
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = x.row(first);

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(x, i, centroids, 0);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;

    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x, i, centroids, c));
  }
  return centroids;
}

// Moves the point farthest from its centroid into each empty cluster and
// seats the cluster's centroid on it. Donor clusters always keep >= 1 member.
void repair_empty(const Matrix& x, std::vector<std::uint32_t>& labels, Matrix& centroids) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> counts(k, 0);
  for (auto a : labels) ++counts[a];

  for (std::size_t empty = 0; empty < k; ++empty) {
    if (counts[empty] != 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto a = labels[i];
      if (counts[a] < 2) continue;
      const double di = sq_dist(x, i, centroids, a);
      if (di > far_d) {
        far_d = di;
        far = i;
      }
    }
    --counts[labels[far]];
    labels[far] = static_cast<std::uint32_t>(empty);
    ++counts[empty];
    centroids.row(static_cast<Eigen::Index>(empty)) = x.row(far);
  }
}

double objective(const Matrix& x, const std::vector<std::uint32_t>& labels, const Matrix& centroids) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) total += sq_dist(x, i, centroids, labels[i]);
  return total;
}

Matrix cluster_means(const Matrix& x, const std::vector<std::uint32_t>& labels, int k) {
  Matrix sums = Matrix::Zero(k, x.cols());
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(labels[i]) += x.row(i);
    counts[labels[i]] += 1.0;
  }
  for (int j = 0; j < k; ++j) sums.row(j) /= counts[j];
  return sums;
}

void check_k(const EmbeddingSet& e, int k) {
  if (k < 1 || k > e.n()) {
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " with n=" + std::to_string(e.n()));
  }
}

}  // namespace

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
  for (auto a : assign) ++out[a];
  return out;
}

Partition kmeans_fit(const EmbeddingSet& e, int k, std::uint64_t seed, const KMeansConfig& cfg) {
  check_k(e, k);
  const Matrix x = clustering_space(e.data, cfg.normalize);
  const Eigen::Index n = x.rows();
  Rng rng(seed);

  Partition p;
  p.k = k;
  p.seed = seed;
  p.normalized = cfg.normalize;
  p.centroids = kmeanspp(x, k, rng);
  p.assign.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) p.assign[i] = nearest(x, i, p.centroids);
  repair_empty(x, p.assign, p.centroids);
  p.objective = objective(x, p.assign, p.centroids);
  p.history.push_back(p.objective);

  std::vector<std::uint32_t> next(p.assign.size());
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (p.objective <= 0.0) break;
    Matrix centroids = cluster_means(x, p.assign, k);
    for (Eigen::Index i = 0; i < n; ++i) next[i] = nearest(x, i, centroids);
    repair_empty(x, next, centroids);
    const double obj = objective(x, next, centroids);
    p.history.push_back(obj);

    const bool converged = (p.objective - obj) <= cfg.tol * p.objective;
    p.assign.swap(next);
    p.centroids = std::move(centroids);
    p.objective = obj;
    if (converged) break;
  }
  return p;
}

std::vector<std::uint32_t> assign(const Partition& p, const EmbeddingSet& e) {
  if (p.centroids.rows() == 0 || p.centroids.cols() != e.d()) {
    throw Error(Errc::DimMismatch, "centroid dim " + std::to_string(p.centroids.cols()) + " vs embedding dim " +
                                       std::to_string(e.d()));
  }
  const Matrix x = clustering_space(e.data, p.normalized);
  std::vector<std::uint32_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = nearest(x, i, p.centroids);
  return out;
}

McPartitions mc_partitions(const EmbeddingSet& e, int k, int n_mc, std::uint64_t base_seed,
                           const KMeansConfig& cfg, unsigned threads) {
  check_k(e, k);
  if (n_mc < 1) throw Error(Errc::BadValue, "n_mc must be >= 1");

  McPartitions mc;
  mc.base_seed = base_seed;
  mc.runs.resize(static_cast<std::size_t>(n_mc));

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_mc));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int r = next++; r < n_mc; r = next++) {
      try {
        mc.runs[static_cast<std::size_t>(r)] = kmeans_fit(e, k, base_seed + static_cast<std::uint64_t>(r), cfg);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return mc;
}

void write_partition(const std::filesystem::path& path, const Partition& p) {
  binio::Writer w;
  w.magic("PRT1");
  w.u32(static_cast<std::uint32_t>(p.assign.size()));
  w.u32(static_cast<std::uint32_t>(p.k));
  for (auto a : p.assign) w.u32(a);
  w.save(path);
}

Partition read_partition(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("PRT1");
  const std::uint32_t n = r.u32();
  const std::uint32_t k = r.u32();
  r.require(std::size_t{n} * 4);
  Partition p;
  p.k = static_cast<int>(k);
  p.assign.resize(n);
  for (auto& a : p.assign) {
    a = r.u32();
    if (a >= k) throw Error(Errc::LabelOutOfRange, path.string() + ": assignment >= k");
  }
  r.finish();
  return p;
}

}  // namespace osda
