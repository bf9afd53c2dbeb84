#include "osda/synthbench.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "osda/errors.hpp"
#include "osda/rng.hpp"

namespace osda {

namespace {

Vector random_unit(Rng& rng, int d) {
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

// Unit vector orthogonal to every column of `basis` (assumed orthonormal), or
// zero when the basis already spans the space.
Vector random_orthogonal(Rng& rng, int d, const std::vector<Vector>& basis) {
  if (static_cast<int>(basis.size()) >= d) return Vector::Zero(d);
  for (;;) {
    Vector v = random_unit(rng, d);
    for (const auto& b : basis) v -= v.dot(b) * b;
    const double norm = v.norm();
    if (norm > 1e-6) return v / norm;
  }
}

void check_config(const SynthConfig& cfg) {
  if (cfg.d < 2 || cfg.c < 2 || cfg.c_open < 1 || cfg.n_per_class < 1 || cfg.spread < 0.0 || !(cfg.scale > 0.0) ||
      !(cfg.center_radius > 0.0)) {
    throw Error(Errc::BadValue, "synthetic config needs d >= 2, c >= 2, c_open >= 1, n_per_class >= 1, "
                                "spread >= 0, scale > 0, center_radius > 0");
  }
}

}  // namespace

SynthDataset gen_dataset(const SynthConfig& cfg) {
  check_config(cfg);
  Rng rng(cfg.seed);
  const int d = cfg.d;

  SynthDataset out;
  out.closed_means.resize(cfg.c, d);
  for (int j = 0; j < cfg.c; ++j) out.closed_means.row(j) = cfg.center_radius * random_unit(rng, d).transpose();
  out.open_means.resize(cfg.c_open, d);
  std::vector<Vector> span;
  for (int j = 0; j < cfg.c; ++j) {
    Vector v = out.closed_means.row(j).transpose();
    for (const auto& b : span) v -= v.dot(b) * b;
    if (v.norm() > 1e-9) span.push_back(v.normalized());
  }
  const Vector centroid = out.closed_means.colwise().mean().transpose();
  for (int o = 0; o < cfg.c_open; ++o) {
    const Vector dir = random_orthogonal(rng, d, span);
    out.open_means.row(o) = (centroid + cfg.open_offset * dir).transpose();
  }

  // The rotation acts in the plane of the first two class means, so it moves
  // classes across the source decision boundaries.
  const Vector u1 = span[0];
  const Vector u2 = span.size() > 1 ? span[1] : random_orthogonal(rng, d, {u1});
  const Matrix rot = Matrix::Identity(d, d) + (std::cos(cfg.rotation) - 1.0) * (u1 * u1.transpose() + u2 * u2.transpose()) +
                     std::sin(cfg.rotation) * (u2 * u1.transpose() - u1 * u2.transpose());
  const Vector shift = cfg.translation * random_orthogonal(rng, d, span);

  const int n_src = cfg.c * cfg.n_per_class;
  Matrix src(n_src, d);
  out.source_labels.num_closed = static_cast<std::uint32_t>(cfg.c);
  for (int j = 0, row = 0; j < cfg.c; ++j) {
    for (int i = 0; i < cfg.n_per_class; ++i, ++row) {
      for (int a = 0; a < d; ++a) src(row, a) = out.closed_means(j, a) + cfg.spread * rng.normal();
      out.source_labels.labels.push_back(static_cast<std::uint32_t>(j));
    }
  }
  out.source = EmbeddingSet(std::move(src));

  const int classes = cfg.c + cfg.c_open;
  Matrix tgt(classes * cfg.n_per_class, d);
  out.target_labels.num_closed = static_cast<std::uint32_t>(cfg.c);
  Vector x(d);
  for (int j = 0, row = 0; j < classes; ++j) {
    const auto mean = j < cfg.c ? out.closed_means.row(j) : out.open_means.row(j - cfg.c);
    for (int i = 0; i < cfg.n_per_class; ++i, ++row) {
      for (int a = 0; a < d; ++a) x[a] = mean(a) + cfg.spread * rng.normal();
      tgt.row(row) = (cfg.scale * (rot * x) + shift).transpose();
      out.target_labels.labels.push_back(static_cast<std::uint32_t>(j));
    }
  }
  out.target = EmbeddingSet(std::move(tgt));
  return out;
}

LinearModel fit_source_model(const EmbeddingSet& x, const LabelSet& y, const SourceFitConfig& cfg) {
  if (x.n() != y.n()) throw Error(Errc::CountMismatch, "embeddings and labels differ in length");
  const int c = static_cast<int>(y.num_closed);
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(c, 0)), 0);
  for (auto v : y.labels) {
    if (v >= y.num_closed) throw Error(Errc::LabelOutOfRange, "source labels must be closed-set");
    ++counts[v];
  }
  int present = 0;
  for (auto n : counts) present += n > 0;
  if (present < 2) throw Error(Errc::DegenerateData, "need at least two source classes, found " + std::to_string(present));

  const Eigen::Index n = x.n(), d = x.d();
  Matrix onehot = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y.labels[i]) = 1.0;

  LinearModel m{Matrix::Zero(c, d), Vector::Zero(c)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < cfg.max_iters; ++it) {
    Matrix logits = x.data * m.weights.transpose();
    logits.rowwise() += m.bias.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double top = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - top).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const Matrix residual = (logits - onehot) * inv_n;
    const Matrix gw = residual.transpose() * x.data + cfg.weight_decay * m.weights;
    const Vector gb = residual.colwise().sum().transpose();
    const double gnorm = std::sqrt(gw.squaredNorm() + gb.squaredNorm());
    if (gnorm < cfg.grad_tol) break;
    m.weights -= cfg.learning_rate * gw;
    m.bias -= cfg.learning_rate * gb;
  }
  return m;
}

SourceLogits source_logits(const LinearModel& model, const EmbeddingSet& x) {
  if (model.weights.cols() != x.d()) throw Error(Errc::DimMismatch, "model and embedding dims differ");
  Matrix l = x.data * model.weights.transpose();
  l.rowwise() += model.bias.transpose();
  return SourceLogits{std::move(l)};
}

PseudoLabelSet oracle_from_partitions(const EmbeddingSet& e, const SourceLogits& l, const McPartitions& mc,
                                      double tau) {
  const std::size_t n = static_cast<std::size_t>(e.n());
  if (n > 200) throw Error(Errc::TooLargeForOracle, "oracle handles at most 200 samples, got " + std::to_string(n));
  if (static_cast<std::size_t>(l.n()) != n) throw Error(Errc::CountMismatch, "embeddings and logits differ in length");
  if (mc.runs.empty()) throw Error(Errc::MissingPartitions, "no partitions");
  const std::size_t c = static_cast<std::size_t>(l.c());
  const std::size_t d = static_cast<std::size_t>(e.d());

  std::vector<std::size_t> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (l.data(i, j) > l.data(i, best)) best = j;
    pred[i] = best;
  }

  std::vector<double> zeta(n, 0.0);
  for (const Partition& run : mc.runs) {
    const std::size_t k = static_cast<std::size_t>(run.k);
    std::vector<double> phi(k, 0.0), size(k, 0.0);
    for (std::size_t cl = 0; cl < k; ++cl) {
      std::vector<double> mean(c, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (run.assign[i] != cl) continue;
        size[cl] += 1.0;
        for (std::size_t j = 0; j < c; ++j) mean[j] += l.data(i, j);
      }
      if (size[cl] == 0.0) throw Error(Errc::EmptyCluster, "oracle met an empty cluster");
      double best = mean[0] / size[cl];
      for (std::size_t j = 1; j < c; ++j) best = std::max(best, mean[j] / size[cl]);
      phi[cl] = best;
    }
    double min_ratio = phi[0] / size[0];
    for (std::size_t cl = 1; cl < k; ++cl) min_ratio = std::min(min_ratio, phi[cl] / size[cl]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cl = run.assign[i];
      const double ratio = phi[cl] / size[cl];
      double phi_hat = ratio == min_ratio ? 0.0 : phi[cl] - size[cl] * min_ratio;
      if (phi_hat < 0.0) phi_hat = 0.0;
      zeta[i] += phi_hat / size[cl];
    }
  }
  for (auto& z : zeta) z /= static_cast<double>(mc.runs.size());

  std::vector<std::vector<double>> proto(c, std::vector<double>(d, 0.0));
  std::vector<double> mass(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    mass[pred[i]] += zeta[i];
    for (std::size_t a = 0; a < d; ++a) proto[pred[i]][a] += zeta[i] * e.data(i, a);
  }
  bool any = false;
  for (std::size_t j = 0; j < c; ++j) any = any || mass[j] > 0.0;
  if (!any) throw Error(Errc::AllClassesUndefined, "oracle: no class has positive weight mass");
  for (std::size_t j = 0; j < c; ++j) {
    if (!(mass[j] > 0.0)) throw Error(Errc::UndefinedPrototype, "oracle: class " + std::to_string(j) + " undefined");
    double norm = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      proto[j][a] /= mass[j];
      norm += proto[j][a] * proto[j][a];
    }
    norm = std::sqrt(norm);
    for (std::size_t a = 0; a < d; ++a) proto[j][a] /= norm;
  }

  Matrix logits(e.n(), l.c());
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t a = 0; a < d; ++a) norm += e.data(i, a) * e.data(i, a);
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(Errc::ZeroNormEmbedding, "oracle: zero-norm embedding");
    for (std::size_t j = 0; j < c; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < d; ++a) dot += e.data(i, a) * proto[j][a];
      logits(i, j) = dot / norm / tau;
    }
  }
  return make_pseudo_label_set(std::move(logits));
}

PseudoLabelSet oracle_pipeline(const EmbeddingSet& e, const SourceLogits& l, int k, int n_mc, std::uint64_t seed,
                               double tau, const KMeansConfig& kcfg) {
  if (e.n() > 200) throw Error(Errc::TooLargeForOracle, "oracle handles at most 200 samples");
  return oracle_from_partitions(e, l, mc_partitions(e, k, n_mc, seed, kcfg), tau);
}

Benchmark make_benchmark(const SynthConfig& cfg, const SourceFitConfig& fit) {
  Benchmark b;
  b.data = gen_dataset(cfg);
  b.model = fit_source_model(b.data.source, b.data.source_labels, fit);
  b.target_logits = source_logits(b.model, b.data.target);
  return b;
}

}  // namespace osda
