#include "osda/protolab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "osda/binio.hpp"
#include "osda/errors.hpp"

namespace osda {

namespace {

void check_aligned(const EmbeddingSet& e, const SourceLogits& l) {
  if (e.n() != l.n()) {
    throw Error(Errc::CountMismatch,
                "embeddings n=" + std::to_string(e.n()) + ", logits n=" + std::to_string(l.n()));
  }
}

// Neumaier-compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

std::string_view to_string(WeightScheme s) noexcept {
  switch (s) {
    case WeightScheme::Uniform: return "uniform";
    case WeightScheme::Msp: return "msp";
    case WeightScheme::Mls: return "mls";
    case WeightScheme::Csas: return "csas";
  }
  return "?";
}

std::optional<WeightScheme> parse_weight_scheme(std::string_view name) noexcept {
  if (name == "uniform") return WeightScheme::Uniform;
  if (name == "msp") return WeightScheme::Msp;
  if (name == "mls") return WeightScheme::Mls;
  if (name == "csas") return WeightScheme::Csas;
  return std::nullopt;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& m) {
  std::vector<std::uint32_t> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j)
      if (m(i, j) > m(i, best)) best = j;
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

double csas(const SourceLogits& l, std::span<const std::size_t> members) {
  if (members.empty()) throw Error(Errc::EmptyCluster, "csas of an empty member set");
  Vector sum = Vector::Zero(l.c());
  for (auto i : members) sum += l.data.row(static_cast<Eigen::Index>(i)).transpose();
  return (sum / static_cast<double>(members.size())).maxCoeff();
}

std::vector<double> normalize_csas(std::span<const double> phi, std::span<const std::size_t> sizes) {
  if (phi.size() != sizes.size()) throw Error(Errc::ShapeMismatch, "csas and size lists differ in length");
  if (phi.empty()) return {};
  std::vector<double> ratio(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (sizes[k] == 0) throw Error(Errc::EmptyCluster, "cluster " + std::to_string(k) + " has no members");
    ratio[k] = phi[k] / static_cast<double>(sizes[k]);
  }
  const double min_ratio = *std::min_element(ratio.begin(), ratio.end());
  std::vector<double> out(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) {
    if (ratio[k] == min_ratio) {
      out[k] = 0.0;
    } else {
      out[k] = std::max(0.0, phi[k] - static_cast<double>(sizes[k]) * min_ratio);
    }
  }
  return out;
}

ClusterAttributes cluster_attributes(const SourceLogits& l, const EmbeddingSet& e, const Partition& p) {
  check_aligned(e, l);
  if (p.assign.size() != static_cast<std::size_t>(l.n())) {
    throw Error(Errc::CountMismatch, "partition covers " + std::to_string(p.assign.size()) + " samples, logits " +
                                         std::to_string(l.n()));
  }
  const auto k = static_cast<std::size_t>(p.k);
  const Eigen::Index c = l.c();
  const auto pred = argmax_rows(l.data);

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < p.assign.size(); ++i) members[p.assign[i]].push_back(i);

  ClusterAttributes attrs(k);
  std::vector<double> phi(k);
  std::vector<std::size_t> sizes(k);
  for (std::size_t cl = 0; cl < k; ++cl) {
    auto& a = attrs[cl];
    a.size = members[cl].size();
    a.csas = csas(l, members[cl]);
    a.prior = Vector::Zero(c);
    a.cond_mean = Matrix::Zero(c, e.d());
    a.valid.assign(static_cast<std::size_t>(c), false);
    for (auto i : members[cl]) {
      a.prior[pred[i]] += 1.0;
      a.cond_mean.row(pred[i]) += e.data.row(static_cast<Eigen::Index>(i));
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      if (a.prior[j] > 0.0) {
        a.cond_mean.row(j) /= a.prior[j];
        a.valid[j] = true;
      }
    }
    a.prior /= static_cast<double>(a.size);
    phi[cl] = a.csas;
    sizes[cl] = a.size;
  }
  const auto norm = normalize_csas(phi, sizes);
  for (std::size_t cl = 0; cl < k; ++cl) attrs[cl].csas_norm = norm[cl];
  return attrs;
}

Vector csas_zeta(const SourceLogits& l, const Partition& p) {
  if (p.assign.size() != static_cast<std::size_t>(l.n())) {
    throw Error(Errc::CountMismatch, "partition covers " + std::to_string(p.assign.size()) + " samples, logits " +
                                         std::to_string(l.n()));
  }
  const auto k = static_cast<std::size_t>(p.k);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < p.assign.size(); ++i) members[p.assign[i]].push_back(i);

  std::vector<double> phi(k);
  std::vector<std::size_t> sizes(k);
  for (std::size_t cl = 0; cl < k; ++cl) {
    phi[cl] = csas(l, members[cl]);
    sizes[cl] = members[cl].size();
  }
  const auto norm = normalize_csas(phi, sizes);

  Vector zeta(l.n());
  for (std::size_t i = 0; i < p.assign.size(); ++i) {
    const auto cl = p.assign[i];
    zeta[static_cast<Eigen::Index>(i)] = norm[cl] / static_cast<double>(sizes[cl]);
  }
  return zeta;
}

WeightVector zeta_weights(WeightScheme scheme, const SourceLogits& l) {
  WeightVector w{scheme, Vector(l.n())};
  switch (scheme) {
    case WeightScheme::Uniform:
      w.zeta.setOnes();
      break;
    case WeightScheme::Msp:
      for (Eigen::Index i = 0; i < l.n(); ++i) {
        const auto row = l.data.row(i);
        const double top = row.maxCoeff();
        w.zeta[i] = 1.0 / (row.array() - top).exp().sum();
      }
      break;
    case WeightScheme::Mls: {
      const Vector mls = l.data.rowwise().maxCoeff();
      w.zeta = mls.array() - mls.minCoeff();
      break;
    }
    case WeightScheme::Csas:
      throw Error(Errc::MissingPartitions, "csas weighting needs Monte-Carlo partitions");
  }
  return w;
}

WeightVector zeta_weights(WeightScheme scheme, const SourceLogits& l, const McPartitions& mc) {
  if (scheme != WeightScheme::Csas) return zeta_weights(scheme, l);
  if (mc.runs.empty()) throw Error(Errc::MissingPartitions, "no Monte-Carlo runs supplied");

  std::vector<CompensatedSum> acc(static_cast<std::size_t>(l.n()));
  for (const auto& run : mc.runs) {
    const Vector z = csas_zeta(l, run);
    for (Eigen::Index i = 0; i < z.size(); ++i) acc[i].add(z[i]);
  }
  WeightVector w{scheme, Vector(l.n())};
  const auto runs = static_cast<double>(mc.runs.size());
  for (Eigen::Index i = 0; i < l.n(); ++i) w.zeta[i] = acc[i].value() / runs;
  return w;
}

namespace {

PrototypeSet finish_prototypes(Matrix sums, const Vector& mass, double tau) {
  PrototypeSet ps;
  ps.tau = tau;
  const Eigen::Index c = sums.rows();
  ps.defined.assign(static_cast<std::size_t>(c), false);
  ps.protos = Matrix::Zero(c, sums.cols());
  ps.protos_norm = Matrix::Zero(c, sums.cols());
  bool any = false;
  for (Eigen::Index j = 0; j < c; ++j) {
    if (!(mass[j] > 0.0)) continue;
    ps.protos.row(j) = sums.row(j) / mass[j];
    const double norm = ps.protos.row(j).norm();
    if (!(norm > 0.0)) continue;
    ps.protos_norm.row(j) = ps.protos.row(j) / norm;
    ps.defined[j] = true;
    any = true;
  }
  if (!any) throw Error(Errc::AllClassesUndefined, "no class has positive weight mass");
  return ps;
}

}  // namespace

PrototypeSet prototypes(const EmbeddingSet& e, const SourceLogits& l, const WeightVector& w, double tau) {
  check_aligned(e, l);
  if (w.zeta.size() != l.n()) throw Error(Errc::CountMismatch, "weight vector length differs from sample count");
  if (!(tau > 0.0)) throw Error(Errc::BadValue, "tau must be positive");
  const auto pred = argmax_rows(l.data);
  Matrix sums = Matrix::Zero(l.c(), e.d());
  Vector mass = Vector::Zero(l.c());
  for (Eigen::Index i = 0; i < e.n(); ++i) {
    const double z = w.zeta[i];
    if (z < 0.0 || !std::isfinite(z)) throw Error(Errc::BadValue, "weights must be finite and non-negative");
    if (z == 0.0) continue;
    sums.row(pred[i]) += z * e.data.row(i);
    mass[pred[i]] += z;
  }
  return finish_prototypes(std::move(sums), mass, tau);
}

PrototypeSet prototypes_from_clusters(const ClusterAttributes& attrs, double tau) {
  if (attrs.empty()) throw Error(Errc::EmptyCluster, "no clusters");
  if (!(tau > 0.0)) throw Error(Errc::BadValue, "tau must be positive");
  const Eigen::Index c = attrs.front().prior.size();
  const Eigen::Index d = attrs.front().cond_mean.cols();
  Matrix sums = Matrix::Zero(c, d);
  Vector mass = Vector::Zero(c);
  for (const auto& a : attrs) {
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!a.valid[j]) continue;
      const double wkj = a.prior[j] * a.csas_norm;
      sums.row(j) += wkj * a.cond_mean.row(j);
      mass[j] += wkj;
    }
  }
  return finish_prototypes(std::move(sums), mass, tau);
}

PseudoLabelSet make_pseudo_label_set(Matrix logits) {
  PseudoLabelSet ps;
  ps.hard = argmax_rows(logits);
  ps.conf = logits.rowwise().maxCoeff();
  ps.logits = std::move(logits);
  return ps;
}

PseudoLabelSet pseudo_logits(const EmbeddingSet& e, const PrototypeSet& ps) {
  for (std::size_t j = 0; j < ps.defined.size(); ++j) {
    if (!ps.defined[j]) throw Error(Errc::UndefinedPrototype, "prototype of class " + std::to_string(j) + " is undefined");
  }
  if (ps.protos_norm.cols() != e.d()) throw Error(Errc::DimMismatch, "prototype and embedding dims differ");
  Matrix logits(e.n(), ps.c());
  for (Eigen::Index i = 0; i < e.n(); ++i) {
    const double norm = e.data.row(i).norm();
    if (!(norm > 0.0)) throw Error(Errc::ZeroNormEmbedding, "embedding row " + std::to_string(i) + " has zero norm");
    for (Eigen::Index j = 0; j < ps.c(); ++j) {
      const double cosine = std::clamp(e.data.row(i).dot(ps.protos_norm.row(j)) / norm, -1.0, 1.0);
      logits(i, j) = cosine / ps.tau;
    }
  }
  return make_pseudo_label_set(std::move(logits));
}

void write_pseudo_labels(const std::filesystem::path& path, const PseudoLabelSet& ps) {
  binio::write_matrix(path, "PSL1", ps.logits);
}

PseudoLabelSet read_pseudo_labels(const std::filesystem::path& path) {
  return make_pseudo_label_set(binio::read_matrix(path, "PSL1"));
}

PseudoLabelRun run_pseudolabel(const EmbeddingSet& e, const SourceLogits& l, const ProtoConfig& cfg,
                               const KMeansConfig& kcfg, std::uint64_t seed) {
  check_aligned(e, l);
  PseudoLabelRun run;
  if (cfg.scheme == WeightScheme::Csas) {
    const auto mc = mc_partitions(e, cfg.k, cfg.n_mc, seed, kcfg);
    run.weights = zeta_weights(cfg.scheme, l, mc);
  } else {
    run.weights = zeta_weights(cfg.scheme, l);
  }
  run.prototypes = prototypes(e, l, run.weights, cfg.tau);
  run.labels = pseudo_logits(e, run.prototypes);
  return run;
}

}  // namespace osda
