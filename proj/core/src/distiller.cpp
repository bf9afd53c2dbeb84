#include "osda/distiller.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "osda/binio.hpp"
#include "osda/errors.hpp"
#include "osda/rng.hpp"

namespace osda {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

void check_shape(const StudentHead& head) {
  if (head.d <= 0 || head.c <= 0 || (head.kind == HeadKind::Mlp1 && head.h <= 0)) {
    throw Error(Errc::BadShape, "head dims must be positive (d=" + std::to_string(head.d) + ", c=" +
                                    std::to_string(head.c) + ", h=" + std::to_string(head.h) + ")");
  }
  const auto expected = StudentHead::param_count(head.kind, head.d, head.c, head.h);
  if (static_cast<std::size_t>(head.params.size()) != expected) {
    throw Error(Errc::BadShape, "head has " + std::to_string(head.params.size()) + " parameters, expected " +
                                    std::to_string(expected));
  }
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double top = m.row(i).maxCoeff();
    out.row(i) = (m.row(i).array() - top).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

Vector log_sum_exp_rows(const Matrix& m) {
  Vector out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double top = m.row(i).maxCoeff();
    out[i] = top + std::log((m.row(i).array() - top).exp().sum());
  }
  return out;
}

// dL/doutputs for the per-sample mean loss.
Matrix loss_grad(DistillLoss loss, const Matrix& outputs, const Matrix& targets) {
  const double inv_n = 1.0 / static_cast<double>(outputs.rows());
  switch (loss) {
    case DistillLoss::L2:
      return 2.0 * inv_n * (outputs - targets);
    case DistillLoss::L1:
      return inv_n * (outputs - targets).array().sign().matrix();
    case DistillLoss::Ce:
      return inv_n * (softmax_rows(outputs) - softmax_rows(targets));
  }
  return {};
}

struct Forward {
  Matrix pre;     // mlp1 hidden pre-activation
  Matrix hidden;  // mlp1 hidden activation
  Matrix out;
};

Forward forward(const StudentHead& head, const Matrix& x) {
  Forward f;
  const double* p = head.params.data();
  if (head.kind == HeadKind::Linear) {
    ConstMap w(p, head.c, head.d);
    Eigen::Map<const Vector> b(p + head.c * head.d, head.c);
    f.out = x * w.transpose();
    f.out.rowwise() += b.transpose();
    return f;
  }
  ConstMap w1(p, head.h, head.d);
  p += head.h * head.d;
  Eigen::Map<const Vector> b1(p, head.h);
  p += head.h;
  ConstMap w2(p, head.c, head.h);
  p += head.c * head.h;
  Eigen::Map<const Vector> b2(p, head.c);

  f.pre = x * w1.transpose();
  f.pre.rowwise() += b1.transpose();
  f.hidden = f.pre.cwiseMax(0.0);
  f.out = f.hidden * w2.transpose();
  f.out.rowwise() += b2.transpose();
  return f;
}

void backward(const StudentHead& head, const Matrix& x, const Forward& f, const Matrix& g_out, Vector& grad) {
  grad.resize(head.params.size());
  double* gp = grad.data();
  if (head.kind == HeadKind::Linear) {
    MutMap(gp, head.c, head.d) = g_out.transpose() * x;
    Eigen::Map<Vector>(gp + head.c * head.d, head.c) = g_out.colwise().sum().transpose();
    return;
  }
  const double* p = head.params.data() + head.h * head.d + head.h;
  ConstMap w2(p, head.c, head.h);

  Matrix g_hidden = g_out * w2;
  Matrix g_pre = g_hidden.cwiseProduct((f.pre.array() > 0.0).cast<double>().matrix());

  MutMap(gp, head.h, head.d) = g_pre.transpose() * x;
  gp += head.h * head.d;
  Eigen::Map<Vector>(gp, head.h) = g_pre.colwise().sum().transpose();
  gp += head.h;
  MutMap(gp, head.c, head.h) = g_out.transpose() * f.hidden;
  gp += head.c * head.h;
  Eigen::Map<Vector>(gp, head.c) = g_out.colwise().sum().transpose();
}

}  // namespace

std::size_t StudentHead::param_count(HeadKind kind, int d, int c, int h) {
  const auto dd = static_cast<std::size_t>(d), cc = static_cast<std::size_t>(c), hh = static_cast<std::size_t>(h);
  return kind == HeadKind::Linear ? cc * dd + cc : hh * dd + hh + cc * hh + cc;
}

StudentHead init_head(HeadKind kind, int d, int c, int h, std::uint64_t seed) {
  StudentHead head{kind, d, c, kind == HeadKind::Linear ? 0 : h, {}};
  if (d <= 0 || c <= 0 || (kind == HeadKind::Mlp1 && h <= 0)) {
    throw Error(Errc::BadShape, "head dims must be positive");
  }
  head.params = Vector::Zero(static_cast<Eigen::Index>(StudentHead::param_count(kind, d, c, head.h)));
  Rng rng(seed);
  auto fill = [&](double* p, Eigen::Index count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < count; ++i) p[i] = rng.uniform(-bound, bound);
  };
  double* p = head.params.data();
  if (kind == HeadKind::Linear) {
    fill(p, static_cast<Eigen::Index>(c) * d, d);
  } else {
    fill(p, static_cast<Eigen::Index>(h) * d, d);
    fill(p + h * d + h, static_cast<Eigen::Index>(c) * h, h);
  }
  return head;
}

std::string_view to_string(DistillLoss loss) noexcept {
  switch (loss) {
    case DistillLoss::L2: return "l2";
    case DistillLoss::L1: return "l1";
    case DistillLoss::Ce: return "ce";
  }
  return "?";
}

std::optional<DistillLoss> parse_distill_loss(std::string_view name) noexcept {
  if (name == "l2") return DistillLoss::L2;
  if (name == "l1") return DistillLoss::L1;
  if (name == "ce") return DistillLoss::Ce;
  return std::nullopt;
}

std::optional<HeadKind> parse_head_kind(std::string_view name) noexcept {
  if (name == "linear") return HeadKind::Linear;
  if (name == "mlp1") return HeadKind::Mlp1;
  return std::nullopt;
}

double distill_loss(DistillLoss loss, const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw Error(Errc::ShapeMismatch, "outputs and targets differ in shape");
  }
  if (outputs.rows() == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(outputs.rows());
  switch (loss) {
    case DistillLoss::L2:
      return inv_n * (outputs - targets).squaredNorm();
    case DistillLoss::L1:
      return inv_n * (outputs - targets).cwiseAbs().sum();
    case DistillLoss::Ce: {
      const Matrix p = softmax_rows(targets);
      const Vector lse = log_sum_exp_rows(outputs);
      double total = 0.0;
      for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        total += lse[i] - p.row(i).dot(outputs.row(i));
      }
      return inv_n * total;
    }
  }
  return 0.0;
}

double head_loss(const StudentHead& head, const Matrix& x, const Matrix& targets, DistillLoss loss, Vector* grad) {
  check_shape(head);
  if (x.cols() != head.d || targets.cols() != head.c || x.rows() != targets.rows()) {
    throw Error(Errc::ShapeMismatch, "inputs do not match the head shape");
  }
  const Forward f = forward(head, x);
  const double value = distill_loss(loss, f.out, targets);
  if (grad) backward(head, x, f, loss_grad(loss, f.out, targets), *grad);
  return value;
}

TrainResult train_distill(StudentHead head, const EmbeddingSet& e, const PseudoLabelSet& targets,
                          const TrainConfig& cfg) {
  check_shape(head);
  if (e.d() != head.d || targets.c() != head.c || e.n() != targets.n()) {
    throw Error(Errc::ShapeMismatch, "embeddings " + std::to_string(e.n()) + "x" + std::to_string(e.d()) +
                                         ", targets " + std::to_string(targets.n()) + "x" +
                                         std::to_string(targets.c()) + ", head d=" + std::to_string(head.d) +
                                         " c=" + std::to_string(head.c));
  }
  if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.batch_size < 0) {
    throw Error(Errc::BadValue, "learning rate must be > 0, epochs and batch size >= 0");
  }

  TrainResult result{std::move(head), {}};
  StudentHead& h = result.head;
  const Eigen::Index n = e.n();
  const Eigen::Index batch = (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(cfg.seed);
  Vector velocity = Vector::Zero(h.params.size());
  Vector grad;
  Matrix xb, tb;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < n) {
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    double epoch_loss = 0.0;
    Eigen::Index batches = 0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      double loss;
      if (len == n) {
        loss = head_loss(h, e.data, targets.logits, cfg.loss, &grad);
      } else {
        xb.resize(len, e.d());
        tb.resize(len, targets.c());
        for (Eigen::Index r = 0; r < len; ++r) {
          xb.row(r) = e.data.row(order[start + r]);
          tb.row(r) = targets.logits.row(order[start + r]);
        }
        loss = head_loss(h, xb, tb, cfg.loss, &grad);
      }
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw Error(Errc::NonFiniteLoss, "training diverged at epoch " + std::to_string(epoch));
      }
      velocity = cfg.momentum * velocity - cfg.learning_rate * grad;
      h.params += velocity;
      epoch_loss += loss;
      ++batches;
    }
    result.history.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

Matrix predict(const StudentHead& head, const Matrix& x) {
  check_shape(head);
  if (x.cols() != head.d) {
    throw Error(Errc::ShapeMismatch, "input dim " + std::to_string(x.cols()) + " vs head d=" + std::to_string(head.d));
  }
  return forward(head, x).out;
}

Matrix predict(const StudentHead& head, const EmbeddingSet& e) { return predict(head, e.data); }

void write_head(const std::filesystem::path& path, const StudentHead& head) {
  check_shape(head);
  binio::Writer w;
  w.magic("HED1");
  w.u32(static_cast<std::uint32_t>(head.kind));
  w.u32(static_cast<std::uint32_t>(head.d));
  w.u32(static_cast<std::uint32_t>(head.c));
  w.u32(static_cast<std::uint32_t>(head.h));
  w.u32(static_cast<std::uint32_t>(head.params.size()));
  for (Eigen::Index i = 0; i < head.params.size(); ++i) w.f32(head.params[i]);
  w.save(path);
}

StudentHead read_head(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("HED1");
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw Error(Errc::BadShape, path.string() + ": unknown head kind " + std::to_string(kind));
  StudentHead head;
  head.kind = static_cast<HeadKind>(kind);
  head.d = static_cast<int>(r.u32());
  head.c = static_cast<int>(r.u32());
  head.h = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  r.require(std::size_t{count} * 4);
  head.params.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const float v = r.f32();
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteValue, path.string() + ": parameter " + std::to_string(i));
    head.params[i] = v;
  }
  r.finish();
  check_shape(head);
  return head;
}

}  // namespace osda
