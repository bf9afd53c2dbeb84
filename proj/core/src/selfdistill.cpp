#include "osda/selfdistill.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osda/errors.hpp"

namespace osda {

namespace {

struct SumErr {
  double sum;
  double err;
};

SumErr two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

Vector softmax(const Vector& u) {
  const double top = u.maxCoeff();
  Vector p = (u.array() - top).exp();
  return p / p.sum();
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

ImageTensor pool_grid_transpose(const Vector& g, int h, int w, int grid) {
  ImageTensor out(h, w);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * h / grid, y1 = (gy + 1) * h / grid;
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * w / grid, x1 = (gx + 1) * w / grid;
      const double inv = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
      for (int ch = 0; ch < 3; ++ch) {
        const double v = g[(gy * grid + gx) * 3 + ch] * inv;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) out.at(y, x, ch) += v;
      }
    }
  }
  return out;
}

// Maps dL/du (u = head * z / temp) back to dL/d(image).
ImageTensor image_grad(const ToyEncoder& enc, const Matrix& head, double temp, const Vector& z, const Vector& du,
                       const ImageTensor& img) {
  const Vector dz = head.transpose() * du / temp;
  const Vector dpre = dz.array() * (1.0 - z.array().square());
  const Vector dv = enc.backbone.transpose() * dpre;
  return pool_grid_transpose(dv, img.h, img.w, enc.grid);
}

struct StyleForward {
  Vector pre;
  Vector hidden;
  StyleMagnitudes m{};
};

StyleForward style_forward(const StyleNet& net, const Vector& z) {
  if (z.size() != net.in_dim) throw Error(Errc::ShapeMismatch, "style net input dim mismatch");
  const double* p = net.params.data();
  Eigen::Map<const Matrix> w1(p, net.hidden, net.in_dim);
  Eigen::Map<const Vector> b1(p + net.hidden * net.in_dim, net.hidden);
  Eigen::Map<const Matrix> w2(p + net.hidden * net.in_dim + net.hidden, kNumColorOps, net.hidden);
  Eigen::Map<const Vector> b2(p + net.hidden * net.in_dim + net.hidden + kNumColorOps * net.hidden, kNumColorOps);
  StyleForward f;
  f.pre = w1 * z + b1;
  f.hidden = f.pre.cwiseMax(0.0);
  const Vector out = w2 * f.hidden + b2;
  for (std::size_t j = 0; j < kNumColorOps; ++j) f.m[j] = sigmoid(out[static_cast<Eigen::Index>(j)]);
  return f;
}

void style_backward(const StyleNet& net, const Vector& z, const StyleForward& f,
                    const std::array<double, kNumColorOps>& dm, Vector& grad) {
  const Eigen::Index h = net.hidden, in = net.in_dim, k = kNumColorOps;
  const double* p = net.params.data();
  Eigen::Map<const Matrix> w2(p + h * in + h, k, h);

  Vector dout(k);
  for (Eigen::Index j = 0; j < k; ++j) dout[j] = dm[j] * f.m[j] * (1.0 - f.m[j]);
  const Vector dhidden = w2.transpose() * dout;
  const Vector dpre = dhidden.array() * (f.pre.array() > 0.0).cast<double>();

  double* g = grad.data();
  Eigen::Map<Matrix>(g, h, in) += dpre * z.transpose();
  Eigen::Map<Vector>(g + h * in, h) += dpre;
  Eigen::Map<Matrix>(g + h * in + h, k, h) += dout * f.hidden.transpose();
  Eigen::Map<Vector>(g + h * in + h + k * h, k) += dout;
}

void check_prob(const Vector& p, const char* what) {
  if (p.size() == 0 || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
    throw Error(Errc::NotNormalized, std::string(what) + " is not a probability vector");
  }
}

}  // namespace

CropSet make_crops(const ImageTensor& x, std::uint64_t seed, const CropConfig& cfg) {
  const int side = std::min(x.h, x.w);
  if (cfg.global_size <= 0 || cfg.local_size <= 0 || side < cfg.global_size || side < cfg.local_size) {
    throw Error(Errc::ImageTooSmall, std::to_string(x.h) + "x" + std::to_string(x.w) + " image, global crop " +
                                         std::to_string(cfg.global_size) + ", local crop " +
                                         std::to_string(cfg.local_size));
  }
  Rng rng(seed);
  auto place = [&](int size) {
    CropRect r;
    r.h = r.w = size;
    r.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.h - size + 1)));
    r.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.w - size + 1)));
    return r;
  };
  CropSet out;
  for (int i = 0; i < cfg.n_global; ++i) out.global.push_back(place(cfg.global_size));
  for (int i = 0; i < cfg.n_local; ++i) out.local.push_back(place(cfg.local_size));
  return out;
}

ImageTensor crop(const ImageTensor& x, const CropRect& r) {
  if (r.y < 0 || r.x < 0 || r.y + r.h > x.h || r.x + r.w > x.w) {
    throw Error(Errc::ImageTooSmall, "crop rectangle outside the image");
  }
  ImageTensor out(r.h, r.w);
  for (int y = 0; y < r.h; ++y)
    for (int c = 0; c < r.w; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(y, c, ch) = x.at(r.y + y, r.x + c, ch);
  return out;
}

ImageTensor default_jitter(const ImageTensor& x, Rng& rng) {
  const bool apply = rng.uniform() < 0.5;
  StyleMagnitudes m = kNeutralMagnitudes;
  for (auto& v : m) v = rng.uniform(0.35, 0.65);
  return apply ? apply_chain(x, m) : x;
}

double cross_entropy(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error(Errc::ShapeMismatch, "distribution sizes differ");
  double h = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p[j] > 0.0) h -= p[j] * std::log(q[j]);
  }
  return h;
}

double dino_loss(std::span<const Vector> teacher_global, std::span<const Vector> student_global,
                 std::span<const Vector> student_local) {
  if (teacher_global.size() != student_global.size()) {
    throw Error(Errc::ShapeMismatch, "teacher and student global view counts differ");
  }
  for (const auto& p : teacher_global) check_prob(p, "teacher view");
  for (const auto& p : student_global) check_prob(p, "student global view");
  for (const auto& p : student_local) check_prob(p, "student local view");

  double loss = 0.0;
  for (std::size_t i = 0; i < teacher_global.size(); ++i) {
    for (std::size_t j = 0; j < student_global.size(); ++j) {
      if (j != i) loss += cross_entropy(teacher_global[i], student_global[j]);
    }
    for (const auto& s : student_local) loss += cross_entropy(teacher_global[i], s);
  }
  return loss;
}

Vector ema_update(const Vector& teacher, const Vector& student, double nu) {
  if (teacher.size() != student.size()) {
    throw Error(Errc::ShapeMismatch, "teacher has " + std::to_string(teacher.size()) + " parameters, student " +
                                         std::to_string(student.size()));
  }
  if (!(nu >= 0.0 && nu <= 1.0)) throw Error(Errc::BadValue, "momentum must lie in [0, 1]");
  // 1 - nu == w + w_err exactly.
  const auto [w, w_err] = two_sum(1.0, -nu);
  Vector out(teacher.size());
  for (Eigen::Index i = 0; i < teacher.size(); ++i) {
    const double t = teacher[i], s = student[i];
    const double p1 = nu * t;
    const double e1 = std::fma(nu, t, -p1);
    const double p2 = w * s;
    const double e2 = std::fma(w, s, -p2);
    const auto [sum, e3] = two_sum(p1, p2);
    out[i] = sum + (e1 + e2 + e3 + w_err * s);
  }
  return out;
}

ToyEncoder make_toy_encoder(const EncoderConfig& cfg) {
  if (cfg.grid <= 0 || cfg.embed_dim <= 0 || cfg.out_dim <= 1 || !(cfg.teacher_temp > 0.0) ||
      !(cfg.student_temp > 0.0)) {
    throw Error(Errc::BadShape, "invalid encoder configuration");
  }
  Rng rng(cfg.seed);
  const int in = cfg.grid * cfg.grid * 3;
  ToyEncoder enc;
  enc.grid = cfg.grid;
  enc.teacher_temp = cfg.teacher_temp;
  enc.student_temp = cfg.student_temp;
  enc.backbone.resize(cfg.embed_dim, in);
  const double bscale = 2.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < enc.backbone.size(); ++i) enc.backbone.data()[i] = bscale * rng.normal();
  enc.student_head.resize(cfg.out_dim, cfg.embed_dim);
  const double hscale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  for (Eigen::Index i = 0; i < enc.student_head.size(); ++i) enc.student_head.data()[i] = hscale * rng.normal();
  enc.teacher_head = enc.student_head;
  return enc;
}

Vector pool_grid(const ImageTensor& x, int grid) {
  if (x.h < grid || x.w < grid) {
    throw Error(Errc::ImageTooSmall, "image smaller than the " + std::to_string(grid) + "x" + std::to_string(grid) +
                                         " pooling grid");
  }
  Vector v = Vector::Zero(grid * grid * 3);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * x.h / grid, y1 = (gy + 1) * x.h / grid;
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * x.w / grid, x1 = (gx + 1) * x.w / grid;
      const double inv = 1.0 / static_cast<double>((y1 - y0) * (x1 - x0));
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int c = x0; c < x1; ++c) s += x.at(y, c, ch);
        v[(gy * grid + gx) * 3 + ch] = s * inv;
      }
    }
  }
  return v;
}

Vector encode(const ToyEncoder& enc, const ImageTensor& x) {
  return (enc.backbone * pool_grid(x, enc.grid)).array().tanh();
}

Vector teacher_probs(const ToyEncoder& enc, const ImageTensor& x) {
  return softmax(enc.teacher_head * encode(enc, x) / enc.teacher_temp);
}

Vector student_probs(const ToyEncoder& enc, const ImageTensor& x) {
  return softmax(enc.student_head * encode(enc, x) / enc.student_temp);
}

StyleNet init_style_net(int in_dim, int hidden, std::uint64_t seed) {
  if (in_dim <= 0 || hidden <= 0) throw Error(Errc::BadShape, "style net dims must be positive");
  StyleNet net{in_dim, hidden, Vector::Zero(hidden * in_dim + hidden + kNumColorOps * hidden + kNumColorOps)};
  Rng rng(seed);
  double* p = net.params.data();
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (int i = 0; i < hidden * in_dim; ++i) p[i] = rng.uniform(-b1, b1);
  p += hidden * in_dim + hidden;
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int i = 0; i < static_cast<int>(kNumColorOps) * hidden; ++i) p[i] = rng.uniform(-b2, b2);
  return net;
}

StyleMagnitudes style_magnitudes(const StyleNet& net, const Vector& embedding) {
  return style_forward(net, embedding).m;
}

Episode make_episode(const ImageTensor& x, const ToyEncoder& enc, std::uint64_t seed, const CropConfig& crops) {
  if (crops.n_global != 2) throw Error(Errc::BadShape, "the self-distillation layout uses exactly 2 global views");
  Rng rng(seed);
  const CropSet rects = make_crops(x, rng.next_u64(), crops);
  Episode ep;
  ep.global1 = crop(default_jitter(x, rng), rects.global[0]);
  ep.global2_base = crop(x, rects.global[1]);
  for (const auto& r : rects.local) ep.locals.push_back(crop(default_jitter(x, rng), r));
  ep.teacher_embedding = encode(enc, x);
  return ep;
}

double style_objective(const StyleNet& net, const ToyEncoder& enc, std::span<const Episode> batch, Vector* grad) {
  if (batch.empty()) return 0.0;
  if (grad) *grad = Vector::Zero(net.params.size());
  const Matrix& ht = enc.teacher_head;
  const Matrix& hs = enc.student_head;
  const double tt = enc.teacher_temp, ts = enc.student_temp;

  double total = 0.0;
  for (const auto& ep : batch) {
    const StyleForward sf = style_forward(net, ep.teacher_embedding);
    const ImageTensor g2 = apply_chain(ep.global2_base, sf.m);

    const Vector z1 = encode(enc, ep.global1);
    const Vector z2 = encode(enc, g2);
    const Vector t1 = softmax(ht * z1 / tt);
    const Vector t2 = softmax(ht * z2 / tt);
    const Vector s1 = softmax(hs * z1 / ts);
    const Vector s2 = softmax(hs * z2 / ts);
    std::vector<Vector> locals;
    locals.reserve(ep.locals.size());
    for (const auto& img : ep.locals) locals.push_back(softmax(hs * encode(enc, img) / ts));

    const std::array<Vector, 2> teachers{t1, t2};
    const std::array<Vector, 2> students{s1, s2};
    total += dino_loss(teachers, students, locals);
    if (!grad) continue;

    // g2 feeds the student through H(t1, s2) and the teacher through t2.
    const Vector du_student = s2 - t1;
    Vector log_sum = s1.array().log();
    for (const auto& s : locals) log_sum.array() += s.array().log();
    const Vector dt2 = -log_sum;
    const Vector du_teacher = t2.array() * (dt2.array() - dt2.dot(t2));

    ImageTensor dimg = image_grad(enc, hs, ts, z2, du_student, g2);
    const ImageTensor dimg_t = image_grad(enc, ht, tt, z2, du_teacher, g2);
    for (std::size_t i = 0; i < dimg.size(); ++i) dimg.data[i] += dimg_t.data[i];

    const ChainGrad cg = chain_grad(ep.global2_base, sf.m, dimg);
    style_backward(net, ep.teacher_embedding, sf, cg.dm, *grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (grad) *grad *= inv;
  return total * inv;
}

StyleNet adversarial_step(const StyleNet& net, const ToyEncoder& enc, std::span<const Episode> batch, double lr_adv) {
  Vector grad;
  style_objective(net, enc, batch, &grad);
  if (!grad.allFinite()) throw Error(Errc::NonFiniteGradient, "style gradient is not finite");
  StyleNet out = net;
  out.params += lr_adv * grad;
  return out;
}

double student_step(ToyEncoder& enc, const StyleNet& net, std::span<const Episode> batch, double lr) {
  if (batch.empty()) return 0.0;
  const Matrix& ht = enc.teacher_head;
  const Matrix& hs = enc.student_head;
  const double tt = enc.teacher_temp, ts = enc.student_temp;
  Matrix grad = Matrix::Zero(hs.rows(), hs.cols());
  double total = 0.0;

  for (const auto& ep : batch) {
    const ImageTensor g2 = apply_chain(ep.global2_base, style_magnitudes(net, ep.teacher_embedding));
    const Vector z1 = encode(enc, ep.global1);
    const Vector z2 = encode(enc, g2);
    const Vector t1 = softmax(ht * z1 / tt);
    const Vector t2 = softmax(ht * z2 / tt);
    const Vector s1 = softmax(hs * z1 / ts);
    const Vector s2 = softmax(hs * z2 / ts);
    std::vector<Vector> zl, sl;
    for (const auto& img : ep.locals) {
      zl.push_back(encode(enc, img));
      sl.push_back(softmax(hs * zl.back() / ts));
    }
    const std::array<Vector, 2> teachers{t1, t2};
    const std::array<Vector, 2> students{s1, s2};
    total += dino_loss(teachers, students, sl);

    grad += (s1 - t2) * z1.transpose() / ts;
    grad += (s2 - t1) * z2.transpose() / ts;
    for (std::size_t k = 0; k < sl.size(); ++k) grad += (2.0 * sl[k] - t1 - t2) * zl[k].transpose() / ts;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (!grad.allFinite()) throw Error(Errc::NonFiniteGradient, "student gradient is not finite");
  enc.student_head -= lr * inv * grad;
  return total * inv;
}

void ema_teacher(ToyEncoder& enc, double nu) {
  const Eigen::Index n = enc.teacher_head.size();
  const Vector t = Eigen::Map<const Vector>(enc.teacher_head.data(), n);
  const Vector s = Eigen::Map<const Vector>(enc.student_head.data(), n);
  Eigen::Map<Vector>(enc.teacher_head.data(), n) = ema_update(t, s, nu);
}

AdvStyleResult train_advstyle(std::span<const ImageTensor> images, const AdvStyleConfig& cfg) {
  if (images.empty()) throw Error(Errc::EmptyMatrix, "no images to train on");
  EncoderConfig ecfg = cfg.encoder;
  ecfg.seed = derive_seed(cfg.seed, "advstyle.encoder");
  AdvStyleResult res;
  res.encoder = make_toy_encoder(ecfg);
  res.net = init_style_net(res.encoder.embed_dim(), cfg.hidden, derive_seed(cfg.seed, "advstyle.style"));

  Rng episode_seeds(derive_seed(cfg.seed, "advstyle.episodes"));
  std::vector<Episode> batch;
  for (int step = 0; step < cfg.steps; ++step) {
    batch.clear();
    for (const auto& img : images) batch.push_back(make_episode(img, res.encoder, episode_seeds.next_u64(), cfg.crops));
    res.net = adversarial_step(res.net, res.encoder, batch, cfg.lr_adv);
    res.history.push_back(student_step(res.encoder, res.net, batch, cfg.lr_student));
    ema_teacher(res.encoder, cfg.momentum);
  }
  for (const auto& img : images) {
    res.magnitudes.push_back(style_magnitudes(res.net, encode(res.encoder, img)));
    res.augmented.push_back(apply_chain(img, res.magnitudes.back()));
  }
  return res;
}

}  // namespace osda
