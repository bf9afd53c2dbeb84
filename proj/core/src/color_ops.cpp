#include "osda/color_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "osda/errors.hpp"

namespace osda {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr std::array<double, 3> kLuma = {0.299, 0.587, 0.114};

double factor(double m) { return std::exp2(2.0 * m - 1.0); }
double dfactor(double m) { return 2.0 * kLn2 * factor(m); }

void check_magnitude(double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw Error(Errc::MagnitudeOutOfRange, "magnitude " + std::to_string(m));
}

const Eigen::Matrix3d& rgb_to_yiq() {
  static const Eigen::Matrix3d t = (Eigen::Matrix3d() << 0.299, 0.587, 0.114,  //
                                    0.596, -0.274, -0.322,                       //
                                    0.211, -0.523, 0.312)
                                       .finished();
  return t;
}

const Eigen::Matrix3d& yiq_to_rgb() {
  static const Eigen::Matrix3d inv = rgb_to_yiq().inverse();
  return inv;
}

double hue_angle(double m) { return (2.0 * m - 1.0) * std::numbers::pi / 6.0; }

Eigen::Matrix3d hue_matrix(double theta) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(1, 1) = std::cos(theta);
  r(1, 2) = -std::sin(theta);
  r(2, 1) = std::sin(theta);
  r(2, 2) = std::cos(theta);
  return yiq_to_rgb() * r * rgb_to_yiq();
}

Eigen::Matrix3d hue_matrix_dm(double theta) {
  Eigen::Matrix3d dr = Eigen::Matrix3d::Zero();
  dr(1, 1) = -std::sin(theta);
  dr(1, 2) = -std::cos(theta);
  dr(2, 1) = std::cos(theta);
  dr(2, 2) = -std::sin(theta);
  return yiq_to_rgb() * dr * rgb_to_yiq() * (std::numbers::pi / 3.0);
}

// 3x3 box average over the in-bounds neighbourhood, per channel.
ImageTensor box_blur(const ImageTensor& x) {
  ImageTensor out(x.h, x.w);
  for (int y = 0; y < x.h; ++y) {
    for (int c = 0; c < x.w; ++c) {
      const int y0 = std::max(0, y - 1), y1 = std::min(x.h - 1, y + 1);
      const int c0 = std::max(0, c - 1), c1 = std::min(x.w - 1, c + 1);
      const double inv = 1.0 / static_cast<double>((y1 - y0 + 1) * (c1 - c0 + 1));
      for (int ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (int yy = y0; yy <= y1; ++yy)
          for (int cc = c0; cc <= c1; ++cc) s += x.at(yy, cc, ch);
        out.at(y, c, ch) = s * inv;
      }
    }
  }
  return out;
}

ImageTensor box_blur_transpose(const ImageTensor& g) {
  ImageTensor out(g.h, g.w);
  for (int y = 0; y < g.h; ++y) {
    for (int c = 0; c < g.w; ++c) {
      const int y0 = std::max(0, y - 1), y1 = std::min(g.h - 1, y + 1);
      const int c0 = std::max(0, c - 1), c1 = std::min(g.w - 1, c + 1);
      const double inv = 1.0 / static_cast<double>((y1 - y0 + 1) * (c1 - c0 + 1));
      for (int yy = y0; yy <= y1; ++yy)
        for (int cc = c0; cc <= c1; ++cc)
          for (int ch = 0; ch < 3; ++ch) out.at(yy, cc, ch) += g.at(y, c, ch) * inv;
    }
  }
  return out;
}

// Two-pass mean: the second pass folds back the rounding error of the first,
// so a constant image has its own value as mean and zero deviations.
double image_mean(const ImageTensor& x) {
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x.data) s += v;
  const double mean = s / n;
  double r = 0.0;
  for (double v : x.data) r += v - mean;
  return mean + r / n;
}

// Unclamped op output.
ImageTensor forward_raw(ColorOp op, const ImageTensor& x, double m) {
  const double s = factor(m);
  ImageTensor out(x.h, x.w);
  switch (op) {
    case ColorOp::Gamma:
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > 0.0 ? std::pow(x.data[i], s) : 0.0;
      break;
    case ColorOp::Hue: {
      const Eigen::Matrix3d mat = hue_matrix(hue_angle(m));
      for (std::size_t p = 0; p < x.size(); p += 3) {
        const Eigen::Vector3d rgb(x.data[p], x.data[p + 1], x.data[p + 2]);
        const Eigen::Vector3d o = mat * rgb;
        for (int ch = 0; ch < 3; ++ch) out.data[p + ch] = o[ch];
      }
      break;
    }
    case ColorOp::Saturation:
      for (std::size_t p = 0; p < x.size(); p += 3) {
        const double luma = kLuma[0] * x.data[p] + kLuma[1] * x.data[p + 1] + kLuma[2] * x.data[p + 2];
        for (int ch = 0; ch < 3; ++ch) out.data[p + ch] = luma + s * (x.data[p + ch] - luma);
      }
      break;
    case ColorOp::Sharpness: {
      const ImageTensor blur = box_blur(x);
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = blur.data[i] + s * (x.data[i] - blur.data[i]);
      break;
    }
    case ColorOp::Brightness:
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = s * x.data[i];
      break;
    case ColorOp::Contrast: {
      const double mean = image_mean(x);
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = mean + s * (x.data[i] - mean);
      break;
    }
  }
  return out;
}

ImageTensor clamp01(ImageTensor x) {
  for (auto& v : x.data) v = std::clamp(v, 0.0, 1.0);
  return x;
}

// Gradient of the unclamped op given dL/d(unclamped output).
OpGrad raw_grad(ColorOp op, const ImageTensor& x, double m, const ImageTensor& g) {
  const double s = factor(m);
  const double ds = dfactor(m);
  OpGrad out{0.0, ImageTensor(x.h, x.w)};
  switch (op) {
    case ColorOp::Gamma:
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x.data[i];
        if (v <= 0.0) continue;
        const double y = std::pow(v, s);
        out.dm += g.data[i] * y * std::log(v) * ds;
        out.dx.data[i] = g.data[i] * s * std::pow(v, s - 1.0);
      }
      break;
    case ColorOp::Hue: {
      const double theta = hue_angle(m);
      const Eigen::Matrix3d mat = hue_matrix(theta);
      const Eigen::Matrix3d dmat = hue_matrix_dm(theta);
      for (std::size_t p = 0; p < x.size(); p += 3) {
        const Eigen::Vector3d rgb(x.data[p], x.data[p + 1], x.data[p + 2]);
        const Eigen::Vector3d gp(g.data[p], g.data[p + 1], g.data[p + 2]);
        out.dm += gp.dot(dmat * rgb);
        const Eigen::Vector3d gx = mat.transpose() * gp;
        for (int ch = 0; ch < 3; ++ch) out.dx.data[p + ch] = gx[ch];
      }
      break;
    }
    case ColorOp::Saturation:
      for (std::size_t p = 0; p < x.size(); p += 3) {
        const double luma = kLuma[0] * x.data[p] + kLuma[1] * x.data[p + 1] + kLuma[2] * x.data[p + 2];
        const double gsum = g.data[p] + g.data[p + 1] + g.data[p + 2];
        for (int ch = 0; ch < 3; ++ch) {
          out.dm += g.data[p + ch] * (x.data[p + ch] - luma) * ds;
          out.dx.data[p + ch] = s * g.data[p + ch] + (1.0 - s) * kLuma[ch] * gsum;
        }
      }
      break;
    case ColorOp::Sharpness: {
      const ImageTensor blur = box_blur(x);
      const ImageTensor gt = box_blur_transpose(g);
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.dm += g.data[i] * (x.data[i] - blur.data[i]) * ds;
        out.dx.data[i] = s * g.data[i] + (1.0 - s) * gt.data[i];
      }
      break;
    }
    case ColorOp::Brightness:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.dm += g.data[i] * x.data[i] * ds;
        out.dx.data[i] = s * g.data[i];
      }
      break;
    case ColorOp::Contrast: {
      const double mean = image_mean(x);
      double gsum = 0.0;
      for (double v : g.data) gsum += v;
      const double spread = (1.0 - s) * gsum / static_cast<double>(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        out.dm += g.data[i] * (x.data[i] - mean) * ds;
        out.dx.data[i] = s * g.data[i] + spread;
      }
      break;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(ColorOp op) noexcept {
  switch (op) {
    case ColorOp::Gamma: return "gamma";
    case ColorOp::Hue: return "hue";
    case ColorOp::Saturation: return "saturation";
    case ColorOp::Sharpness: return "sharpness";
    case ColorOp::Brightness: return "brightness";
    case ColorOp::Contrast: return "contrast";
  }
  return "?";
}

ImageTensor apply_op(ColorOp op, const ImageTensor& x, double m) {
  check_magnitude(m);
  return clamp01(forward_raw(op, x, m));
}

ImageTensor apply_chain(const ImageTensor& x, const StyleMagnitudes& m) {
  ImageTensor cur = x;
  for (std::size_t j = 0; j < kNumColorOps; ++j) cur = apply_op(kChainOrder[j], cur, m[j]);
  return cur;
}

OpGrad op_grad(ColorOp op, const ImageTensor& x, double m, const ImageTensor& grad_out) {
  check_magnitude(m);
  if (!grad_out.same_shape(x)) throw Error(Errc::ShapeMismatch, "gradient and image shapes differ");
  const ImageTensor raw = forward_raw(op, x, m);
  ImageTensor masked = grad_out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw.data[i] > 0.0 && raw.data[i] < 1.0)) masked.data[i] = 0.0;
  }
  return raw_grad(op, x, m, masked);
}

std::vector<ImageTensor> chain_preclamp_trace(const ImageTensor& x, const StyleMagnitudes& m) {
  std::vector<ImageTensor> trace;
  ImageTensor cur = x;
  for (std::size_t j = 0; j < kNumColorOps; ++j) {
    check_magnitude(m[j]);
    trace.push_back(forward_raw(kChainOrder[j], cur, m[j]));
    cur = clamp01(trace.back());
  }
  return trace;
}

ChainGrad chain_grad(const ImageTensor& x, const StyleMagnitudes& m, const ImageTensor& grad_out) {
  if (!grad_out.same_shape(x)) throw Error(Errc::ShapeMismatch, "gradient and image shapes differ");
  std::vector<ImageTensor> inputs;
  inputs.reserve(kNumColorOps);
  ImageTensor cur = x;
  for (std::size_t j = 0; j < kNumColorOps; ++j) {
    inputs.push_back(cur);
    cur = apply_op(kChainOrder[j], cur, m[j]);
  }
  ChainGrad out;
  ImageTensor g = grad_out;
  for (std::size_t j = kNumColorOps; j-- > 0;) {
    OpGrad og = op_grad(kChainOrder[j], inputs[j], m[j], g);
    out.dm[j] = og.dm;
    g = std::move(og.dx);
  }
  out.dx = std::move(g);
  return out;
}

}  // namespace osda
