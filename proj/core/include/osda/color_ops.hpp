#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "osda/image.hpp"

namespace osda {

/// The six color transforms, in the order the chain applies them.
enum class ColorOp { Gamma = 0, Hue, Saturation, Sharpness, Brightness, Contrast };

inline constexpr std::size_t kNumColorOps = 6;
inline constexpr std::array<ColorOp, kNumColorOps> kChainOrder = {
    ColorOp::Gamma, ColorOp::Hue, ColorOp::Saturation, ColorOp::Sharpness, ColorOp::Brightness, ColorOp::Contrast};

std::string_view to_string(ColorOp op) noexcept;

/// Magnitudes in chain order, each in [0, 1]; 0.5 is the identity.
using StyleMagnitudes = std::array<double, kNumColorOps>;

inline constexpr StyleMagnitudes kNeutralMagnitudes = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};

// With s = 2^(2m - 1):
//   gamma       out = in^s
//   hue         rotate the YIQ chroma plane by (2m - 1) * pi / 6
//   saturation  out = luma + s * (in - luma)
//   sharpness   out = blur + s * (in - blur), blur = 3x3 box over in-bounds pixels
//   brightness  out = s * in
//   contrast    out = mean + s * (in - mean), mean over the whole image
// Every output is clamped to [0, 1].
ImageTensor apply_op(ColorOp op, const ImageTensor& x, double m);

/// gamma -> hue -> saturation -> sharpness -> brightness -> contrast.
ImageTensor apply_chain(const ImageTensor& x, const StyleMagnitudes& m);

struct OpGrad {
  double dm = 0.0;
  ImageTensor dx;
};

/// Vector-Jacobian product of one op (including its clamp) with `grad_out`.
/// The clamp passes gradient only where the unclamped value lies strictly
/// inside (0, 1).
OpGrad op_grad(ColorOp op, const ImageTensor& x, double m, const ImageTensor& grad_out);

struct ChainGrad {
  std::array<double, kNumColorOps> dm{};
  ImageTensor dx;
};

/// Backpropagates `grad_out` (dL/d output) through the whole chain.
ChainGrad chain_grad(const ImageTensor& x, const StyleMagnitudes& m, const ImageTensor& grad_out);

/// Unclamped output of every op along the chain, for callers that need to
/// stay clear of the clamp kinks (finite-difference checks).
std::vector<ImageTensor> chain_preclamp_trace(const ImageTensor& x, const StyleMagnitudes& m);

}  // namespace osda
