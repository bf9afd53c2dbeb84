#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace osda {

/// h x w RGB image, values in [0, 1], stored interleaved (row, col, channel).
struct ImageTensor {
  int h = 0;
  int w = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int height, int width, double fill = 0.0)
      : h(height), w(width), data(static_cast<std::size_t>(height) * width * 3, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t index(int y, int x, int ch) const noexcept {
    return (static_cast<std::size_t>(y) * w + x) * 3 + ch;
  }
  double& at(int y, int x, int ch) { return data[index(y, x, ch)]; }
  double at(int y, int x, int ch) const { return data[index(y, x, ch)]; }
  bool same_shape(const ImageTensor& o) const noexcept { return h == o.h && w == o.w; }
};

/// "IMG1": magic, h, w, 3, float32 payload.
void write_image(const std::filesystem::path& path, const ImageTensor& img);
ImageTensor read_image(const std::filesystem::path& path);

/// Binary (P6) or ASCII (P3) portable pixmap, any maxval up to 65535.
ImageTensor read_ppm(const std::filesystem::path& path);
/// Writes 8-bit P6.
void write_ppm(const std::filesystem::path& path, const ImageTensor& img);

}  // namespace osda
