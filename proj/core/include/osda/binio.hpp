#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "osda/matrix.hpp"

// Little-endian primitives shared by every on-disk format. All formats start
// with a 4-byte ASCII magic followed by 32-bit unsigned counts.
namespace osda::binio {

class Writer {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void f32(float v);
  void f32(double v) { f32(static_cast<float>(v)); }

  const std::vector<unsigned char>& bytes() const noexcept { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::filesystem::path origin);

  static Reader open(const std::filesystem::path& path);

  /// Throws BadMagic when the next four bytes differ from `tag` (or are missing).
  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  float f32();

  /// Throws TruncatedFile unless at least `n` bytes remain.
  void require(std::size_t n) const;
  /// Throws TrailingBytes if anything is left unread.
  void finish() const;

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
  std::filesystem::path origin_;
};

/// Row-major float32 matrix behind `tag`, rows and cols as u32.
void write_matrix(const std::filesystem::path& path, std::string_view tag, const Matrix& m);

/// Loads a matrix written by write_matrix. Rejects zero counts, short or long
/// payloads and non-finite values.
Matrix read_matrix(const std::filesystem::path& path, std::string_view tag);

}  // namespace osda::binio
