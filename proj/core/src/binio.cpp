#include "osda/binio.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "osda/errors.hpp"

namespace osda::binio {

void Writer::magic(std::string_view tag) {
  for (char ch : tag.substr(0, 4)) buf_.push_back(static_cast<unsigned char>(ch));
}

void Writer::u32(std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) buf_.push_back(static_cast<unsigned char>(v >> shift));
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Reader::Reader(std::vector<unsigned char> bytes, std::filesystem::path origin)
    : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

Reader Reader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path);
}

void Reader::expect_magic(std::string_view tag) {
  if (remaining() < 4 || std::string_view(reinterpret_cast<const char*>(bytes_.data() + pos_), 4) != tag) {
    throw Error(Errc::BadMagic, origin_.string() + " does not start with \"" + std::string(tag) + "\"");
  }
  pos_ += 4;
}

std::uint32_t Reader::u32() {
  require(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

void Reader::require(std::size_t n) const {
  if (remaining() < n) {
    throw Error(Errc::TruncatedFile, origin_.string() + ": need " + std::to_string(n) + " bytes, have " +
                                         std::to_string(remaining()));
  }
}

void Reader::finish() const {
  if (remaining() != 0) {
    throw Error(Errc::TrailingBytes, origin_.string() + ": " + std::to_string(remaining()) + " unexpected bytes");
  }
}

void write_matrix(const std::filesystem::path& path, std::string_view tag, const Matrix& m) {
  Writer w;
  w.magic(tag);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f32(m(i, j));
  w.save(path);
}

Matrix read_matrix(const std::filesystem::path& path, std::string_view tag) {
  Reader r = Reader::open(path);
  r.expect_magic(tag);
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (rows == 0 || cols == 0) {
    throw Error(Errc::EmptyMatrix, path.string() + " declares a " + std::to_string(rows) + "x" +
                                       std::to_string(cols) + " matrix");
  }
  r.require(std::size_t{rows} * cols * 4);
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteValue,
                    path.string() + " row " + std::to_string(i) + " col " + std::to_string(j));
      }
      m(i, j) = v;
    }
  }
  r.finish();
  return m;
}

}  // namespace osda::binio
