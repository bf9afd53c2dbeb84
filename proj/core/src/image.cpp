#include "osda/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "osda/binio.hpp"
#include "osda/errors.hpp"

namespace osda {

void write_image(const std::filesystem::path& path, const ImageTensor& img) {
  binio::Writer w;
  w.magic("IMG1");
  w.u32(static_cast<std::uint32_t>(img.h));
  w.u32(static_cast<std::uint32_t>(img.w));
  w.u32(3);
  for (double v : img.data) w.f32(v);
  w.save(path);
}

ImageTensor read_image(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("IMG1");
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t ch = r.u32();
  if (h == 0 || w == 0 || ch != 3) throw Error(Errc::BadShape, path.string() + ": expected a nonempty 3-channel image");
  r.require(std::size_t{h} * w * 3 * 4);
  ImageTensor img(static_cast<int>(h), static_cast<int>(w));
  for (auto& v : img.data) {
    const float f = r.f32();
    if (!std::isfinite(f)) throw Error(Errc::NonFiniteValue, path.string());
    v = f;
  }
  r.finish();
  return img;
}

namespace {

class PpmTokens {
 public:
  explicit PpmTokens(const std::vector<unsigned char>& bytes) : b_(bytes) {}

  std::string next() {
    skip_space_and_comments();
    std::string tok;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) tok.push_back(static_cast<char>(b_[pos_++]));
    return tok;
  }

  long number(const std::filesystem::path& path) {
    const std::string tok = next();
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(ch); })) {
      throw Error(Errc::BadValue, path.string() + ": malformed PPM header");
    }
    return std::stol(tok);
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageTensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  PpmTokens tok(bytes);
  const std::string magic = tok.next();
  if (magic != "P6" && magic != "P3") throw Error(Errc::BadMagic, path.string() + " is not a P3/P6 pixmap");
  const long w = tok.number(path);
  const long h = tok.number(path);
  const long maxval = tok.number(path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(Errc::BadValue, path.string() + ": bad PPM dimensions or maxval");
  }
  ImageTensor img(static_cast<int>(h), static_cast<int>(w));
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P3") {
    for (auto& v : img.data) v = std::min(1.0, static_cast<double>(tok.number(path)) * scale);
    return img;
  }
  tok.advance(1);  // single whitespace after maxval
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  if (bytes.size() < tok.pos() + img.size() * bpp) throw Error(Errc::TruncatedFile, path.string());
  std::size_t p = tok.pos();
  for (auto& v : img.data) {
    unsigned value = bytes[p++];
    if (bpp == 2) value = (value << 8) | bytes[p++];
    v = std::min(1.0, value * scale);
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const ImageTensor& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  for (double v : img.data) {
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

}  // namespace osda
