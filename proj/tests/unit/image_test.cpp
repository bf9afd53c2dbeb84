#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "osda/errors.hpp"
#include "osda/image.hpp"
#include "support/testing.hpp"

namespace osda {
namespace {

using testing::code_of;

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

TEST(Image, Img1RoundTripIsExactForFloat32Values) {
  testing::TempDir dir;
  Rng rng(1);
  auto img = testing::random_image(rng, 5, 7);
  for (auto& v : img.data) v = static_cast<float>(v);
  write_image(dir / "a.img", img);
  const auto back = read_image(dir / "a.img");
  EXPECT_EQ(back.h, 5);
  EXPECT_EQ(back.w, 7);
  EXPECT_EQ(back.data, img.data);
}

TEST(Image, Img1RejectsOtherMagicAndTrailingBytes) {
  testing::TempDir dir;
  write_image(dir / "a.img", ImageTensor(2, 2, 0.5));
  auto bytes = testing::read_bytes(dir / "a.img");
  bytes.push_back(0);
  testing::write_bytes(dir / "b.img", bytes);
  EXPECT_EQ(code_of([&] { read_image(dir / "b.img"); }), Errc::TrailingBytes);
  bytes[0] = 'X';
  testing::write_bytes(dir / "c.img", bytes);
  EXPECT_EQ(code_of([&] { read_image(dir / "c.img"); }), Errc::BadMagic);
}

TEST(Image, PpmRoundTripQuantizesToEightBits) {
  testing::TempDir dir;
  Rng rng(2);
  const auto img = testing::random_image(rng, 4, 6);
  write_ppm(dir / "a.ppm", img);
  const auto back = read_ppm(dir / "a.ppm");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.data[i] - img.data[i]), 0.5 / 255.0 + 1e-12);
  write_ppm(dir / "b.ppm", back);
  EXPECT_EQ(testing::read_bytes(dir / "a.ppm"), testing::read_bytes(dir / "b.ppm"));
}

TEST(Image, ReadsAsciiPixmapsWithComments) {
  testing::TempDir dir;
  write_text(dir / "a.ppm", "P3\n# two by one\n2 1\n4\n0 2 4  4 4 0\n");
  const auto img = read_ppm(dir / "a.ppm");
  EXPECT_EQ(img.h, 1);
  EXPECT_EQ(img.w, 2);
  EXPECT_EQ(img.data, (std::vector<double>{0, 0.5, 1, 1, 1, 0}));
}

TEST(Image, ReadsSixteenBitBinaryPixmaps) {
  testing::TempDir dir;
  std::string s = "P6\n1 1\n65535\n";
  s += std::string("\xff\xff\x80\x00\x00\x00", 6);
  write_text(dir / "a.ppm", s);
  const auto img = read_ppm(dir / "a.ppm");
  EXPECT_EQ(img.data[0], 1.0);
  EXPECT_DOUBLE_EQ(img.data[1], 32768.0 / 65535.0);
  EXPECT_EQ(img.data[2], 0.0);
}

TEST(Image, PpmErrors) {
  testing::TempDir dir;
  write_text(dir / "magic.ppm", "P5\n1 1\n255\n\0");
  EXPECT_EQ(code_of([&] { read_ppm(dir / "magic.ppm"); }), Errc::BadMagic);
  write_text(dir / "short.ppm", "P6\n2 2\n255\nabc");
  EXPECT_EQ(code_of([&] { read_ppm(dir / "short.ppm"); }), Errc::TruncatedFile);
  write_text(dir / "header.ppm", "P6\nx 2\n255\n");
  EXPECT_EQ(code_of([&] { read_ppm(dir / "header.ppm"); }), Errc::BadValue);
  EXPECT_EQ(code_of([&] { read_ppm(dir / "missing.ppm"); }), Errc::IoError);
}

}  // namespace
}  // namespace osda
