#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "fafscreen/error.hpp"
#include "fafscreen/image.hpp"
#include "fafscreen/rng.hpp"
#include "oracles.hpp"

using namespace faf;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

// Independent minimal PNG signature and IHDR reader.
struct PngHeader {
  std::uint32_t width, height;
  int bit_depth, color_type;
};
PngHeader png_header(const std::vector<std::uint8_t>& b) {
  const auto be32 = [&](std::size_t o) {
    return (std::uint32_t(b[o]) << 24) | (std::uint32_t(b[o + 1]) << 16) | (std::uint32_t(b[o + 2]) << 8) | b[o + 3];
  };
  REQUIRE(b.size() > 33);
  REQUIRE(std::memcmp(b.data(), "\x89PNG\r\n\x1a\n", 8) == 0);
  REQUIRE(std::memcmp(b.data() + 12, "IHDR", 4) == 0);
  return {be32(16), be32(20), b[24], b[25]};
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("minimal ascii pgm") {
    const auto img = load_image(bytes("P2 1 1 255 \n 0"));
    CHECK(img.width() == 1);
    CHECK(img.height() == 1);
    CHECK(img.max_value() == 255);
    CHECK(img.at(0, 0) == 0);
  }

  TEST_CASE("binary pgm payload is row-major") {
    std::vector<std::uint8_t> file = bytes("P5\n2 2\n255\n");
    for (std::uint8_t v : {10, 20, 30, 40}) file.push_back(v);
    const auto img = load_image(file);
    REQUIRE(img.pixels().size() == 4);
    CHECK(img.at(0, 0) == 10);
    CHECK(img.at(1, 0) == 20);
    CHECK(img.at(0, 1) == 30);
    CHECK(img.at(1, 1) == 40);
    CHECK(encode_pgm(img, PgmEncoding::Binary) == file);
  }

  TEST_CASE("16-bit binary pgm is big-endian") {
    std::vector<std::uint8_t> file = bytes("P5 2 1 65535\n");
    for (std::uint8_t v : {0x01, 0x02, 0xff, 0xfe}) file.push_back(v);
    const auto img = load_image(file);
    CHECK(img.at(0, 0) == 0x0102);
    CHECK(img.at(1, 0) == 0xfffe);
  }

  TEST_CASE("comments are skipped") {
    const auto img = load_image(bytes("P2\n# comment\n2 1 # trailing\n9\n1 9\n"));
    CHECK(img.at(1, 0) == 9);
  }

  TEST_CASE("truncated pixel data") {
    CHECK_THROWS_WITH_AS(load_image(bytes("P2 2 2 255 1 2 3")), doctest::Contains("truncated pixel data"),
                         ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P5 2 2 255\n\x01\x02\x03")), ImageFormatError);
  }

  TEST_CASE("malformed headers are rejected") {
    CHECK_THROWS_AS(load_image(bytes("P3 1 1 255 0 0 0")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P6 1 1 255\nabc")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P2 0 1 255")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P2 1 1 0 0")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P2 1 1 70000 0")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("P2 1 1 10 11")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("GIF89a")), ImageFormatError);
    CHECK_THROWS_AS(load_image(bytes("")), ImageFormatError);
  }

  TEST_CASE("pixel access") {
    const FafImage one(1, 1, {7}, 255);
    CHECK(pixel_at(one, 0, 0) == 7);
    const FafImage two(2, 2, {10, 20, 30, 40}, 255);
    CHECK(pixel_at(two, 1, 0) == 20);
    CHECK_THROWS_AS(pixel_at(two, 2, 0), InvalidArgument);
    CHECK_THROWS_AS(pixel_at(two, 0, -1), InvalidArgument);
  }

  TEST_CASE("constructor invariants") {
    CHECK_THROWS_AS(FafImage(2, 2, {1, 2, 3}, 255), InvalidArgument);
    CHECK_THROWS_AS(FafImage(1, 1, {300}, 255), InvalidArgument);
    CHECK_THROWS_AS(FafImage(0, 1, {}, 255), InvalidArgument);
  }

  TEST_CASE("round trips through every encoding") {
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const int w = 1 + static_cast<int>(rng.below(17));
      const int h = 1 + static_cast<int>(rng.below(17));
      const int maxval = trial % 2 == 0 ? 255 : static_cast<int>(1 + rng.below(65535));
      const auto img = oracle::random_image(rng, w, h, maxval);
      for (auto enc : {PgmEncoding::Ascii, PgmEncoding::Binary}) {
        const auto back = load_image(encode_pgm(img, enc));
        CHECK(back.width() == w);
        CHECK(back.height() == h);
        CHECK(back.max_value() == img.max_value());
        CHECK(std::equal(back.pixels().begin(), back.pixels().end(), img.pixels().begin(), img.pixels().end()));
      }
      const auto png = encode_png(img);
      const auto header = png_header(png);
      CHECK(header.width == static_cast<std::uint32_t>(w));
      CHECK(header.color_type == 0);
      CHECK(header.bit_depth == (maxval <= 255 ? 8 : 16));
      const auto back = load_image(png);
      CHECK(std::equal(back.pixels().begin(), back.pixels().end(), img.pixels().begin(), img.pixels().end()));
    }
  }

  TEST_CASE("display png rescales to 8 bits") {
    const FafImage img(3, 1, {0, 500, 1000}, 1000);
    const auto png = render_display_png(img);
    CHECK(png_header(png).bit_depth == 8);
    const auto back = load_image(png);
    CHECK(back.at(0, 0) == 0);
    CHECK(back.at(1, 0) == 128);
    CHECK(back.at(2, 0) == 255);
  }

  TEST_CASE("files carry laterality from the caller") {
    const auto dir = std::filesystem::temp_directory_path() / "fafscreen_image_test";
    std::filesystem::create_directories(dir);
    const FafImage img(2, 1, {1, 2}, 255);
    write_file(dir / "a.pgm", encode_pgm(img));
    const auto back = load_image_file(dir / "a.pgm", Laterality::OS);
    CHECK(back.laterality() == Laterality::OS);
    CHECK(back.with_laterality(Laterality::Unknown) == img);
    CHECK_THROWS_AS(load_image_file(dir / "missing.pgm"), DataError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("laterality text") {
    CHECK(parse_laterality("OD") == Laterality::OD);
    CHECK(parse_laterality("OS") == Laterality::OS);
    CHECK_FALSE(parse_laterality("left").has_value());
    CHECK(to_string(Laterality::OS) == "OS");
  }
}
