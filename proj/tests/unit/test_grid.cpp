#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fafscreen/grid.hpp"
#include "fafscreen/rng.hpp"
#include "oracles.hpp"

using namespace faf;

namespace {

GridSpec grid(double cx, double cy, double r1, double r2, double r3, Laterality lat = Laterality::OD) {
  return GridSpec{cx, cy, r1, r2, r3, lat, false};
}

FafImage constant(int w, int h, std::uint16_t v) {
  return FafImage(w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h, v), 255);
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("validation") {
    CHECK_NOTHROW(grid(10, 10, 1, 2, 3).validate());
    CHECK_THROWS_AS(grid(10, 10, 2, 2, 3).validate(), InvalidArgument);
    CHECK_THROWS_AS(grid(10, 10, 0, 2, 3).validate(), InvalidArgument);
    CHECK_THROWS_AS(grid(10, 10, 1, 4, 3).validate(), InvalidArgument);
    CHECK_THROWS_AS(grid(NAN, 10, 1, 2, 3).validate(), InvalidArgument);
    CHECK_THROWS_AS(grid(10, 10, 1, 2, 3, Laterality::Unknown).validate(), InvalidArgument);
  }

  TEST_CASE("hand-evaluated sector membership") {
    const auto g = grid(100, 100, 10, 30, 60);
    // Pixel centres sit at +0.5; choose pixels whose centre is on the axis.
    CHECK(sector_of(99, 99, g) == SectorId::CSF);
    CHECK(sector_of(139, 99, g) == SectorId::NOM);  // r = 40, right of centre, OD
    CHECK(sector_of(60, 99, g) == SectorId::TOM);
    CHECK(sector_of(99, 59, g) == SectorId::SOM);   // image up
    CHECK(sector_of(99, 139, g) == SectorId::IOM);
    CHECK(sector_of(119, 99, g) == SectorId::NIM);
    CHECK_FALSE(sector_of(99, 29, g).has_value());  // r = 70
    const auto os = grid(100, 100, 10, 30, 60, Laterality::OS);
    CHECK(sector_of(139, 99, os) == SectorId::TOM);
  }

  TEST_CASE("boundary ties go inward and to the vertical quadrants") {
    const auto g = grid(0.5, 0.5, 2, 4, 6);
    CHECK(sector_of(2, 0, g) == SectorId::CSF);  // r == r1
    CHECK(sector_of(4, 0, g) == SectorId::NIM);  // r == r2
    CHECK(sector_of(6, 0, g) == SectorId::NOM);  // r == r3
    CHECK_FALSE(sector_of(7, 0, g).has_value());
    const auto d = grid(10.5, 10.5, 1, 4, 8);
    CHECK(sector_of(12, 8, d) == SectorId::SIM);  // exactly on the diagonal
    CHECK(sector_of(8, 12, d) == SectorId::IIM);
    CHECK(sector_of(13, 10, d) == SectorId::NIM);
  }

  TEST_CASE("flip_nasal mirrors the horizontal quadrants") {
    auto g = grid(100, 100, 10, 30, 60);
    g.flip_nasal = true;
    CHECK(sector_of(139, 99, g) == SectorId::TOM);
    CHECK_FALSE(g.nasal_is_right());
  }

  TEST_CASE("sector_of agrees with the exact rasterizer") {
    CounterRng rng(3);
    for (int t = 0; t < 20; ++t) {
      const auto g = oracle::random_grid(rng, 64, 48, t % 2 == 0);
      for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) REQUIRE(sector_of(x, y, g) == oracle::sector_exact(x, y, g));
    }
  }

  TEST_CASE("counts") {
    CHECK(sector_pixel_counts(1, 1, grid(500, 500, 10, 20, 30)) == SectorCounts{});
    const auto g = grid(100, 100, 10, 30, 60);
    const auto counts = sector_pixel_counts(200, 200, g);
    std::size_t total = 0, brute = 0;
    for (auto c : counts) total += c;
    for (int y = 0; y < 200; ++y)
      for (int x = 0; x < 200; ++x) {
        const double dx = x + 0.5 - 100, dy = y + 0.5 - 100;
        if (dx * dx + dy * dy <= 3600) ++brute;
      }
    CHECK(total == brute);
  }

  TEST_CASE("counts approach analytic areas") {
    const auto g = grid(300.25, 299.75, 50, 120, 250);
    const auto counts = sector_pixel_counts(600, 600, g);
    const double pi = std::numbers::pi;
    CHECK(std::fabs(counts[index_of(SectorId::CSF)] / (pi * 50 * 50) - 1) < 0.02);
    const double inner = pi * (120.0 * 120 - 50.0 * 50) / 4;
    const double outer = pi * (250.0 * 250 - 120.0 * 120) / 4;
    for (auto s : {SectorId::TIM, SectorId::SIM, SectorId::NIM, SectorId::IIM})
      CHECK(std::fabs(counts[index_of(s)] / inner - 1) < 0.02);
    for (auto s : {SectorId::TOM, SectorId::SOM, SectorId::NOM, SectorId::IOM})
      CHECK(std::fabs(counts[index_of(s)] / outer - 1) < 0.02);
  }

  TEST_CASE("constant image") {
    const auto fv = compute_features(constant(100, 100, 100), grid(50, 50, 8, 20, 40));
    for (auto s : kAllSectors) {
      CHECK(fv.mean(s) == 100.0);
      CHECK(fv.std(s) == 0.0);
    }
  }

  TEST_CASE("piecewise image with exact CSF boundary") {
    // No pixel centre lies within 0.5 px of r1 = 10.3 relative to (50, 50).
    const auto g = grid(50, 50, 10.3, 25, 45);
    std::vector<std::uint16_t> px(100 * 100);
    for (int y = 0; y < 100; ++y)
      for (int x = 0; x < 100; ++x) {
        const double dx = x + 0.5 - 50, dy = y + 0.5 - 50;
        px[y * 100 + x] = dx * dx + dy * dy <= 10.3 * 10.3 ? 50 : 200;
      }
    const FafImage img(100, 100, px, 255);
    const auto fv = compute_features(img, g);
    CHECK(fv.mean(SectorId::CSF) == 50.0);
    CHECK(fv.std(SectorId::CSF) == 0.0);
    for (auto s : kAllSectors)
      if (s != SectorId::CSF) {
        CHECK(fv.mean(s) == 200.0);
        CHECK(fv.std(s) == 0.0);
      }
    const auto o = oracle::brute_force_features(img, g);
    CHECK(o.features == fv.values);
  }

  TEST_CASE("empty sector") {
    // The left image edge cuts the grid between r1 and r2; OS puts nasal on
    // the left, so only NOM is empty.
    const auto g = grid(4, 50, 2, 5, 10, Laterality::OS);
    try {
      compute_features(constant(20, 100, 5), g);
      FAIL("expected EmptySectorError");
    } catch (const EmptySectorError& e) {
      CHECK(e.sector() == SectorId::NOM);
      CHECK(std::string(e.kind()) == "EmptySector");
    }
    const auto stats = sector_statistics(constant(20, 100, 5), g);
    for (auto s : kAllSectors)
      if (s != SectorId::NOM) CHECK(stats[index_of(s)].count > 0);
    CHECK(stats[index_of(SectorId::NOM)].count == 0);
    CHECK(std::isnan(stats[index_of(SectorId::NOM)].mean));
  }

  TEST_CASE("partition: pixels are counted once") {
    CounterRng rng(5);
    const auto img = oracle::random_image(rng, 40, 40, 255);
    const auto g = grid(20, 20, 4, 9, 30);  // r3 exceeds the image
    const auto stats = sector_statistics(img, g);
    std::size_t total = 0;
    for (const auto& s : stats) total += s.count;
    std::size_t inside = 0;
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) inside += sector_of(x, y, g).has_value();
    CHECK(total == inside);
  }

  TEST_CASE("feature order and names") {
    const auto& names = feature_names();
    CHECK(names[0] == "CSF_mean");
    CHECK(names[1] == "CSF_std");
    CHECK(names[17] == "IOM_std");
    CHECK(parse_sector("NOM") == SectorId::NOM);
    CHECK_FALSE(parse_sector("XYZ").has_value());
  }

  TEST_CASE("default radii") {
    const auto g = GridSpec::with_default_radii(10, 10, 6, Laterality::OD);
    CHECK(g.r1 == 1.0);
    CHECK(g.r2 == 3.0);
  }
}

namespace {

FafImage transformed(const FafImage& img, int scale, int shift, int maxval) {
  std::vector<std::uint16_t> px(img.pixels().begin(), img.pixels().end());
  for (auto& p : px) p = static_cast<std::uint16_t>(p * scale + shift);
  return FafImage(img.width(), img.height(), std::move(px), static_cast<std::uint16_t>(maxval));
}

std::array<SectorId, kSectorCount> swapped_sectors() {
  std::array<SectorId, kSectorCount> m{};
  for (auto s : kAllSectors) m[index_of(s)] = s;
  m[index_of(SectorId::TIM)] = SectorId::NIM;
  m[index_of(SectorId::NIM)] = SectorId::TIM;
  m[index_of(SectorId::TOM)] = SectorId::NOM;
  m[index_of(SectorId::NOM)] = SectorId::TOM;
  return m;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("brute-force equality on random images") {
    CounterRng rng(17);
    for (int t = 0; t < 12; ++t) {
      const int w = 40 + static_cast<int>(rng.below(40));
      const int h = 40 + static_cast<int>(rng.below(40));
      const auto img = oracle::random_image(rng, w, h, t % 3 == 0 ? 4095 : 255);
      const auto g = oracle::random_grid(rng, w, h, t % 2 == 0);
      const auto fv = compute_features(img, g);
      const auto o = oracle::brute_force_features(img, g);
      for (std::size_t k = 0; k < kFeatureCount; ++k) REQUIRE(fv.values[k] == o.features[k]);
    }
  }

  TEST_CASE("shift and power-of-two scale") {
    CounterRng rng(19);
    for (int t = 0; t < 8; ++t) {
      const auto img = oracle::random_image(rng, 50, 50, 255);
      const auto g = oracle::random_grid(rng, 50, 50, true);
      const auto base = compute_features(img, g);
      const int c = 1 + static_cast<int>(rng.below(1000));
      const auto shifted = compute_features(transformed(img, 1, c, 255 + c), g);
      const auto scaled = compute_features(transformed(img, 8, 0, 255 * 8), g);
      const auto shifted_oracle = oracle::brute_force_features(transformed(img, 1, c, 255 + c), g);
      const auto acc = sector_statistics(img, g);
      const auto acc_shifted = sector_statistics(transformed(img, 1, c, 255 + c), g);
      for (std::size_t k = 0; k < kSectorCount; ++k) {
        const auto n = static_cast<std::int64_t>(acc[k].count);
        CHECK(acc_shifted[k].sum == acc[k].sum + n * c);
        CHECK(acc_shifted[k].sum_sq ==
              acc[k].sum_sq + static_cast<std::uint64_t>(2 * c * acc[k].sum + n * c * c));
      }
      for (auto s : kAllSectors) {
        CHECK(shifted.std(s) == base.std(s));
        CHECK(shifted.mean(s) == shifted_oracle.features[2 * index_of(s)]);
        CHECK(std::fabs(shifted.mean(s) - (base.mean(s) + c)) <= std::nextafter(base.mean(s) + c, 1e9) - (base.mean(s) + c));
        CHECK(scaled.mean(s) == 8.0 * base.mean(s));
        CHECK(scaled.std(s) == 8.0 * base.std(s));
      }
    }
  }

  TEST_CASE("laterality swap permutes temporal and nasal") {
    CounterRng rng(23);
    const auto perm = swapped_sectors();
    for (int t = 0; t < 8; ++t) {
      const auto img = oracle::random_image(rng, 60, 60, 255);
      auto g = oracle::random_grid(rng, 60, 60, false);
      g.laterality = Laterality::OD;
      const auto od = compute_features(img, g);
      g.laterality = Laterality::OS;
      const auto os = compute_features(img, g);
      for (auto s : kAllSectors) {
        CHECK(os.mean(perm[index_of(s)]) == od.mean(s));
        CHECK(os.std(perm[index_of(s)]) == od.std(s));
      }
    }
  }
}
