#include "fafscreen/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

namespace faf {

namespace {

using BigInt = boost::multiprecision::cpp_int;

struct Dyadic {
  BigInt m;
  int e;  // value = m * 2^e
};

Dyadic to_dyadic(double c) {
  int exp = 0;
  const double frac = std::frexp(c, &exp);
  return {BigInt(static_cast<std::int64_t>(std::ldexp(frac, 53))), exp - 53};
}

// Exact midpoint of two finite non-negative doubles.
Dyadic midpoint(double a, double b) {
  auto da = to_dyadic(a);
  auto db = to_dyadic(b);
  const int e = std::min(da.e, db.e);
  return {(da.m << (da.e - e)) + (db.m << (db.e - e)), e - 1};
}

// Sign of (v * n)^2 - scatter, exact.
int compare_scaled_square(const Dyadic& v, std::uint64_t n, const BigInt& scatter) {
  BigInt lhs = v.m * n;
  lhs *= lhs;
  BigInt rhs = scatter;
  if (v.e >= 0)
    lhs <<= 2 * v.e;
  else
    rhs <<= -2 * v.e;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

bool even_mantissa(double c) {
  std::uint64_t bits;
  std::memcpy(&bits, &c, sizeof bits);
  return (bits & 1u) == 0;
}

// sqrt(scatter) / n rounded to nearest, ties to even.
double rounded_std(const BigInt& scatter, std::uint64_t n) {
  if (scatter == 0) return 0.0;
  const long double approx = static_cast<long double>(scatter) /
                             (static_cast<long double>(n) * static_cast<long double>(n));
  double s = static_cast<double>(std::sqrt(approx));
  const auto inf = std::numeric_limits<double>::infinity();
  // Step s until the midpoints to both neighbours bracket the exact value.
  for (;;) {
    const double up = std::nextafter(s, inf);
    const int c = compare_scaled_square(midpoint(s, up), n, scatter);
    if (c < 0 || (c == 0 && !even_mantissa(s))) {
      s = up;
      continue;
    }
    const double down = std::nextafter(s, 0.0);
    if (down > 0.0) {
      const int d = compare_scaled_square(midpoint(down, s), n, scatter);
      if (d > 0 || (d == 0 && !even_mantissa(s))) {
        s = down;
        continue;
      }
    }
    return s;
  }
}

constexpr std::array<std::string_view, kSectorCount> kSectorNames = {
    "CSF", "TIM", "SIM", "NIM", "IIM", "TOM", "SOM", "NOM", "IOM"};

struct Extent {
  int x0, x1, y0, y1;  // half-open
};

Extent grid_extent(int width, int height, const GridSpec& grid) {
  const auto clampi = [](double v, int lo, int hi) {
    if (!(v > lo)) return lo;
    if (v > hi) return hi;
    return static_cast<int>(v);
  };
  return {clampi(std::floor(grid.center_x - grid.r3) - 1, 0, width),
          clampi(std::ceil(grid.center_x + grid.r3) + 1, 0, width),
          clampi(std::floor(grid.center_y - grid.r3) - 1, 0, height),
          clampi(std::ceil(grid.center_y + grid.r3) + 1, 0, height)};
}

}  // namespace

std::string_view to_string(SectorId sector) { return kSectorNames[index_of(sector)]; }

std::optional<SectorId> parse_sector(std::string_view text) {
  for (auto s : kAllSectors)
    if (kSectorNames[index_of(s)] == text) return s;
  return std::nullopt;
}

void GridSpec::validate() const {
  if (!std::isfinite(center_x) || !std::isfinite(center_y))
    throw InvalidArgument("grid centre must be finite");
  if (!std::isfinite(r3) || !(0.0 < r1 && r1 < r2 && r2 < r3))
    throw InvalidArgument("grid radii must satisfy 0 < r1 < r2 < r3");
  if (laterality == Laterality::Unknown)
    throw InvalidArgument("grid laterality must be OD or OS");
}

GridSpec GridSpec::with_default_radii(double cx, double cy, double r3, Laterality laterality) {
  GridSpec g;
  g.center_x = cx;
  g.center_y = cy;
  g.r1 = r3 / 6.0;
  g.r2 = r3 / 2.0;
  g.r3 = r3;
  g.laterality = laterality;
  return g;
}

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    for (auto s : kAllSectors) {
      n[2 * index_of(s)] = std::string(to_string(s)) + "_mean";
      n[2 * index_of(s) + 1] = std::string(to_string(s)) + "_std";
    }
    return n;
  }();
  return names;
}

EmptySectorError::EmptySectorError(SectorId sector)
    : DataError("EmptySector(" + std::string(to_string(sector)) +
                "): no in-bounds pixels; grid misplaced or radii too small"),
      sector_(sector) {}

std::optional<SectorId> sector_of(int px, int py, const GridSpec& grid) {
  const double dx = (px + 0.5) - grid.center_x;
  const double dy = (py + 0.5) - grid.center_y;  // image y grows downward
  const double d2 = dx * dx + dy * dy;
  if (d2 <= grid.r1 * grid.r1) return SectorId::CSF;
  bool inner;
  if (d2 <= grid.r2 * grid.r2)
    inner = true;
  else if (d2 <= grid.r3 * grid.r3)
    inner = false;
  else
    return std::nullopt;

  const double adx = std::fabs(dx);
  if (dy < 0 && adx <= -dy) return inner ? SectorId::SIM : SectorId::SOM;
  if (dy > 0 && adx <= dy) return inner ? SectorId::IIM : SectorId::IOM;
  const bool nasal = (dx > 0) == grid.nasal_is_right();
  if (nasal) return inner ? SectorId::NIM : SectorId::NOM;
  return inner ? SectorId::TIM : SectorId::TOM;
}

SectorCounts sector_pixel_counts(int width, int height, const GridSpec& grid) {
  SectorCounts counts{};
  const auto ext = grid_extent(width, height, grid);
  for (int y = ext.y0; y < ext.y1; ++y)
    for (int x = ext.x0; x < ext.x1; ++x)
      if (auto s = sector_of(x, y, grid)) ++counts[index_of(*s)];
  return counts;
}

std::array<SectorStats, kSectorCount> sector_statistics(const FafImage& img, const GridSpec& grid) {
  grid.validate();
  std::array<SectorStats, kSectorCount> stats{};
  const auto ext = grid_extent(img.width(), img.height(), grid);
  const auto px = img.pixels();
  for (int y = ext.y0; y < ext.y1; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width());
    for (int x = ext.x0; x < ext.x1; ++x) {
      const auto s = sector_of(x, y, grid);
      if (!s) continue;
      const std::uint64_t v = px[row + static_cast<std::size_t>(x)];
      auto& acc = stats[index_of(*s)];
      ++acc.count;
      acc.sum += static_cast<std::int64_t>(v);
      acc.sum_sq += v * v;
    }
  }
  for (auto sector : kAllSectors) {
    auto& acc = stats[index_of(sector)];
    acc.sector = sector;
    if (acc.count == 0) {
      acc.mean = acc.std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    // n^2 * variance, exact in integers.
    const BigInt scatter = BigInt(acc.count) * acc.sum_sq - BigInt(acc.sum) * acc.sum;
    acc.mean = static_cast<double>(acc.sum) / static_cast<double>(acc.count);
    acc.std = rounded_std(scatter, acc.count);
  }
  return stats;
}

FeatureVector compute_features(const FafImage& img, const GridSpec& grid) {
  const auto stats = sector_statistics(img, grid);
  FeatureVector fv;
  for (auto sector : kAllSectors) {
    const auto& acc = stats[index_of(sector)];
    if (acc.count == 0) throw EmptySectorError(sector);
    fv.values[2 * index_of(sector)] = acc.mean;
    fv.values[2 * index_of(sector) + 1] = acc.std;
  }
  return fv;
}

}  // namespace faf
