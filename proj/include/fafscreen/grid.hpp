#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fafscreen/error.hpp"
#include "fafscreen/image.hpp"

namespace faf {

/// The nine ETDRS sectors in canonical feature order.
enum class SectorId : std::uint8_t { CSF, TIM, SIM, NIM, IIM, TOM, SOM, NOM, IOM };

inline constexpr std::size_t kSectorCount = 9;
inline constexpr std::size_t kFeatureCount = 2 * kSectorCount;
inline constexpr std::array<SectorId, kSectorCount> kAllSectors = {
    SectorId::CSF, SectorId::TIM, SectorId::SIM, SectorId::NIM, SectorId::IIM,
    SectorId::TOM, SectorId::SOM, SectorId::NOM, SectorId::IOM};

constexpr std::size_t index_of(SectorId s) noexcept { return static_cast<std::size_t>(s); }
std::string_view to_string(SectorId sector);
std::optional<SectorId> parse_sector(std::string_view text);

/// Fovea-centred grid placement. Radii are outer boundaries of the central
/// subfield, inner ring and outer ring, in pixels.
struct GridSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double r1 = 1.0;
  double r2 = 3.0;
  double r3 = 6.0;
  Laterality laterality = Laterality::OD;
  /// Default: OD has nasal on image-right, OS on image-left. Set to swap.
  bool flip_nasal = false;

  /// Throws InvalidArgument unless 0 < r1 < r2 < r3, the centre is finite and
  /// laterality is OD or OS. The centre may lie outside the image.
  void validate() const;

  /// Standard 1:3:6 diameter proportions scaled so the outer radius is r3.
  static GridSpec with_default_radii(double cx, double cy, double r3, Laterality laterality);

  bool nasal_is_right() const noexcept { return (laterality == Laterality::OD) != flip_nasal; }
};

/// 18 statistics: (mean, std) per sector in canonical order.
struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double mean(SectorId s) const noexcept { return values[2 * index_of(s)]; }
  double std(SectorId s) const noexcept { return values[2 * index_of(s) + 1]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Column names in canonical order: CSF_mean, CSF_std, TIM_mean, ...
const std::array<std::string, kFeatureCount>& feature_names();

class EmptySectorError : public DataError {
 public:
  explicit EmptySectorError(SectorId sector);
  const char* kind() const noexcept override { return "EmptySector"; }
  SectorId sector() const noexcept { return sector_; }

 private:
  SectorId sector_;
};

/// Maps the pixel centre (px + 0.5, py + 0.5) to its sector. Radius ties go
/// to the inner region and diagonal ties to the superior/inferior quadrant.
std::optional<SectorId> sector_of(int px, int py, const GridSpec& grid);

using SectorCounts = std::array<std::int64_t, kSectorCount>;

/// In-bounds pixel count per sector.
SectorCounts sector_pixel_counts(int width, int height, const GridSpec& grid);

/// Per-sector accumulators. count/sum/sum_sq are exact integers; mean and
/// std are derived from them with a single rounding each, so a constant
/// shift leaves std bit-identical. Empty sectors report NaN statistics.
struct SectorStats {
  SectorId sector = SectorId::CSF;
  std::int64_t count = 0;
  std::int64_t sum = 0;
  std::uint64_t sum_sq = 0;
  double mean = 0.0;
  double std = 0.0;
};

std::array<SectorStats, kSectorCount> sector_statistics(const FafImage& img, const GridSpec& grid);

/// Population statistics per sector. Throws EmptySectorError naming the
/// first sector (canonical order) without in-bounds pixels.
FeatureVector compute_features(const FafImage& img, const GridSpec& grid);

}  // namespace faf
