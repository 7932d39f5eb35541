#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace faf {

enum class Laterality { OD, OS, Unknown };

std::string_view to_string(Laterality laterality);
std::optional<Laterality> parse_laterality(std::string_view text);

enum class ImageFormat { Auto, Pgm, Png };
enum class PgmEncoding { Ascii, Binary };

/// Grayscale raster, row-major. Intensities stay integral; statistics are
/// computed downstream in binary64. Immutable once constructed.
class FafImage {
 public:
  FafImage(int width, int height, std::vector<std::uint16_t> pixels, std::uint16_t max_value,
           Laterality laterality = Laterality::Unknown);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::uint16_t max_value() const noexcept { return max_value_; }
  Laterality laterality() const noexcept { return laterality_; }
  std::span<const std::uint16_t> pixels() const noexcept { return pixels_; }

  /// Bounds-checked access; throws InvalidArgument outside the raster.
  std::uint16_t at(int x, int y) const;

  FafImage with_laterality(Laterality laterality) const;

  friend bool operator==(const FafImage&, const FafImage&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint16_t> pixels_;
  std::uint16_t max_value_;
  Laterality laterality_;
};

inline std::uint16_t pixel_at(const FafImage& img, int x, int y) { return img.at(x, y); }

/// Decodes PGM (P2/P5, maxval <= 65535) or 8/16-bit grayscale PNG. Colour,
/// alpha and sub-byte bit depths are rejected with ImageFormatError.
FafImage load_image(std::span<const std::uint8_t> bytes, ImageFormat hint = ImageFormat::Auto);
FafImage load_image_file(const std::filesystem::path& path,
                         Laterality laterality = Laterality::Unknown);

std::vector<std::uint8_t> encode_pgm(const FafImage& img, PgmEncoding encoding = PgmEncoding::Binary);

/// PNG with bit depth 8 when max_value <= 255, else 16. Values are written
/// unscaled.
std::vector<std::uint8_t> encode_png(const FafImage& img);

/// 8-bit PNG with intensities rescaled from [0, max_value] to [0, 255], for
/// display clients.
std::vector<std::uint8_t> render_display_png(const FafImage& img);

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace faf
