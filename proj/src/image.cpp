#include "fafscreen/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fafscreen/error.hpp"

namespace faf {

std::string_view to_string(Laterality laterality) {
  switch (laterality) {
    case Laterality::OD: return "OD";
    case Laterality::OS: return "OS";
    case Laterality::Unknown: break;
  }
  return "Unknown";
}

std::optional<Laterality> parse_laterality(std::string_view text) {
  if (text == "OD" || text == "od") return Laterality::OD;
  if (text == "OS" || text == "os") return Laterality::OS;
  if (text == "Unknown" || text == "unknown" || text.empty()) return Laterality::Unknown;
  return std::nullopt;
}

FafImage::FafImage(int width, int height, std::vector<std::uint16_t> pixels,
                   std::uint16_t max_value, Laterality laterality)
    : width_(width),
      height_(height),
      pixels_(std::move(pixels)),
      max_value_(max_value),
      laterality_(laterality) {
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (max_value == 0) throw InvalidArgument("image max_value must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw InvalidArgument("pixel count does not match width x height");
  if (std::any_of(pixels_.begin(), pixels_.end(), [&](auto v) { return v > max_value; }))
    throw InvalidArgument("pixel value exceeds max_value");
}

std::uint16_t FafImage::at(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_)
    throw InvalidArgument("pixel index (" + std::to_string(x) + "," + std::to_string(y) +
                          ") out of bounds");
  return pixels_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)];
}

FafImage FafImage::with_laterality(Laterality laterality) const {
  FafImage copy = *this;
  copy.laterality_ = laterality;
  return copy;
}

namespace {

// ---------------------------------------------------------------- PGM

class PgmCursor {
 public:
  explicit PgmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = static_cast<char>(bytes_[pos_]);
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  /// Returns nullopt at end of data.
  std::optional<unsigned long> read_uint(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) return std::nullopt;
    if (!std::isdigit(bytes_[pos_]))
      throw ImageFormatError(std::string("malformed PGM: expected integer for ") + what);
    unsigned long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 0xFFFFFFFFUL) throw ImageFormatError(std::string("PGM ") + what + " too large");
      ++pos_;
    }
    return value;
  }

  unsigned long require_uint(const char* what) {
    auto v = read_uint(what);
    if (!v) throw ImageFormatError(std::string("malformed PGM header: missing ") + what);
    return *v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint8_t byte(std::size_t offset) const { return bytes_[pos_ + offset]; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

FafImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ImageFormatError("malformed header: not a PNM file");
  const char kind = static_cast<char>(bytes[1]);
  if (kind == '3' || kind == '6') throw ImageFormatError("color image (PPM) rejected: grayscale only");
  if (kind != '2' && kind != '5') throw ImageFormatError("malformed header: unsupported PNM variant");

  PgmCursor cur(bytes.subspan(2));
  const auto width = cur.require_uint("width");
  const auto height = cur.require_uint("height");
  const auto maxval = cur.require_uint("maxval");
  if (width == 0 || height == 0) throw ImageFormatError("malformed header: zero dimension");
  if (width > 1u << 16 || height > 1u << 16) throw ImageFormatError("malformed header: dimension too large");
  if (maxval == 0 || maxval > 65535) throw ImageFormatError("unsupported bit depth: maxval out of range");

  const std::size_t count = width * height;
  std::vector<std::uint16_t> pixels(count);
  if (kind == '2') {
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = cur.read_uint("pixel");
      if (!v) throw ImageFormatError("truncated pixel data: expected " + std::to_string(count) +
                                     " values, found " + std::to_string(i));
      if (*v > maxval) throw ImageFormatError("malformed pixel data: value exceeds maxval");
      pixels[i] = static_cast<std::uint16_t>(*v);
    }
  } else {
    // Exactly one whitespace byte separates maxval from the raster.
    if (cur.remaining() == 0 || !std::isspace(cur.byte(0)))
      throw ImageFormatError("truncated pixel data: missing raster");
    cur.advance(1);
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    if (cur.remaining() < count * bytes_per)
      throw ImageFormatError("truncated pixel data: expected " + std::to_string(count * bytes_per) +
                             " bytes, found " + std::to_string(cur.remaining()));
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint16_t v = bytes_per == 1
                                  ? cur.byte(i)
                                  : static_cast<std::uint16_t>((cur.byte(2 * i) << 8) | cur.byte(2 * i + 1));
      if (v > maxval) throw ImageFormatError("malformed pixel data: value exceeds maxval");
      pixels[i] = v;
    }
  }
  return FafImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels),
                  static_cast<std::uint16_t>(maxval));
}

// ---------------------------------------------------------------- PNG

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

struct PngErrorState {
  char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof state->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->bytes.size() - src->pos < length) png_error(png, "truncated pixel data");
  std::memcpy(out, src->bytes.data() + src->pos, length);
  src->pos += length;
}

enum class PngReject { None, Color, Alpha, BitDepth, Libpng };

FafImage decode_png(std::span<const std::uint8_t> bytes) {
  PngReadSource source{bytes};
  PngErrorState err;
  // All state touched after setjmp lives outside the protected region.
  std::vector<std::uint16_t> pixels;
  // volatile: these survive a longjmp out of libpng.
  volatile png_uint_32 width = 0;
  volatile png_uint_32 height = 0;
  volatile int bit_depth = 0;
  volatile PngReject reject = PngReject::None;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                           png_warning_handler);
  if (!png) throw ImageFormatError("PNG decoder initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageFormatError("PNG decoder initialisation failed");
  }

  if (setjmp(png_jmpbuf(png))) {
    reject = PngReject::Libpng;
  } else {
    png_set_read_fn(png, &source, png_read_from_span);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    width = w;
    height = h;
    bit_depth = depth;
    const int color_type = png_get_color_type(png, info);
    if (color_type & PNG_COLOR_MASK_PALETTE || color_type & PNG_COLOR_MASK_COLOR) {
      reject = PngReject::Color;
    } else if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
      reject = PngReject::Alpha;
    } else if (depth != 8 && depth != 16) {
      reject = PngReject::BitDepth;
    } else {
      if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
      png_read_update_info(png, info);
      const std::size_t row_bytes = png_get_rowbytes(png, info);
      std::vector<std::uint8_t> raster(row_bytes * h);
      std::vector<png_bytep> rows(h);
      for (png_uint_32 y = 0; y < h; ++y) rows[y] = raster.data() + y * row_bytes;
      png_read_image(png, rows.data());
      pixels.resize(static_cast<std::size_t>(w) * h);
      for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
          const std::uint8_t* row = rows[y];
          pixels[static_cast<std::size_t>(y) * w + x] =
              depth == 8 ? row[x]
                             : static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
        }
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);

  switch (reject) {
    case PngReject::Color: throw ImageFormatError("color image rejected: grayscale only");
    case PngReject::Alpha: throw ImageFormatError("unsupported PNG: alpha channel");
    case PngReject::BitDepth:
      throw ImageFormatError("unsupported bit depth: " + std::to_string(bit_depth));
    case PngReject::Libpng: throw ImageFormatError(std::string("malformed PNG: ") + err.message);
    case PngReject::None: break;
  }
  return FafImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels),
                  bit_depth == 8 ? 255 : 65535);
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

std::vector<std::uint8_t> write_png(int width, int height, int bit_depth,
                                    const std::vector<std::uint8_t>& raster) {
  std::vector<std::uint8_t> out;
  PngErrorState err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                            png_warning_handler);
  if (!png) throw Error("PNG encoder initialisation failed");
  png_infop info = png_create_info_struct(png);
  volatile bool failed = false;  // survives a longjmp out of libpng
  if (!info) {
    failed = true;
  } else if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    const std::size_t row_bytes = static_cast<std::size_t>(width) * (bit_depth / 8);
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
      png_write_row(png, const_cast<png_bytep>(raster.data() + static_cast<std::size_t>(y) * row_bytes));
    png_write_end(png, info);
  }
  png_destroy_write_struct(&png, info ? &info : nullptr);
  if (failed) throw Error(std::string("PNG encoding failed: ") + err.message);
  return out;
}

}  // namespace

FafImage load_image(std::span<const std::uint8_t> bytes, ImageFormat hint) {
  if (hint == ImageFormat::Auto) {
    if (bytes.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin()))
      hint = ImageFormat::Png;
    else if (bytes.size() >= 2 && bytes[0] == 'P')
      hint = ImageFormat::Pgm;
    else
      throw ImageFormatError("malformed header: unrecognised image format");
  }
  return hint == ImageFormat::Png ? decode_png(bytes) : decode_pgm(bytes);
}

FafImage load_image_file(const std::filesystem::path& path, Laterality laterality) {
  const auto bytes = read_file(path);
  return load_image(bytes).with_laterality(laterality);
}

std::vector<std::uint8_t> encode_pgm(const FafImage& img, PgmEncoding encoding) {
  std::string header = std::string(encoding == PgmEncoding::Ascii ? "P2" : "P5") + "\n" +
                       std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n" +
                       std::to_string(img.max_value()) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto px = img.pixels();
  if (encoding == PgmEncoding::Ascii) {
    std::string body;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (x) body.push_back(' ');
        body += std::to_string(px[static_cast<std::size_t>(y) * img.width() + x]);
      }
      body.push_back('\n');
    }
    out.insert(out.end(), body.begin(), body.end());
  } else if (img.max_value() < 256) {
    for (auto v : px) out.push_back(static_cast<std::uint8_t>(v));
  } else {
    for (auto v : px) {
      out.push_back(static_cast<std::uint8_t>(v >> 8));
      out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const FafImage& img) {
  const int depth = img.max_value() <= 255 ? 8 : 16;
  std::vector<std::uint8_t> raster;
  raster.reserve(img.pixels().size() * (depth / 8));
  for (auto v : img.pixels()) {
    if (depth == 16) raster.push_back(static_cast<std::uint8_t>(v >> 8));
    raster.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return write_png(img.width(), img.height(), depth, raster);
}

std::vector<std::uint8_t> render_display_png(const FafImage& img) {
  std::vector<std::uint8_t> raster;
  raster.reserve(img.pixels().size());
  const unsigned max = img.max_value();
  for (auto v : img.pixels()) raster.push_back(static_cast<std::uint8_t>((v * 255u + max / 2) / max));
  return write_png(img.width(), img.height(), 8, raster);
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace faf
