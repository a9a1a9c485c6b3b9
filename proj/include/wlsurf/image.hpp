#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wlsurf/error.hpp"

namespace wlsurf {

/// 8-bit-or-less grayscale raster, row major. Immutable after construction;
/// safe to share across threads.
class GrayImage {
public:
  GrayImage(int width, int height, int bits_per_pixel = 8)
      : width_(width), height_(height), bits_per_pixel_(bits_per_pixel),
        pixels_(check_dims(width, height, bits_per_pixel)) {}

  GrayImage(int width, int height, std::vector<std::uint8_t> pixels,
            int bits_per_pixel = 8)
      : width_(width), height_(height), bits_per_pixel_(bits_per_pixel),
        pixels_(std::move(pixels)) {
    check_dims(width, height, bits_per_pixel);
    if (pixels_.size() != static_cast<std::size_t>(width_) * height_)
      raise(errc::config_error, "pixel array length does not match width*height");
    const int max = max_value();
    for (std::uint8_t v : pixels_)
      if (v > max)
        raise(errc::config_error,
              "pixel value " + std::to_string(v) + " exceeds 2^" +
                  std::to_string(bits_per_pixel_) + "-1");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int bits_per_pixel() const { return bits_per_pixel_; }
  int max_value() const { return (1 << bits_per_pixel_) - 1; }

  std::uint8_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }

  bool operator==(const GrayImage& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           bits_per_pixel_ == other.bits_per_pixel_ && pixels_ == other.pixels_;
  }

private:
  static std::size_t check_dims(int width, int height, int bits_per_pixel) {
    if (width < 1 || height < 1)
      raise(errc::config_error, "image dimensions must be positive");
    if (bits_per_pixel < 1 || bits_per_pixel > 8)
      raise(errc::unsupported_depth, "bits per pixel must be in [1,8]");
    return static_cast<std::size_t>(width) * height;
  }

  int width_;
  int height_;
  int bits_per_pixel_;
  std::vector<std::uint8_t> pixels_;
};

/// Axis-aligned pixel rectangle, inclusive corners.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }

  bool operator==(const Rect&) const = default;
};

inline bool rect_inside(const Rect& r, int width, int height) {
  return 0 <= r.x0 && r.x0 <= r.x1 && r.x1 < width &&
         0 <= r.y0 && r.y0 <= r.y1 && r.y1 < height;
}

// ---------------------------------------------------------------------------
// PGM (Netpbm P5/P2) reader and writer, maxval <= 255.

namespace detail {

class PnmTokenizer {
public:
  explicit PnmTokenizer(std::span<const std::uint8_t> bytes)
      : bytes_(bytes) {}

  // Reads the next whitespace-delimited token, skipping '#' comment lines.
  std::string next_token(const char* field) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size())
      raise(errc::parse_error,
            std::string("pgm: missing ") + field + " field in header");
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]))
      tok.push_back(static_cast<char>(bytes_[pos_++]));
    return tok;
  }

  int next_int(const char* field, int min, int max) {
    const std::string tok = next_token(field);
    int value = 0;
    for (char c : tok) {
      if (c < '0' || c > '9')
        raise(errc::parse_error,
              std::string("pgm: ") + field + " field is not a number: '" + tok + "'");
      value = value * 10 + (c - '0');
      if (value > max)
        raise(errc::parse_error, std::string("pgm: ") + field +
                                     " field out of range: '" + tok + "'");
    }
    if (value < min)
      raise(errc::parse_error, std::string("pgm: ") + field +
                                   " field out of range: '" + tok + "'");
    return value;
  }

  // P5 payload starts after exactly one whitespace byte following maxval.
  std::span<const std::uint8_t> binary_rest() {
    if (pos_ < bytes_.size()) ++pos_;
    return bytes_.subspan(pos_);
  }

private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a binary ("P5") or ASCII ("P2") PGM with maxval <= 255.
inline GrayImage read_pgm(std::span<const std::uint8_t> bytes) {
  detail::PnmTokenizer tok(bytes);
  const std::string magic = tok.next_token("magic");
  if (magic != "P5" && magic != "P2")
    raise(errc::parse_error, "pgm: magic field is '" + magic + "', expected P5 or P2");
  const int width = tok.next_int("width", 1, 1 << 24);
  const int height = tok.next_int("height", 1, 1 << 24);
  const int maxval = tok.next_int("maxval", 1, 65535);
  if (maxval > 255)
    raise(errc::parse_error,
          "pgm: maxval field is " + std::to_string(maxval) + ", only <= 255 supported");

  const std::size_t count = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(count);
  if (magic == "P5") {
    const auto payload = tok.binary_rest();
    if (payload.size() < count)
      raise(errc::parse_error,
            "pgm: payload truncated, expected " + std::to_string(count) +
                " bytes, got " + std::to_string(payload.size()));
    pixels.assign(payload.begin(), payload.begin() + count);
  } else {
    for (std::size_t i = 0; i < count; ++i)
      pixels.push_back(static_cast<std::uint8_t>(tok.next_int("payload", 0, 255)));
  }
  for (std::uint8_t v : pixels)
    if (v > maxval)
      raise(errc::parse_error, "pgm: payload value " + std::to_string(v) +
                                   " exceeds maxval " + std::to_string(maxval));
  return GrayImage(width, height, std::move(pixels), 8);
}

/// Emits binary P5 with maxval 255. Requires bits_per_pixel <= 8.
inline std::vector<std::uint8_t> write_pgm(const GrayImage& img) {
  if (img.bits_per_pixel() > 8)
    raise(errc::unsupported_depth, "pgm: cannot write depth > 8 bits");
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    raise(errc::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return read_pgm(bytes);
}

inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  const auto bytes = write_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    raise(errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace wlsurf
