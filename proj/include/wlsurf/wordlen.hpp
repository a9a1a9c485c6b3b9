#pragma once

#include <bit>
#include <cstdint>

#include "wlsurf/error.hpp"

namespace wlsurf {

/// Largest value an integral image entry can take: (2^L_i - 1) * W * H.
inline std::uint64_t worst_case_integral_value(std::int64_t width,
                                               std::int64_t height,
                                               int bits_per_pixel) {
  if (width < 1 || height < 1 || bits_per_pixel < 1 || bits_per_pixel > 62)
    raise(errc::config_error, "worst_case_integral_value: invalid arguments");
  const unsigned __int128 v = (unsigned __int128)((std::uint64_t{1} << bits_per_pixel) - 1) *
                              (unsigned __int128)width * (unsigned __int128)height;
  if (v > ~std::uint64_t{0})
    raise(errc::config_error, "worst_case_integral_value: value exceeds 64 bits");
  return static_cast<std::uint64_t>(v);
}

/// Smallest L with 2^L - 1 >= v. Returns 1 for v = 0.
inline int bits_for_value(std::uint64_t v) {
  return v == 0 ? 1 : std::bit_width(v);
}

/// Word length under the known-maximum-box-filter bound: every rectangle the
/// detector evaluates fits inside max_w x max_h, so the stored residues
/// recover box sums exactly at this width.
inline int bits_exact(std::int64_t max_w, std::int64_t max_h, int bits_per_pixel) {
  return bits_for_value(worst_case_integral_value(max_w, max_h, bits_per_pixel));
}

/// Tightened bound assuming 96% of box pixels at the maximum pixel value and
/// 4% at half maximum. Evaluated in scaled integers (x100) so the boundary
/// cases are deterministic.
inline int bits_modified_exact(std::int64_t max_w, std::int64_t max_h,
                               int bits_per_pixel) {
  if (max_w < 1 || max_h < 1)
    raise(errc::config_error, "bits_modified_exact: invalid filter dimensions");
  if (bits_per_pixel < 2 || bits_per_pixel > 62)
    raise(errc::config_error, "bits_modified_exact: bits per pixel must be in [2,62]");
  const std::uint64_t full = (std::uint64_t{1} << bits_per_pixel) - 1;
  const std::uint64_t half = (std::uint64_t{1} << (bits_per_pixel - 1)) - 1;
  const unsigned __int128 area = (unsigned __int128)max_w * (unsigned __int128)max_h;
  const unsigned __int128 need = area * (96 * (unsigned __int128)full +
                                         4 * (unsigned __int128)half);
  for (int bits = 1; bits <= 64; ++bits) {
    const unsigned __int128 capacity =
        100 * (((unsigned __int128)1 << bits) - 1);
    if (capacity >= need) return bits;
  }
  raise(errc::config_error, "bits_modified_exact: bound exceeds 64 bits");
}

/// Packed-bit footprint of a W x H raster at L bits per entry, in bits.
/// Divide by 8 for bytes; the quotient may be fractional.
inline std::uint64_t memory_bits(std::int64_t width, std::int64_t height, int bits) {
  if (width < 1 || height < 1 || bits < 1)
    raise(errc::config_error, "memory_bits: invalid arguments");
  return static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height) *
         static_cast<std::uint64_t>(bits);
}

/// Packed footprint in bytes. Exact: the denominator is a power of two, so
/// the double holds the rational value with no rounding.
inline double memory_bytes(std::int64_t width, std::int64_t height, int bits) {
  return static_cast<double>(memory_bits(width, height, bits)) / 8.0;
}

inline double memory_kb(std::int64_t width, std::int64_t height, int bits) {
  return static_cast<double>(memory_bits(width, height, bits)) / 8192.0;
}

/// Width of the smallest standard unsigned container holding `bits` bits.
inline int container_bits(int bits) {
  if (bits <= 8) return 8;
  if (bits <= 16) return 16;
  if (bits <= 32) return 32;
  return 64;
}

}  // namespace wlsurf
