#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"
#include "wlsurf/wordlen.hpp"

namespace wlsurf {

/// Integral image whose entries are residues modulo 2^word_bits. Entries live
/// in the smallest standard unsigned container that holds word_bits bits and
/// are masked to word_bits after every arithmetic step, emulating a fixed
/// width hardware word.
class ReducedIntegralImage {
public:
  ReducedIntegralImage(int width, int height, int word_bits)
      : width_(width), height_(height), word_bits_(word_bits),
        reads_(std::make_unique<std::atomic<std::uint64_t>>(0)) {
    if (word_bits < 1 || word_bits > 64)
      raise(errc::config_error, "integral word length must be in [1,64]");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    switch (wlsurf::container_bits(word_bits)) {
      case 8: values_ = std::vector<std::uint8_t>(n); break;
      case 16: values_ = std::vector<std::uint16_t>(n); break;
      case 32: values_ = std::vector<std::uint32_t>(n); break;
      default: values_ = std::vector<std::uint64_t>(n); break;
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int word_bits() const { return word_bits_; }
  int container_bits() const { return wlsurf::container_bits(word_bits_); }

  /// All-ones mask of word_bits bits.
  std::uint64_t mask() const {
    return word_bits_ == 64 ? ~std::uint64_t{0}
                            : (std::uint64_t{1} << word_bits_) - 1;
  }

  /// Residue at (x, y). Counts as one stored-entry access.
  std::uint64_t entry(int x, int y) const {
    reads_->fetch_add(1, std::memory_order_relaxed);
    const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
    return std::visit([i](const auto& v) -> std::uint64_t { return v[i]; },
                      values_);
  }

  /// Eq-2 border convention: indices at -1 contribute zero and do not touch
  /// any stored entry.
  std::uint64_t entry_or_zero(int x, int y) const {
    return (x < 0 || y < 0) ? 0 : entry(x, y);
  }

  void store(int x, int y, std::uint64_t value) {
    const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
    std::visit([i, value](auto& v) {
      v[i] = static_cast<typename std::decay_t<decltype(v)>::value_type>(value);
    }, values_);
  }

  /// Number of stored entries read since construction or the last reset.
  /// Backs the four-lookups-per-box-sum check in the tests.
  std::uint64_t read_count() const {
    return reads_->load(std::memory_order_relaxed);
  }
  void reset_read_count() const { reads_->store(0, std::memory_order_relaxed); }

private:
  int width_;
  int height_;
  int word_bits_;
  std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>,
               std::vector<std::uint32_t>, std::vector<std::uint64_t>>
      values_;
  mutable std::unique_ptr<std::atomic<std::uint64_t>> reads_;
};

/// Single raster pass of the summed-area recurrence
///   ii(x,y) = i(x,y) + ii(x-1,y) + ii(x,y-1) - ii(x-1,y-1)
/// with every addition and subtraction reduced mod 2^word_bits.
inline ReducedIntegralImage build_integral(const GrayImage& img, int word_bits) {
  if (word_bits < img.bits_per_pixel())
    raise(errc::config_error,
          "integral word length " + std::to_string(word_bits) +
              " cannot represent a single " +
              std::to_string(img.bits_per_pixel()) + "-bit pixel");
  ReducedIntegralImage ii(img.width(), img.height(), word_bits);
  const std::uint64_t mask = ii.mask();
  std::vector<std::uint64_t> prev_row(static_cast<std::size_t>(img.width()), 0);
  for (int y = 0; y < img.height(); ++y) {
    std::uint64_t left = 0;
    std::uint64_t corner = 0;
    for (int x = 0; x < img.width(); ++x) {
      const std::uint64_t above = prev_row[x];
      std::uint64_t v = (img.at(x, y) + left) & mask;
      v = (v + above) & mask;
      v = (v - corner) & mask;
      ii.store(x, y, v);
      left = v;
      corner = above;
      prev_row[x] = v;
    }
  }
  return ii;
}

/// Box sum over an inclusive rect via four lookups (Eq-2 form), reduced mod
/// 2^word_bits. Equals the true pixel sum whenever that sum fits word_bits.
inline std::uint64_t box_sum(const ReducedIntegralImage& ii, const Rect& r) {
  if (!rect_inside(r, ii.width(), ii.height()))
    raise(errc::bounds_error, "box_sum: rect outside the image");
  const std::uint64_t br = ii.entry(r.x1, r.y1);
  const std::uint64_t top = ii.entry_or_zero(r.x1, r.y0 - 1);
  const std::uint64_t left = ii.entry_or_zero(r.x0 - 1, r.y1);
  const std::uint64_t corner = ii.entry_or_zero(r.x0 - 1, r.y0 - 1);
  return (br - top - left + corner) & ii.mask();
}

struct CheckedBoxSum {
  std::uint64_t value = 0;     // residue from the reduced integral image
  std::uint64_t true_sum = 0;  // unbounded-arithmetic pixel sum
  bool overflowed = false;     // true_sum does not fit the reduced word
};

/// Full-precision shadow of a reduced integral image, built once per source
/// image. Flags box sums whose true value exceeds the reduced capacity.
class ShadowChecker {
public:
  ShadowChecker(const GrayImage& img, const ReducedIntegralImage& ii)
      : width_(img.width()), height_(img.height()), word_mask_(ii.mask()),
        shadow_(static_cast<std::size_t>(img.width()) * img.height()) {
    if (img.width() != ii.width() || img.height() != ii.height())
      raise(errc::validation_error,
            "shadow checker: image and integral dimensions differ");
    for (int y = 0; y < height_; ++y) {
      std::uint64_t row = 0;
      for (int x = 0; x < width_; ++x) {
        row += img.at(x, y);
        const std::uint64_t above =
            y > 0 ? shadow_[static_cast<std::size_t>(y - 1) * width_ + x] : 0;
        shadow_[static_cast<std::size_t>(y) * width_ + x] = row + above;
      }
    }
  }

  CheckedBoxSum check(const ReducedIntegralImage& ii, const Rect& r) const {
    if (ii.width() != width_ || ii.height() != height_ || ii.mask() != word_mask_)
      raise(errc::validation_error,
            "shadow checker: reduced integral image does not match");
    CheckedBoxSum out;
    out.value = box_sum(ii, r);
    out.true_sum = at(r.x1, r.y1) - at(r.x1, r.y0 - 1) - at(r.x0 - 1, r.y1) +
                   at(r.x0 - 1, r.y0 - 1);
    out.overflowed = out.true_sum > word_mask_;
    if (!out.overflowed && out.value != out.true_sum)
      raise(errc::validation_error,
            "shadow checker: in-capacity box sum disagrees with the shadow; "
            "integral image was not built from this image");
    return out;
  }

private:
  std::uint64_t at(int x, int y) const {
    return (x < 0 || y < 0) ? 0
                            : shadow_[static_cast<std::size_t>(y) * width_ + x];
  }

  int width_;
  int height_;
  std::uint64_t word_mask_;
  std::vector<std::uint64_t> shadow_;
};

/// One-shot convenience wrapper; builds the shadow on every call.
inline CheckedBoxSum box_sum_checked(const GrayImage& img,
                                     const ReducedIntegralImage& ii,
                                     const Rect& r) {
  return ShadowChecker(img, ii).check(ii, r);
}

/// Debug dump: one CSV row per raster row, decimal residues.
inline std::string integral_to_csv(const ReducedIntegralImage& ii) {
  std::string out;
  for (int y = 0; y < ii.height(); ++y) {
    for (int x = 0; x < ii.width(); ++x) {
      if (x) out += ',';
      out += std::to_string(ii.entry(x, y));
    }
    out += '\n';
  }
  return out;
}

}  // namespace wlsurf
