#pragma once

#include <cstdint>
#include <string>

#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"
#include "wlsurf/wordlen.hpp"

namespace wlsurf {

enum class Method { Full, Exact, ModifiedExact, Approximate, EvenImage };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::Exact: return "exact";
    case Method::ModifiedExact: return "modified-exact";
    case Method::Approximate: return "approximate";
    case Method::EvenImage: return "even";
  }
  return "?";
}

/// A reduction method with its derived storage word length and the shifts
/// applied around the integral image.
struct WordLengthPlan {
  Method method = Method::Full;
  int word_bits = 0;        // bits per stored integral image entry
  int pre_shift = 0;        // bits shifted out of each pixel before integration
  int post_shift = 0;       // left shift applied to recovered box sums
  int effective_bits_per_pixel = 8;  // pixel depth fed to the integral image
};

struct ReductionConfig {
  Method method = Method::Full;
  int shift = 0;  // p; meaningful for Approximate and EvenImage only
  // Largest box the detector will ever evaluate. The 195x195 Hessian filter
  // decomposes into 129x65 (or 65x129) boxes, which bounds all four octaves.
  int max_filter_w = 129;
  int max_filter_h = 65;
};

/// Clears the least significant bit of every odd pixel (downward, so 8-bit
/// stays 8-bit), then shifts every pixel right by `shift` bits. A nonzero
/// result can be restored exactly with the matching left shift.
inline GrayImage even_preprocess(const GrayImage& img, int shift) {
  if (shift < 1 || shift > img.bits_per_pixel() - 1)
    raise(errc::config_error, "even_preprocess: shift must be in [1, bits_per_pixel-1]");
  std::vector<std::uint8_t> out;
  out.reserve(img.pixels().size());
  for (std::uint8_t v : img.pixels())
    out.push_back(static_cast<std::uint8_t>((v & ~1u) >> shift));
  return GrayImage(img.width(), img.height(), std::move(out),
                   img.bits_per_pixel() - shift);
}

/// Raster-order error-diffusion quantizer: the remainder of each right shift
/// is carried into the next pixel, so total brightness is conserved up to the
/// final carry, which is discarded at the end of the image only.
inline GrayImage approximate_preprocess(const GrayImage& img, int shift) {
  if (shift < 1 || shift > img.bits_per_pixel() - 1)
    raise(errc::config_error,
          "approximate_preprocess: shift must be in [1, bits_per_pixel-1]");
  const unsigned out_max = (1u << (img.bits_per_pixel() - shift)) - 1;
  std::vector<std::uint8_t> out;
  out.reserve(img.pixels().size());
  unsigned carry = 0;
  for (std::uint8_t v : img.pixels()) {
    const unsigned t = v + carry;
    unsigned q = t >> shift;
    // A saturated pixel plus carry can quantize one step above the output
    // range; hold the excess in the carry instead so the depth invariant and
    // the brightness balance both survive.
    if (q > out_max) q = out_max;
    carry = t - (q << shift);
    out.push_back(static_cast<std::uint8_t>(q));
  }
  return GrayImage(img.width(), img.height(), std::move(out),
                   img.bits_per_pixel() - shift);
}

struct PlannedImage {
  WordLengthPlan plan;
  GrayImage prepared;
};

/// Derives the storage word length for the requested method and produces the
/// preprocessed image the integral image must be built from.
inline PlannedImage plan(const GrayImage& img, const ReductionConfig& cfg) {
  if (cfg.max_filter_w < 1 || cfg.max_filter_h < 1)
    raise(errc::config_error, "plan: max filter dimensions must be positive");
  const bool shifting =
      cfg.method == Method::Approximate || cfg.method == Method::EvenImage;
  if (shifting && (cfg.shift < 1 || cfg.shift >= img.bits_per_pixel()))
    raise(errc::config_error,
          "plan: shift must be in [1, bits_per_pixel-1] for this method");
  if (!shifting && cfg.shift != 0)
    raise(errc::config_error, "plan: shift is only meaningful for the "
                              "approximate and even methods");
  // The smallest scale-space filter is 9x9 and needs three samples of head
  // room, matching the detector's schedule rule.
  if (img.width() < 12 || img.height() < 12)
    raise(errc::schedule_error,
          "plan: image too small for any scale-space layer (needs >= 12x12)");

  const int depth = img.bits_per_pixel();
  WordLengthPlan p;
  p.method = cfg.method;
  switch (cfg.method) {
    case Method::Full:
      p.word_bits = bits_for_value(
          worst_case_integral_value(img.width(), img.height(), depth));
      p.effective_bits_per_pixel = depth;
      return {p, img};
    case Method::Exact:
      p.word_bits = bits_exact(cfg.max_filter_w, cfg.max_filter_h, depth);
      p.effective_bits_per_pixel = depth;
      return {p, img};
    case Method::ModifiedExact:
      p.word_bits = bits_modified_exact(cfg.max_filter_w, cfg.max_filter_h, depth);
      p.effective_bits_per_pixel = depth;
      return {p, img};
    case Method::Approximate:
      p.word_bits = bits_exact(cfg.max_filter_w, cfg.max_filter_h, depth - cfg.shift);
      p.pre_shift = cfg.shift;
      p.post_shift = 0;  // error already diffused; sums stay at reduced scale
      p.effective_bits_per_pixel = depth - cfg.shift;
      return {p, approximate_preprocess(img, cfg.shift)};
    case Method::EvenImage:
      p.word_bits =
          bits_modified_exact(cfg.max_filter_w, cfg.max_filter_h, depth - cfg.shift);
      p.pre_shift = cfg.shift;
      p.post_shift = cfg.shift;
      p.effective_bits_per_pixel = depth - cfg.shift;
      return {p, even_preprocess(img, cfg.shift)};
  }
  raise(errc::config_error, "plan: unknown method");
}

/// Maps a raw box-sum residue back to pixel scale: the even-image method
/// undoes its pre-shift, every other method passes the value through.
inline std::uint64_t recover_box_value(std::uint64_t raw,
                                       const WordLengthPlan& plan) {
  return plan.post_shift ? raw << plan.post_shift : raw;
}

}  // namespace wlsurf
