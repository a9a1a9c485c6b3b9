#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"
#include "wlsurf/integral.hpp"
#include "wlsurf/reduction.hpp"

namespace wlsurf {

/// One scale-space layer: a square Hessian filter of odd side filter_size,
/// sampled every `stride` pixels. SURF scales the filter, not the image.
struct ScaleEntry {
  int octave = 1;       // 1-based
  int filter_size = 9;  // odd, filter_size % 6 == 3
  double sigma = 1.2;   // 1.2 * filter_size / 9
  int stride = 1;       // 2^(octave-1)
};

struct WeightedRect {
  Rect rect;       // offsets relative to the filter center, inclusive
  int weight = 1;  // +1, -2 or -1
};

struct HessianLayout {
  std::vector<WeightedRect> dxx;
  std::vector<WeightedRect> dyy;
  std::vector<WeightedRect> dxy;
};

/// Grid of Hessian-determinant responses for one scale. Samples where the
/// filter would overhang the border are absent; sample (ix, iy) sits at pixel
/// (margin + ix*stride, margin + iy*stride).
struct ResponseMap {
  ScaleEntry entry;
  int margin = 0;
  int grid_w = 0;
  int grid_h = 0;
  std::vector<double> responses;

  double at(int ix, int iy) const {
    return responses[static_cast<std::size_t>(iy) * grid_w + ix];
  }
  int pixel_x(int ix) const { return margin + ix * entry.stride; }
  int pixel_y(int iy) const { return margin + iy * entry.stride; }
};

struct InterestPoint {
  double x = 0;         // sub-pixel column
  double y = 0;         // sub-pixel row
  double scale = 0;     // interpolated sigma
  double response = 0;  // Hessian determinant at the detected sample
};

/// NMS survivor, indexed in its middle response map.
struct Candidate {
  int ix = 0;
  int iy = 0;
  double response = 0;
};

struct DetectStats {
  std::uint64_t candidates = 0;
  std::uint64_t rejected_offset = 0;    // interpolation moved > 0.5 sample
  std::uint64_t rejected_singular = 0;  // near-singular interpolation system
};

// ---------------------------------------------------------------------------

/// Four-octave filter ladder. Sizes that would overhang the image (no room
/// for the filter plus three samples) are dropped; an octave that can no
/// longer form an NMS triple (fewer than 3 surviving sizes) is dropped whole.
inline std::vector<ScaleEntry> filter_schedule(int octaves, int width, int height) {
  if (octaves < 1 || octaves > 4)
    raise(errc::config_error, "filter_schedule: octaves must be in [1,4]");
  static constexpr int ladder[4][4] = {
      {9, 15, 21, 27}, {15, 27, 39, 51}, {27, 51, 75, 99}, {51, 99, 147, 195}};
  const int limit = std::min(width, height) - 3;
  std::vector<ScaleEntry> schedule;
  for (int o = 1; o <= octaves; ++o) {
    std::vector<ScaleEntry> octave_entries;
    for (int s : ladder[o - 1]) {
      if (s > limit) break;  // sizes increase, the rest overhang too
      octave_entries.push_back(ScaleEntry{o, s, 1.2 * s / 9.0, 1 << (o - 1)});
    }
    if (octave_entries.size() >= 3)
      schedule.insert(schedule.end(), octave_entries.begin(), octave_entries.end());
  }
  if (schedule.empty())
    raise(errc::schedule_error,
          "filter_schedule: image too small for any octave");
  return schedule;
}

/// Box-filter decomposition of the second-order Gaussian derivatives for a
/// square filter of the given size (lobe = size/3):
///   dxx: three side-by-side lobes, each lobe wide and 2*lobe-1 tall,
///        weights +1, -2, +1; dyy is its transpose;
///   dxy: four lobe x lobe quadrants around a one-pixel central cross gap,
///        weights +1, -1, -1, +1.
/// For size 195 the dxx lobes are 65 x 129, the largest boxes ever summed.
inline HessianLayout hessian_layout(int filter_size) {
  if (filter_size < 9 || filter_size % 6 != 3)
    raise(errc::layout_error,
          "hessian_layout: filter size must be odd and divisible by 3 "
          "with an odd lobe (size % 6 == 3)");
  const int lobe = filter_size / 3;
  const int half = filter_size / 2;
  const int k = (lobe - 1) / 2;

  HessianLayout out;
  // x-direction: lobes span the full filter width, 2*lobe-1 rows tall.
  out.dxx = {
      {Rect{-half, -(lobe - 1), -half + lobe - 1, lobe - 1}, +1},
      {Rect{-k, -(lobe - 1), k, lobe - 1}, -2},
      {Rect{half - lobe + 1, -(lobe - 1), half, lobe - 1}, +1},
  };
  for (const auto& wr : out.dxx)
    out.dyy.push_back({Rect{wr.rect.y0, wr.rect.x0, wr.rect.y1, wr.rect.x1},
                       wr.weight});
  out.dxy = {
      {Rect{-lobe, -lobe, -1, -1}, +1},
      {Rect{1, -lobe, lobe, -1}, -1},
      {Rect{-lobe, 1, -1, lobe}, -1},
      {Rect{1, 1, lobe, lobe}, +1},
  };
  return out;
}

namespace detail {

inline double weighted_box_sum(const ReducedIntegralImage& ii,
                               const WordLengthPlan& plan,
                               std::span<const WeightedRect> rects,
                               int cx, int cy) {
  double acc = 0.0;
  for (const auto& wr : rects) {
    const Rect abs{cx + wr.rect.x0, cy + wr.rect.y0,
                   cx + wr.rect.x1, cy + wr.rect.y1};
    acc += wr.weight *
           static_cast<double>(recover_box_value(box_sum(ii, abs), plan));
  }
  return acc;
}

}  // namespace detail

/// Hessian-determinant response grid for one scale. Each of Dxx, Dyy, Dxy is
/// normalized by the filter area relative to the 9x9 base filter, which keeps
/// responses comparable across scales under one fixed threshold.
inline ResponseMap response_map(const ReducedIntegralImage& ii,
                                const WordLengthPlan& plan,
                                const ScaleEntry& entry) {
  if (ii.word_bits() != plan.word_bits)
    raise(errc::validation_error,
          "response_map: integral image word length does not match the plan");
  const int size = entry.filter_size;
  const HessianLayout layout = hessian_layout(size);

  ResponseMap map;
  map.entry = entry;
  map.margin = (size + 1) / 2;
  map.grid_w = std::max(0, (ii.width() - 2 * map.margin) / entry.stride);
  map.grid_h = std::max(0, (ii.height() - 2 * map.margin) / entry.stride);
  map.responses.resize(static_cast<std::size_t>(map.grid_w) * map.grid_h);

  const double norm = 81.0 / (static_cast<double>(size) * size);
  std::size_t i = 0;
  for (int iy = 0; iy < map.grid_h; ++iy) {
    const int py = map.pixel_y(iy);
    for (int ix = 0; ix < map.grid_w; ++ix, ++i) {
      const int px = map.pixel_x(ix);
      const double dxx = norm * detail::weighted_box_sum(ii, plan, layout.dxx, px, py);
      const double dyy = norm * detail::weighted_box_sum(ii, plan, layout.dyy, px, py);
      const double dxy = norm * detail::weighted_box_sum(ii, plan, layout.dxy, px, py);
      map.responses[i] = dxx * dyy - (0.9 * dxy) * (0.9 * dxy);
    }
  }
  return map;
}

namespace detail {

/// Index offset translating middle-map sample indices into another map of the
/// same stride. Margins within an octave differ by multiples of the stride.
inline int index_shift(const ResponseMap& mid, const ResponseMap& other) {
  const int diff = mid.margin - other.margin;
  if (diff % mid.entry.stride != 0)
    raise(errc::validation_error,
          "nms_3d: response maps are not co-located on a shared lattice");
  return diff / mid.entry.stride;
}

}  // namespace detail

/// 3-D non-maximum suppression over three consecutive response maps of one
/// octave. The middle map is the candidate layer; a sample survives only if
/// its response exceeds the threshold and is strictly greater than all 26
/// neighbors in the 3x3x3 (x, y, scale) neighborhood. Ties suppress.
inline std::vector<Candidate> nms_3d(std::span<const ResponseMap> maps,
                                     double threshold) {
  if (maps.size() != 3)
    raise(errc::arity_error, "nms_3d: exactly three response maps required");
  const ResponseMap& mid = maps[1];
  if (maps[0].entry.stride != mid.entry.stride ||
      maps[2].entry.stride != mid.entry.stride)
    raise(errc::validation_error, "nms_3d: maps must share a stride");
  const int shift0 = detail::index_shift(mid, maps[0]);
  const int shift2 = detail::index_shift(mid, maps[2]);

  std::vector<Candidate> out;
  for (int iy = 0; iy < mid.grid_h; ++iy) {
    for (int ix = 0; ix < mid.grid_w; ++ix) {
      const double r = mid.at(ix, iy);
      if (!(r > threshold)) continue;

      // The whole 3x3x3 block must exist in every layer.
      const bool inside =
          ix - 1 >= 0 && ix + 1 < mid.grid_w && iy - 1 >= 0 && iy + 1 < mid.grid_h &&
          ix + shift0 - 1 >= 0 && ix + shift0 + 1 < maps[0].grid_w &&
          iy + shift0 - 1 >= 0 && iy + shift0 + 1 < maps[0].grid_h &&
          ix + shift2 - 1 >= 0 && ix + shift2 + 1 < maps[2].grid_w &&
          iy + shift2 - 1 >= 0 && iy + shift2 + 1 < maps[2].grid_h;
      if (!inside) continue;

      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1 && is_max; ++dx) {
          if (!(r > maps[0].at(ix + shift0 + dx, iy + shift0 + dy))) is_max = false;
          if ((dx || dy) && !(r > mid.at(ix + dx, iy + dy))) is_max = false;
          if (!(r > maps[2].at(ix + shift2 + dx, iy + shift2 + dy))) is_max = false;
        }
      if (is_max) out.push_back(Candidate{ix, iy, r});
    }
  }
  return out;
}

namespace detail {

// Solves the symmetric 3x3 system H * delta = rhs by the adjugate. Returns
// false when |det H| < 1e-12.
inline bool solve_symmetric3(double a, double b, double c, double d, double e,
                             double f, const std::array<double, 3>& rhs,
                             std::array<double, 3>& delta) {
  const double det = a * (d * f - e * e) - b * (b * f - c * e) +
                     c * (b * e - c * d);
  if (std::abs(det) < 1e-12) return false;
  const double i00 = d * f - e * e, i01 = c * e - b * f, i02 = b * e - c * d;
  const double i11 = a * f - c * c, i12 = b * c - a * e, i22 = a * d - b * b;
  delta[0] = (rhs[0] * i00 + rhs[1] * i01 + rhs[2] * i02) / det;
  delta[1] = (rhs[0] * i01 + rhs[1] * i11 + rhs[2] * i12) / det;
  delta[2] = (rhs[0] * i02 + rhs[1] * i12 + rhs[2] * i22) / det;
  return true;
}

}  // namespace detail

/// Fits a 3-D quadratic through the candidate's 3x3x3 neighborhood by central
/// finite differences and moves the point to the fitted vertex. Rejects
/// candidates whose offset leaves the sample cell (> 0.5 in any axis) or
/// whose system is numerically singular.
inline std::optional<InterestPoint> interpolate(std::span<const ResponseMap> maps,
                                                const Candidate& cand,
                                                DetectStats* stats = nullptr) {
  if (maps.size() != 3)
    raise(errc::arity_error, "interpolate: exactly three response maps required");
  const ResponseMap& mid = maps[1];
  const int shift0 = detail::index_shift(mid, maps[0]);
  const int shift2 = detail::index_shift(mid, maps[2]);

  double n[3][3][3];
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      n[0][dy + 1][dx + 1] = maps[0].at(cand.ix + shift0 + dx, cand.iy + shift0 + dy);
      n[1][dy + 1][dx + 1] = mid.at(cand.ix + dx, cand.iy + dy);
      n[2][dy + 1][dx + 1] = maps[2].at(cand.ix + shift2 + dx, cand.iy + shift2 + dy);
    }

  const double center = n[1][1][1];
  const double gx = (n[1][1][2] - n[1][1][0]) / 2.0;
  const double gy = (n[1][2][1] - n[1][0][1]) / 2.0;
  const double gs = (n[2][1][1] - n[0][1][1]) / 2.0;
  const double hxx = n[1][1][2] - 2.0 * center + n[1][1][0];
  const double hyy = n[1][2][1] - 2.0 * center + n[1][0][1];
  const double hss = n[2][1][1] - 2.0 * center + n[0][1][1];
  const double hxy = (n[1][2][2] - n[1][2][0] - n[1][0][2] + n[1][0][0]) / 4.0;
  const double hxs = (n[2][1][2] - n[2][1][0] - n[0][1][2] + n[0][1][0]) / 4.0;
  const double hys = (n[2][2][1] - n[2][0][1] - n[0][2][1] + n[0][0][1]) / 4.0;

  std::array<double, 3> delta{};
  if (!detail::solve_symmetric3(hxx, hxy, hxs, hyy, hys, hss,
                                {-gx, -gy, -gs}, delta)) {
    if (stats) ++stats->rejected_singular;
    return std::nullopt;
  }
  if (std::abs(delta[0]) > 0.5 || std::abs(delta[1]) > 0.5 ||
      std::abs(delta[2]) > 0.5) {
    if (stats) ++stats->rejected_offset;
    return std::nullopt;
  }

  InterestPoint p;
  p.x = mid.pixel_x(cand.ix) + delta[0] * mid.entry.stride;
  p.y = mid.pixel_y(cand.iy) + delta[1] * mid.entry.stride;
  p.scale = mid.entry.sigma +
            delta[2] * (maps[2].entry.sigma - maps[0].entry.sigma) / 2.0;
  p.response = cand.response;
  return p;
}

// ---------------------------------------------------------------------------

inline void sort_points(std::vector<InterestPoint>& points) {
  std::sort(points.begin(), points.end(),
            [](const InterestPoint& a, const InterestPoint& b) {
              if (a.response != b.response) return a.response > b.response;
              if (a.y != b.y) return a.y < b.y;
              if (a.x != b.x) return a.x < b.x;
              return a.scale < b.scale;
            });
}

/// Full pipeline on an already planned image: integral image at the plan's
/// word length, response maps for every scheduled scale, 3-D NMS over each
/// consecutive triple within an octave, then quadratic interpolation.
/// Output is sorted by descending response, ties by (y, x, scale) ascending.
inline std::vector<InterestPoint> detect_planned(const GrayImage& prepared,
                                                 const WordLengthPlan& plan,
                                                 double threshold = 50000.0,
                                                 int octaves = 4,
                                                 DetectStats* stats = nullptr) {
  const auto schedule =
      filter_schedule(octaves, prepared.width(), prepared.height());
  const ReducedIntegralImage ii = build_integral(prepared, plan.word_bits);

  std::vector<ResponseMap> maps;
  maps.reserve(schedule.size());
  for (const auto& entry : schedule) maps.push_back(response_map(ii, plan, entry));

  std::vector<InterestPoint> points;
  std::size_t begin = 0;
  while (begin < maps.size()) {
    std::size_t end = begin + 1;
    while (end < maps.size() && maps[end].entry.octave == maps[begin].entry.octave)
      ++end;
    for (std::size_t m = begin + 1; m + 1 < end; ++m) {
      const std::span<const ResponseMap> triple{&maps[m - 1], 3};
      for (const Candidate& cand : nms_3d(triple, threshold)) {
        if (stats) ++stats->candidates;
        if (auto p = interpolate(triple, cand, stats)) points.push_back(*p);
      }
    }
    begin = end;
  }
  sort_points(points);
  return points;
}

/// Plan, preprocess and detect in one call.
inline std::vector<InterestPoint> detect(const GrayImage& img,
                                         const ReductionConfig& cfg,
                                         double threshold = 50000.0,
                                         int octaves = 4,
                                         DetectStats* stats = nullptr) {
  const PlannedImage planned = plan(img, cfg);
  return detect_planned(planned.prepared, planned.plan, threshold, octaves, stats);
}

// ---------------------------------------------------------------------------
// Interest point serialization: "x y scale response", 6 decimal places.

namespace detail {

inline void append_fixed6(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

}  // namespace detail

inline std::string points_to_text(std::span<const InterestPoint> points) {
  std::string out;
  for (const auto& p : points) {
    detail::append_fixed6(out, p.x);
    out += ' ';
    detail::append_fixed6(out, p.y);
    out += ' ';
    detail::append_fixed6(out, p.scale);
    out += ' ';
    detail::append_fixed6(out, p.response);
    out += '\n';
  }
  return out;
}

inline std::string points_to_csv(std::span<const InterestPoint> points) {
  std::string out = "x,y,scale,response\n";
  for (const auto& p : points) {
    detail::append_fixed6(out, p.x);
    out += ',';
    detail::append_fixed6(out, p.y);
    out += ',';
    detail::append_fixed6(out, p.scale);
    out += ',';
    detail::append_fixed6(out, p.response);
    out += '\n';
  }
  return out;
}

}  // namespace wlsurf
