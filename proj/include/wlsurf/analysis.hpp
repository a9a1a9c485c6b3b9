#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "wlsurf/detector.hpp"
#include "wlsurf/error.hpp"
#include "wlsurf/image.hpp"
#include "wlsurf/reduction.hpp"
#include "wlsurf/wordlen.hpp"

namespace wlsurf {

struct Size {
  int width = 0;
  int height = 0;
};

namespace detail {

/// Shortest exact decimal rendering of numerator / 2^denom_log2. The
/// denominator is a power of two, so the expansion always terminates.
inline std::string format_pow2_fraction(std::uint64_t numerator, int denom_log2) {
  std::string out = std::to_string(numerator >> denom_log2);
  std::uint64_t rem = numerator & ((std::uint64_t{1} << denom_log2) - 1);
  if (rem == 0) return out;
  out += '.';
  while (rem != 0) {
    rem *= 10;
    out += static_cast<char>('0' + (rem >> denom_log2));
    rem &= (std::uint64_t{1} << denom_log2) - 1;
  }
  return out;
}

inline std::string format_kb(std::uint64_t bits) {
  return format_pow2_fraction(bits, 13);  // bits / 8192
}

inline std::string format_pct(double pct) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", pct);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Full-word-length sizing (the storage-blowup tables).

struct SizingRow {
  int width = 0;
  int height = 0;
  int bits_full = 0;                  // Ineq-4 word length
  std::uint64_t input_bits = 0;       // packed source image footprint
  std::uint64_t integral_bits = 0;    // packed Eq-5 footprint
  std::uint64_t integral_padded_bits = 0;  // next-power-of-two container footprint
  double increase_pct = 0.0;          // (integral - input) / input * 100
};

inline std::vector<SizingRow> sizing_table(std::span<const Size> sizes,
                                           int bits_per_pixel) {
  if (sizes.empty())
    raise(errc::config_error, "sizing_table: size list is empty");
  std::vector<SizingRow> rows;
  rows.reserve(sizes.size());
  for (const Size& s : sizes) {
    SizingRow r;
    r.width = s.width;
    r.height = s.height;
    r.bits_full = bits_for_value(
        worst_case_integral_value(s.width, s.height, bits_per_pixel));
    r.input_bits = memory_bits(s.width, s.height, bits_per_pixel);
    r.integral_bits = memory_bits(s.width, s.height, r.bits_full);
    r.integral_padded_bits =
        memory_bits(s.width, s.height, container_bits(r.bits_full));
    r.increase_pct = 100.0 *
                     (static_cast<double>(r.integral_bits) - r.input_bits) /
                     static_cast<double>(r.input_bits);
    rows.push_back(r);
  }
  return rows;
}

inline std::string sizing_table_csv(std::span<const SizingRow> rows) {
  std::string out =
      "width,height,integral_bits,input_kb,integral_kb,integral_padded_kb,"
      "increase_pct\n";
  for (const auto& r : rows) {
    out += std::to_string(r.width) + ',' + std::to_string(r.height) + ',' +
           std::to_string(r.bits_full) + ',' + detail::format_kb(r.input_bits) +
           ',' + detail::format_kb(r.integral_bits) + ',' +
           detail::format_kb(r.integral_padded_bits) + ',' +
           detail::format_pct(r.increase_pct) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-method word-length reduction (the percentage-saving tables).

struct ReductionRow {
  int width = 0;
  int height = 0;
  int bits_full = 0;
  int bits_reduced = 0;
  double reduction_pct = 0.0;  // equals the memory reduction, Eq 5 is linear
};

inline std::vector<ReductionRow> reduction_table(std::span<const Size> sizes,
                                                 Method method, int shift,
                                                 int bits_per_pixel = 8,
                                                 int max_filter_w = 129,
                                                 int max_filter_h = 65) {
  if (sizes.empty())
    raise(errc::config_error, "reduction_table: size list is empty");
  int reduced = 0;
  switch (method) {
    case Method::Exact:
      reduced = bits_exact(max_filter_w, max_filter_h, bits_per_pixel);
      break;
    case Method::ModifiedExact:
      reduced = bits_modified_exact(max_filter_w, max_filter_h, bits_per_pixel);
      break;
    case Method::EvenImage:
      if (shift < 1 || shift >= bits_per_pixel)
        raise(errc::config_error, "reduction_table: even-image shift invalid");
      reduced = bits_modified_exact(max_filter_w, max_filter_h,
                                    bits_per_pixel - shift);
      break;
    default:
      raise(errc::config_error,
            "reduction_table: method must be exact, modified-exact or even");
  }
  std::vector<ReductionRow> rows;
  rows.reserve(sizes.size());
  for (const Size& s : sizes) {
    ReductionRow r;
    r.width = s.width;
    r.height = s.height;
    r.bits_full = bits_for_value(
        worst_case_integral_value(s.width, s.height, bits_per_pixel));
    r.bits_reduced = reduced;
    r.reduction_pct = 100.0 * (r.bits_full - r.bits_reduced) / r.bits_full;
    rows.push_back(r);
  }
  return rows;
}

inline std::string reduction_table_csv(std::span<const ReductionRow> rows) {
  std::string out = "width,height,bits_full,bits_reduced,reduction_pct\n";
  for (const auto& r : rows) {
    out += std::to_string(r.width) + ',' + std::to_string(r.height) + ',' +
           std::to_string(r.bits_full) + ',' + std::to_string(r.bits_reduced) +
           ',' + detail::format_pct(r.reduction_pct) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method-versus-method detector comparison.

struct ComparisonCell {
  bool ok = false;
  std::size_t count = 0;
  int word_bits = 0;
  double runtime_ms = 0.0;  // informational; never serialized into CSV
  std::string error;        // set when the detector run failed
};

struct ComparisonReport {
  std::vector<std::string> image_ids;
  std::vector<ReductionConfig> configs;  // configs[0] is the baseline
  std::vector<std::vector<ComparisonCell>> cells;  // [config][image]
};

inline std::string config_label(const ReductionConfig& cfg) {
  std::string label = method_name(cfg.method);
  if (cfg.method == Method::Approximate || cfg.method == Method::EvenImage)
    label += ":" + std::to_string(cfg.shift);
  return label;
}

/// Runs the detector for every (image, config) pair. A failing cell is
/// annotated and the sweep continues.
inline ComparisonReport compare_methods(std::span<const GrayImage> images,
                                        std::span<const std::string> ids,
                                        std::span<const ReductionConfig> configs,
                                        double threshold = 50000.0,
                                        int octaves = 4) {
  if (images.empty() || configs.empty() || images.size() != ids.size())
    raise(errc::config_error, "compare_methods: need images with ids and configs");
  ComparisonReport report;
  report.image_ids.assign(ids.begin(), ids.end());
  report.configs.assign(configs.begin(), configs.end());
  report.cells.resize(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    report.cells[c].resize(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      ComparisonCell& cell = report.cells[c][i];
      const auto start = std::chrono::steady_clock::now();
      try {
        const PlannedImage planned = plan(images[i], configs[c]);
        cell.word_bits = planned.plan.word_bits;
        cell.count =
            detect_planned(planned.prepared, planned.plan, threshold, octaves)
                .size();
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();
      }
      cell.runtime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    }
  }
  return report;
}

/// Table-II shape: one row per config, one count column per image.
inline std::string comparison_grid_csv(const ComparisonReport& report) {
  std::string out = "method,p,l_ii";
  for (const auto& id : report.image_ids) out += ',' + id;
  out += '\n';
  for (std::size_t c = 0; c < report.configs.size(); ++c) {
    const auto& cfg = report.configs[c];
    out += method_name(cfg.method);
    out += ',' + std::to_string(cfg.shift);
    // The full method's word length depends on the image size, so the column
    // lists each distinct value once, in input order.
    std::string bits;
    for (const auto& cell : report.cells[c]) {
      if (!cell.ok) continue;
      const std::string b = std::to_string(cell.word_bits);
      if (bits.empty()) bits = b;
      else if (bits != b && bits.find(b) == std::string::npos) bits += '/' + b;
    }
    out += ',' + bits;
    for (const auto& cell : report.cells[c])
      out += ',' + (cell.ok ? std::to_string(cell.count) : std::string("error"));
    out += '\n';
  }
  return out;
}

/// Table-I shape: one row per image, counts against the baseline config.
inline std::string comparison_counts_csv(const ComparisonReport& report) {
  std::string out = "image," + config_label(report.configs[0]);
  for (std::size_t c = 1; c < report.configs.size(); ++c) {
    const std::string label = config_label(report.configs[c]);
    out += ',' + label + ",diff_" + label;
  }
  out += '\n';
  for (std::size_t i = 0; i < report.image_ids.size(); ++i) {
    const ComparisonCell& base = report.cells[0][i];
    out += report.image_ids[i] + ',' +
           (base.ok ? std::to_string(base.count) : std::string("error"));
    for (std::size_t c = 1; c < report.configs.size(); ++c) {
      const ComparisonCell& cell = report.cells[c][i];
      if (cell.ok && base.ok) {
        out += ',' + std::to_string(cell.count) + ',' +
               std::to_string(static_cast<long long>(cell.count) -
                              static_cast<long long>(base.count));
      } else {
        out += ',' + (cell.ok ? std::to_string(cell.count) : std::string("error"));
        out += ',';
      }
    }
    out += '\n';
  }
  return out;
}

/// Aligned human-readable rendering, including per-run timings.
inline std::string comparison_text(const ComparisonReport& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %-6s %-5s", "config", "l_ii", "p");
  out += buf;
  for (const auto& id : report.image_ids) {
    std::snprintf(buf, sizeof buf, " %14s", id.c_str());
    out += buf;
  }
  out += '\n';
  for (std::size_t c = 0; c < report.configs.size(); ++c) {
    const auto& cfg = report.configs[c];
    std::string bits;
    for (const auto& cell : report.cells[c])
      if (cell.ok) { bits = std::to_string(cell.word_bits); break; }
    std::snprintf(buf, sizeof buf, "%-18s %-6s %-5d", config_label(cfg).c_str(),
                  bits.c_str(), cfg.shift);
    out += buf;
    for (const auto& cell : report.cells[c]) {
      if (cell.ok)
        std::snprintf(buf, sizeof buf, " %6zu (%5.0fms)", cell.count,
                      cell.runtime_ms);
      else
        std::snprintf(buf, sizeof buf, " %14s", "error");
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace wlsurf
