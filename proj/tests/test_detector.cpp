#include <cmath>
#include <cstdlib>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "support/images.hpp"
#include "support/matchers.hpp"
#include "support/oracles.hpp"
#include "wlsurf/detector.hpp"

using namespace wlsurf;

namespace {

/// Rasterizes a weighted-rect decomposition onto a size x size grid so it can
/// be compared against the longhand oracle kernels.
std::vector<int> rasterize(const std::vector<WeightedRect>& rects, int size) {
  const int half = size / 2;
  std::vector<int> grid(static_cast<std::size_t>(size) * size, 0);
  for (const auto& wr : rects)
    for (int v = wr.rect.y0; v <= wr.rect.y1; ++v)
      for (int u = wr.rect.x0; u <= wr.rect.x1; ++u)
        grid[static_cast<std::size_t>(u + half) +
             static_cast<std::size_t>(v + half) * size] += wr.weight;
  return grid;
}

int weighted_area(const std::vector<WeightedRect>& rects) {
  int acc = 0;
  for (const auto& wr : rects)
    acc += wr.weight * wr.rect.width() * wr.rect.height();
  return acc;
}

/// Three hand-built co-located maps (equal margins, stride 1) around one
/// candidate at (1, 1) of a 3x3 grid.
std::vector<ResponseMap> tiny_maps(const double layer0[9], const double mid[9],
                                   const double layer2[9]) {
  std::vector<ResponseMap> maps(3);
  const double* layers[3] = {layer0, mid, layer2};
  const int sizes[3] = {9, 15, 21};
  for (int m = 0; m < 3; ++m) {
    maps[m].entry = ScaleEntry{1, sizes[m], 1.2 * sizes[m] / 9.0, 1};
    maps[m].margin = 8;
    maps[m].grid_w = 3;
    maps[m].grid_h = 3;
    maps[m].responses.assign(layers[m], layers[m] + 9);
  }
  return maps;
}

}  // namespace

TEST_CASE("filter schedule covers four octaves on a large image", "[detector]") {
  const auto schedule = filter_schedule(4, 1024, 768);
  REQUIRE(schedule.size() == 16);
  const int expected[16] = {9, 15, 21, 27, 15, 27, 39, 51,
                            27, 51, 75, 99, 51, 99, 147, 195};
  for (int i = 0; i < 16; ++i) {
    CHECK(schedule[i].filter_size == expected[i]);
    CHECK(schedule[i].octave == i / 4 + 1);
    CHECK(schedule[i].stride == 1 << (i / 4));
    CHECK(schedule[i].sigma == Catch::Approx(1.2 * expected[i] / 9.0));
  }
  CHECK(schedule[0].sigma == Catch::Approx(1.2));
  CHECK(schedule[15].sigma == Catch::Approx(26.0));
}

TEST_CASE("filter schedule trims overhanging sizes and thin octaves",
          "[detector]") {
  // 100x100: limit 97. Octave 3 keeps {27, 51, 75}; octave 4 keeps only {51}
  // and is dropped as a whole.
  const auto schedule = filter_schedule(4, 100, 100);
  REQUIRE(schedule.size() == 11);
  CHECK(schedule[8].octave == 3);
  CHECK(schedule[8].filter_size == 27);
  CHECK(schedule[10].filter_size == 75);

  const auto small = filter_schedule(4, 50, 50);
  REQUIRE(small.size() == 7);
  CHECK(small[4].octave == 2);
  CHECK(small[6].filter_size == 39);

  CHECK_THROWS_MATCHES(filter_schedule(4, 14, 14), Error,
                       ErrorCodeIs(errc::schedule_error));
  CHECK_THROWS_MATCHES(filter_schedule(0, 100, 100), Error,
                       ErrorCodeIs(errc::config_error));
  CHECK_THROWS_MATCHES(filter_schedule(5, 100, 100), Error,
                       ErrorCodeIs(errc::config_error));
}

TEST_CASE("schedule respects the octave count argument", "[detector]") {
  CHECK(filter_schedule(1, 512, 512).size() == 4);
  CHECK(filter_schedule(2, 512, 512).size() == 8);
}

TEST_CASE("hessian layout of the 9x9 base filter", "[detector]") {
  const HessianLayout l = hessian_layout(9);
  REQUIRE(l.dxx.size() == 3);
  CHECK(l.dxx[0].rect == Rect{-4, -2, -2, 2});
  CHECK(l.dxx[0].weight == 1);
  CHECK(l.dxx[1].rect == Rect{-1, -2, 1, 2});
  CHECK(l.dxx[1].weight == -2);
  CHECK(l.dxx[2].rect == Rect{2, -2, 4, 2});
  CHECK(l.dxx[2].weight == 1);

  // dyy is the transpose of dxx.
  for (int i = 0; i < 3; ++i) {
    CHECK(l.dyy[i].rect == Rect{l.dxx[i].rect.y0, l.dxx[i].rect.x0,
                                l.dxx[i].rect.y1, l.dxx[i].rect.x1});
    CHECK(l.dyy[i].weight == l.dxx[i].weight);
  }

  REQUIRE(l.dxy.size() == 4);
  CHECK(l.dxy[0].rect == Rect{-3, -3, -1, -1});
  CHECK(l.dxy[0].weight == 1);
  CHECK(l.dxy[1].rect == Rect{1, -3, 3, -1});
  CHECK(l.dxy[1].weight == -1);
  CHECK(l.dxy[2].rect == Rect{-3, 1, -1, 3});
  CHECK(l.dxy[2].weight == -1);
  CHECK(l.dxy[3].rect == Rect{1, 1, 3, 3});
  CHECK(l.dxy[3].weight == 1);
}

TEST_CASE("hessian layout rejects sizes off the ladder grid", "[detector]") {
  for (int bad : {3, 8, 10, 11, 12, 18, 24})
    CHECK_THROWS_MATCHES(hessian_layout(bad), Error,
                         ErrorCodeIs(errc::layout_error));
  for (int good : {9, 15, 21, 27, 39, 51, 75, 99, 147, 195})
    CHECK_NOTHROW(hessian_layout(good));
}

TEST_CASE("every layout is zero-sum and matches the longhand kernels",
          "[detector]") {
  for (int size : {9, 15, 21, 27, 39, 51}) {
    const HessianLayout l = hessian_layout(size);
    CHECK(weighted_area(l.dxx) == 0);
    CHECK(weighted_area(l.dyy) == 0);
    CHECK(weighted_area(l.dxy) == 0);

    const testsupport::OracleKernels k = testsupport::oracle_kernels(size);
    CHECK(rasterize(l.dxx, size) == k.dxx);
    CHECK(rasterize(l.dyy, size) == k.dyy);
    CHECK(rasterize(l.dxy, size) == k.dxy);
  }
}

TEST_CASE("largest filter decomposes into 65x129 lobes", "[detector]") {
  const HessianLayout l = hessian_layout(195);
  CHECK(l.dxx[0].rect.width() == 65);
  CHECK(l.dxx[0].rect.height() == 129);
  CHECK(l.dyy[0].rect.width() == 129);
  CHECK(l.dyy[0].rect.height() == 65);
}

TEST_CASE("response map equals the direct-convolution oracle", "[detector]") {
  const GrayImage img = testsupport::random_image(64, 64, 2024);
  const PlannedImage planned = plan(img, {Method::Full});
  const ReducedIntegralImage ii =
      build_integral(planned.prepared, planned.plan.word_bits);

  for (int size : {9, 15}) {
    const ScaleEntry entry{1, size, 1.2 * size / 9.0, 1};
    const ResponseMap map = response_map(ii, planned.plan, entry);
    const testsupport::OracleKernels k = testsupport::oracle_kernels(size);
    REQUIRE(map.grid_w == 64 - 2 * ((size + 1) / 2));
    double worst = 0;
    for (int iy = 0; iy < map.grid_h; ++iy)
      for (int ix = 0; ix < map.grid_w; ++ix) {
        const double got = map.at(ix, iy);
        const double want =
            testsupport::oracle_response(img, k, map.pixel_x(ix), map.pixel_y(iy));
        const double scale = std::max({std::abs(want), std::abs(got), 1.0});
        worst = std::max(worst, std::abs(got - want) / scale);
      }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("response grid geometry follows margin and stride", "[detector]") {
  const GrayImage img = testsupport::random_image(128, 96, 31);
  const PlannedImage planned = plan(img, {Method::Full});
  const ReducedIntegralImage ii =
      build_integral(planned.prepared, planned.plan.word_bits);

  const ResponseMap octave2 =
      response_map(ii, planned.plan, ScaleEntry{2, 27, 3.6, 2});
  CHECK(octave2.margin == 14);
  CHECK(octave2.grid_w == (128 - 28) / 2);
  CHECK(octave2.grid_h == (96 - 28) / 2);
  CHECK(octave2.pixel_x(0) == 14);
  CHECK(octave2.pixel_x(3) == 20);
}

TEST_CASE("response map rejects a mismatched word length", "[detector]") {
  const GrayImage img = testsupport::random_image(64, 64, 8);
  const PlannedImage planned = plan(img, {Method::Full});
  const ReducedIntegralImage narrow = build_integral(planned.prepared, 16);
  CHECK_THROWS_MATCHES(
      response_map(narrow, planned.plan, ScaleEntry{1, 9, 1.2, 1}), Error,
      ErrorCodeIs(errc::validation_error));
}

TEST_CASE("nms keeps strict maxima only", "[detector]") {
  double flat[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  double peak[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
  const auto maps = tiny_maps(flat, peak, flat);
  const auto cands = nms_3d(maps, 0.0);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].ix == 1);
  CHECK(cands[0].iy == 1);
  CHECK(cands[0].response == 5.0);
}

TEST_CASE("nms suppresses ties", "[detector]") {
  double flat[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  double peak[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
  double rival[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
  CHECK(nms_3d(tiny_maps(flat, peak, rival), 0.0).empty());

  double plateau[9] = {1, 1, 1, 5, 5, 1, 1, 1, 1};
  CHECK(nms_3d(tiny_maps(flat, plateau, flat), 0.0).empty());
}

TEST_CASE("nms respects the threshold", "[detector]") {
  double flat[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  double peak[9] = {1, 1, 1, 1, 5, 1, 1, 1, 1};
  CHECK(nms_3d(tiny_maps(flat, peak, flat), 5.0).empty());
  CHECK(nms_3d(tiny_maps(flat, peak, flat), 4.999).size() == 1);
}

TEST_CASE("nms needs the whole 26-neighborhood inside every layer",
          "[detector]") {
  double flat[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  double corner[9] = {9, 1, 1, 1, 1, 1, 1, 1, 1};
  CHECK(nms_3d(tiny_maps(flat, corner, flat), 0.0).empty());
}

TEST_CASE("nms validates its inputs", "[detector]") {
  double flat[9] = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  auto maps = tiny_maps(flat, flat, flat);
  CHECK_THROWS_MATCHES(
      nms_3d(std::span<const ResponseMap>(maps.data(), 2), 0.0), Error,
      ErrorCodeIs(errc::arity_error));
  maps[2].entry.stride = 2;
  CHECK_THROWS_MATCHES(nms_3d(maps, 0.0), Error,
                       ErrorCodeIs(errc::validation_error));
  maps[2].entry.stride = 1;
  maps[2].margin = 9;  // off-lattice relative to the middle map? still fine
  CHECK_NOTHROW(nms_3d(maps, 0.0));
}

TEST_CASE("candidates from one octave are never 26-adjacent", "[detector]") {
  const GrayImage img = testsupport::natural_image("coins");
  const PlannedImage planned = plan(img, {Method::Full});
  const ReducedIntegralImage ii =
      build_integral(planned.prepared, planned.plan.word_bits);
  std::vector<ResponseMap> maps;
  for (const auto& entry : filter_schedule(1, img.width(), img.height()))
    maps.push_back(response_map(ii, planned.plan, entry));

  for (std::size_t m = 1; m + 1 < maps.size(); ++m) {
    const auto cands =
        nms_3d(std::span<const ResponseMap>(&maps[m - 1], 3), 1000.0);
    for (std::size_t a = 0; a < cands.size(); ++a)
      for (std::size_t b = a + 1; b < cands.size(); ++b) {
        const bool adjacent = std::abs(cands[a].ix - cands[b].ix) <= 1 &&
                              std::abs(cands[a].iy - cands[b].iy) <= 1;
        CHECK_FALSE(adjacent);
      }
  }
}

TEST_CASE("interpolation solves the frozen quadratic to 1/6", "[detector]") {
  // Middle layer holds a 1-D parabola through 6, 10, 8 along x plus a
  // separable -dy^2 bowl; the flanking layers subtract 1 so the scale axis
  // decouples. The fitted vertex then sits at x offset (6-8)/(2*(6-20+8)).
  double mid[9] = {6 - 1, 10 - 1, 8 - 1, 6, 10, 8, 6 - 1, 10 - 1, 8 - 1};
  double flank[9] = {6 - 2, 10 - 2, 8 - 2, 6 - 1, 10 - 1, 8 - 1,
                     6 - 2, 10 - 2, 8 - 2};
  const auto maps = tiny_maps(flank, mid, flank);
  const auto cands = nms_3d(maps, 0.0);
  REQUIRE(cands.size() == 1);

  DetectStats stats;
  const auto point = interpolate(maps, cands[0], &stats);
  REQUIRE(point.has_value());
  CHECK(point->x == Catch::Approx(9.0 + 1.0 / 6.0).epsilon(1e-12));
  CHECK(point->y == Catch::Approx(9.0).epsilon(1e-12));
  CHECK(point->response == 10.0);
  CHECK(stats.rejected_offset == 0);
  CHECK(stats.rejected_singular == 0);
}

TEST_CASE("interpolation scale sits between the flanking sigmas", "[detector]") {
  // Symmetric along x and y, gently peaked toward the upper layer in scale.
  double lo[9] = {1, 1, 1, 1, 2, 1, 1, 1, 1};
  double mid[9] = {1, 1, 1, 1, 6, 1, 1, 1, 1};
  double hi[9] = {1, 1, 1, 1, 4, 1, 1, 1, 1};
  const auto maps = tiny_maps(lo, mid, hi);
  const auto point = interpolate(maps, Candidate{1, 1, 6.0}, nullptr);
  REQUIRE(point.has_value());
  // gs = 1, hss = -6, offset = 1/6 of the sigma half-gap (2.8 - 1.2)/2.
  CHECK(point->scale ==
        Catch::Approx(2.0 + (1.0 / 6.0) * (2.8 - 1.2) / 2.0).epsilon(1e-12));
}

TEST_CASE("interpolation rejects offsets beyond half a sample", "[detector]") {
  double mid[9] = {9.0, 9.0, 9.8, 9.9, 10.0, 9.9, 9.8, 9.5, 9.0};
  double flank[9] = {5, 5, 5, 5, 5, 5, 5, 5, 5};
  const auto maps = tiny_maps(flank, mid, flank);
  const auto cands = nms_3d(maps, 0.0);
  REQUIRE(cands.size() == 1);

  DetectStats stats;
  const auto point = interpolate(maps, cands[0], &stats);
  CHECK_FALSE(point.has_value());
  CHECK(stats.rejected_offset == 1);
  CHECK(stats.rejected_singular == 0);
}

TEST_CASE("interpolation rejects singular systems", "[detector]") {
  // Scale axis exactly flat: hss = 0 makes the Hessian rank deficient.
  double mid[9] = {9, 9, 9, 9, 10, 9, 9, 9, 9};
  double same[9] = {9, 9, 9, 9, 10, 9, 9, 9, 9};
  const auto maps = tiny_maps(same, mid, same);
  DetectStats stats;
  const auto point = interpolate(maps, Candidate{1, 1, 10.0}, &stats);
  CHECK_FALSE(point.has_value());
  CHECK(stats.rejected_singular == 1);
}

TEST_CASE("intensity negation leaves responses untouched", "[detector]") {
  const GrayImage img = testsupport::random_image(96, 96, 555);
  const GrayImage neg = testsupport::negate_image(img);

  const PlannedImage a = plan(img, {Method::Full});
  const PlannedImage b = plan(neg, {Method::Full});
  const ReducedIntegralImage ia = build_integral(a.prepared, a.plan.word_bits);
  const ReducedIntegralImage ib = build_integral(b.prepared, b.plan.word_bits);

  std::vector<ResponseMap> ma, mb;
  for (const auto& entry : filter_schedule(2, 96, 96)) {
    ma.push_back(response_map(ia, a.plan, entry));
    mb.push_back(response_map(ib, b.plan, entry));
  }
  for (std::size_t m = 0; m < ma.size(); ++m) {
    REQUIRE(ma[m].responses.size() == mb[m].responses.size());
    for (std::size_t i = 0; i < ma[m].responses.size(); ++i)
      CHECK(ma[m].responses[i] == mb[m].responses[i]);
  }

  // Same pre-threshold candidates, down to the bit.
  for (std::size_t m = 1; m + 1 < ma.size(); ++m) {
    if (ma[m].entry.octave != ma[m - 1].entry.octave ||
        ma[m].entry.octave != ma[m + 1].entry.octave)
      continue;
    const auto ca = nms_3d(std::span<const ResponseMap>(&ma[m - 1], 3), -1e300);
    const auto cb = nms_3d(std::span<const ResponseMap>(&mb[m - 1], 3), -1e300);
    REQUIRE(ca.size() == cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i) {
      CHECK(ca[i].ix == cb[i].ix);
      CHECK(ca[i].iy == cb[i].iy);
      CHECK(ca[i].response == cb[i].response);
    }
  }
}

TEST_CASE("constant images yield zero detections", "[detector]") {
  for (int value : {0, 128, 255}) {
    const auto points =
        detect(testsupport::constant_image(128, 128, value), {Method::Full});
    CHECK(points.empty());
  }
}

TEST_CASE("a bright blob is detected near its center", "[detector]") {
  GrayImage canvas = [] {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(128) * 128, 30);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double d = std::hypot(x - 64.0, y - 64.0);
        if (d < 6.0) px[static_cast<std::size_t>(y) * 128 + x] = 220;
      }
    return GrayImage(128, 128, std::move(px));
  }();

  DetectStats stats;
  const auto points = detect(canvas, {Method::Full}, 1000.0, 4, &stats);
  REQUIRE_FALSE(points.empty());
  bool near_center = false;
  for (const auto& p : points)
    if (std::abs(p.x - 64.0) <= 3.0 && std::abs(p.y - 64.0) <= 3.0)
      near_center = true;
  CHECK(near_center);
  CHECK(stats.candidates >= points.size());
}

TEST_CASE("points sort by response, then raster position", "[detector]") {
  std::vector<InterestPoint> pts = {
      {5.0, 5.0, 1.2, 100.0},
      {1.0, 2.0, 1.2, 900.0},
      {2.0, 1.0, 1.2, 100.0},
      {1.0, 1.0, 2.0, 100.0},
      {1.0, 1.0, 1.2, 100.0},
  };
  sort_points(pts);
  CHECK(pts[0].response == 900.0);
  CHECK(pts[1].x == 1.0);
  CHECK(pts[1].y == 1.0);
  CHECK(pts[1].scale == 1.2);
  CHECK(pts[2].scale == 2.0);
  CHECK(pts[3].y == 1.0);
  CHECK(pts[3].x == 2.0);
  CHECK(pts[4].y == 5.0);
}

TEST_CASE("point files render six decimal places", "[detector]") {
  const std::vector<InterestPoint> pts = {{1.5, 2.25, 1.2, 50000.125},
                                          {0.0, -0.5, 26.0, 77.0}};
  CHECK(points_to_text(pts) ==
        "1.500000 2.250000 1.200000 50000.125000\n"
        "0.000000 -0.500000 26.000000 77.000000\n");
  CHECK(points_to_csv(pts) ==
        "x,y,scale,response\n"
        "1.500000,2.250000,1.200000,50000.125000\n"
        "0.000000,-0.500000,26.000000,77.000000\n");
  CHECK(points_to_text({}).empty());
  CHECK(points_to_csv({}) == "x,y,scale,response\n");
}
