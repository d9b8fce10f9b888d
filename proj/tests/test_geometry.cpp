#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "detkit/geometry.hpp"
#include "test_util.hpp"

using namespace detkit;

TEST_CASE("area of rectangles") {
  CHECK(area(BBox(0, 0, 2, 3)) == 6.0);
  CHECK(area(BBox(1, 1, 1, 5)) == 0.0);
  CHECK(area(BBox(0, 0, 10, 10)) == 100.0);
}

TEST_CASE("box construction rejects invalid inputs") {
  CHECK_THROWS_AS(BBox(5, 5, 4, 6), ValidationError);
  CHECK_THROWS_AS(BBox(0, 5, 1, 4), ValidationError);
  const double nan = std::nan("");
  CHECK_THROWS_AS(BBox(nan, 0, 1, 1), ValidationError);
  CHECK_THROWS_AS(BBox(0, 0, std::numeric_limits<double>::infinity(), 1),
                  ValidationError);
  CHECK_NOTHROW(BBox(1, 1, 1, 1));  // degenerate is fine
}

TEST_CASE("intersection") {
  CHECK(intersection(BBox(0, 0, 2, 2), BBox(0, 0, 2, 2)) == 4.0);
  CHECK(intersection(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6)) == 0.0);
  // Overlap rectangle (1,0,2,2).
  CHECK(intersection(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) == 2.0);
}

TEST_CASE("iou fixtures") {
  CHECK(iou(BBox(3, 4, 7, 9), BBox(3, 4, 7, 9)) == 1.0);
  CHECK(iou(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6)) == 0.0);
  CHECK(iou(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou of coincident zero-area boxes is 0") {
  CHECK(iou(BBox(5, 5, 5, 5), BBox(5, 5, 5, 5)) == 0.0);
  CHECK(iou(BBox(5, 5, 5, 9), BBox(5, 5, 5, 9)) == 0.0);
}

TEST_CASE("meets_quality uses strict inequality") {
  CHECK(meets_quality(BBox(0, 0, 2, 2), BBox(0, 0, 2, 2), 0.5));
  CHECK_FALSE(meets_quality(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6), 0.0));
  const BBox a(0, 0, 2, 2), b(1, 0, 3, 2);  // IoU = 1/3
  CHECK(meets_quality(a, b, 0.33));
  CHECK_FALSE(meets_quality(a, b, 0.34));
  CHECK_THROWS_AS(meets_quality(a, b, 1.5), ValidationError);
}

TEST_CASE("detection_matches uses non-strict inequality") {
  const BBox gt(0, 0, 10, 10), det(0, 0, 10, 5);  // IoU exactly 0.5
  CHECK(iou(det, gt) == 0.5);
  CHECK(detection_matches(det, gt, 0.5));
  CHECK_FALSE(meets_quality(det, gt, 0.5));
}

TEST_CASE("from_xywh") {
  const BBox b = from_xywh(10, 20, 30, 40);
  CHECK(b == BBox(10, 20, 40, 60));
  CHECK(area(from_xywh(0, 0, 0, 0)) == 0.0);
  CHECK_THROWS_AS(from_xywh(5, 5, -1, 2), ValidationError);
}

TEST_CASE("clip_box") {
  CHECK(clip_box(BBox(-5, -5, 15, 15), 10, 10) == BBox(0, 0, 10, 10));
  CHECK(area(clip_box(BBox(20, 20, 30, 30), 10, 10)) == 0.0);
}

TEST_CASE("iou properties over random pairs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shift(-37.0, 37.0);
  std::uniform_real_distribution<double> scale(0.1, 8.0);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = testutil::random_box(rng);
    const BBox b = testutil::random_box(rng);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    CHECK(intersection(a, b) <= std::min(area(a), area(b)) + 1e-12);

    const double dx = shift(rng), dy = shift(rng);
    const BBox at(a.x_tl + dx, a.y_tl + dy, a.x_br + dx, a.y_br + dy);
    const BBox bt(b.x_tl + dx, b.y_tl + dy, b.x_br + dx, b.y_br + dy);
    CHECK(iou(at, bt) == doctest::Approx(v).epsilon(1e-9));

    const double k = scale(rng);
    const BBox as(a.x_tl * k, a.y_tl * k, a.x_br * k, a.y_br * k);
    const BBox bs(b.x_tl * k, b.y_tl * k, b.x_br * k, b.y_br * k);
    if (v > 0.0)
      CHECK(iou(as, bs) == doctest::Approx(v).epsilon(1e-9));
    else
      CHECK(iou(as, bs) == 0.0);
  }
}
