#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "detkit/formats.hpp"
#include "test_util.hpp"

using namespace detkit;

namespace {

const char* kToyAnnotations = R"({
  "images": [
    {"id": 1, "width": 640, "height": 480, "file_name": "a.png"},
    {"id": 2, "width": 640, "height": 480, "file_name": "b.png"}
  ],
  "annotations": [
    {"id": 1, "image_id": 1, "category_id": 4, "bbox": [10, 20, 30, 40], "iscrowd": 0},
    {"id": 2, "image_id": 2, "category_id": 1, "bbox": [0, 0, 5, 5], "iscrowd": 1}
  ],
  "categories": [
    {"id": 1, "name": "pedestrian"},
    {"id": 4, "name": "car"}
  ]
})";

}  // namespace

TEST_CASE("coco annotations parse") {
  const Dataset ds = parse_coco_annotations(kToyAnnotations);
  REQUIRE(ds.images.size() == 2);
  REQUIRE(ds.ground_truth.size() == 2);
  CHECK(ds.ground_truth[0].box == BBox(10, 20, 40, 60));
  CHECK(ds.ground_truth[0].category == 4);
  CHECK_FALSE(ds.ground_truth[0].crowd_flag);
  CHECK(ds.ground_truth[1].crowd_flag);
  CHECK(ds.categories.size() == 2);
  CHECK(*ds.categories.name_of(4) == "car");
}

TEST_CASE("coco annotations edge cases") {
  CHECK(parse_coco_annotations(R"({"images": [], "annotations": [], "categories": []})")
            .ground_truth.empty());

  SUBCASE("absent image id") {
    const std::string text = R"({
      "images": [{"id": 1, "width": 10, "height": 10, "file_name": "a.png"}],
      "annotations": [{"image_id": 999, "category_id": 1, "bbox": [0,0,1,1]}],
      "categories": [{"id": 1, "name": "x"}]})";
    CHECK_THROWS_AS(parse_coco_annotations(text), ReferenceError);
  }
  SUBCASE("unknown category id") {
    const std::string text = R"({
      "images": [{"id": 1, "width": 10, "height": 10, "file_name": "a.png"}],
      "annotations": [{"image_id": 1, "category_id": 7, "bbox": [0,0,1,1]}],
      "categories": [{"id": 1, "name": "x"}]})";
    try {
      parse_coco_annotations(text);
      FAIL("expected ReferenceError");
    } catch (const ReferenceError& e) {
      CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
  }
  SUBCASE("malformed text carries a byte offset") {
    try {
      parse_coco_annotations("{\"images\": [,]}");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.byte_offset > 0);
    }
  }
  SUBCASE("ground truth is clipped to the image") {
    const std::string text = R"({
      "images": [{"id": 1, "width": 100, "height": 100, "file_name": "a.png"}],
      "annotations": [{"image_id": 1, "category_id": 1, "bbox": [90, 90, 50, 50]}],
      "categories": [{"id": 1, "name": "x"}]})";
    const Dataset ds = parse_coco_annotations(text);
    CHECK(ds.ground_truth[0].box == BBox(90, 90, 100, 100));
  }
}

TEST_CASE("coco detections parse") {
  const char* text = R"([
    {"image_id": 1, "category_id": 4, "bbox": [0, 0, 10, 10], "score": 0.9}
  ])";
  const DetectionFile f = parse_coco_detections(text, 3);
  REQUIRE(f.detections.size() == 1);
  const ScoredDetection& d = f.detections[0];
  CHECK(d.box == BBox(0, 0, 10, 10));
  CHECK(d.score == 0.9);
  CHECK(d.category == 4);
  CHECK(d.model == 3);
  CHECK(d.image == 1);

  CHECK(parse_coco_detections("[]", 0).detections.empty());
  CHECK_THROWS_AS(
      parse_coco_detections(
          R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":1.5}])", 0),
      ValidationError);
}

TEST_CASE("visdrone ground truth parse") {
  const auto gts = parse_visdrone_ground_truth("684,8,273,116,1,4,0,0\n", 7);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].box == BBox(684, 8, 957, 124));
  CHECK(gts[0].category == 4);
  CHECK(gts[0].image == 7);

  SUBCASE("validity flag 0 skips the entry") {
    CHECK(parse_visdrone_ground_truth("684,8,273,116,0,4,0,0\n", 1).empty());
  }
  SUBCASE("ignored regions are filtered") {
    CHECK(parse_visdrone_ground_truth("0,0,10,10,1,0,0,0\n", 1).empty());
  }
  SUBCASE("wrong field count names the line") {
    try {
      parse_visdrone_ground_truth("684,8,273,116,1,4,0\n", 1);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 1);
    }
  }
  SUBCASE("windows line endings are tolerated") {
    const auto two = parse_visdrone_ground_truth(
        "0,0,10,10,1,1,0,0\r\n5,5,10,10,1,2,0,0\r\n", 1);
    CHECK(two.size() == 2);
  }
  SUBCASE("unknown category id is a reference error") {
    CHECK_THROWS_AS(parse_visdrone_ground_truth("0,0,10,10,1,11,0,0\n", 1),
                    ReferenceError);
  }
}

TEST_CASE("visdrone detections parse") {
  const auto dets = parse_visdrone_detections("0,0,10,10,0.8,1,0,0\n", 2, 5);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].score == 0.8);
  CHECK(dets[0].category == 1);
  CHECK(dets[0].model == 5);
  CHECK_THROWS_AS(parse_visdrone_detections("0,0,10,10,1.5,1,0,0\n", 1, 0),
                  ValidationError);
}

TEST_CASE("write_coco_detections fixtures") {
  DetectionFile f;
  CHECK(write_coco_detections(f) == "[]");

  f.detections.emplace_back(BBox(0.8, 0.8, 10.8, 10.8), 0.75, 2, 0, 1);
  const std::string text = write_coco_detections(f);
  CHECK(text.find("[0.800000, 0.800000, 10.000000, 10.000000]") !=
        std::string::npos);
  const DetectionFile back = parse_coco_detections(text, 0);
  REQUIRE(back.detections.size() == 1);
  CHECK(back.detections[0].box.x_br ==
        doctest::Approx(10.8).epsilon(1e-9));
}

TEST_CASE("round trip preserves values to 6 decimals") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    DetectionFile f;
    f.model = 0;
    std::uniform_int_distribution<int> count(0, 8);
    const int n = count(rng);
    for (int i = 0; i < n; ++i)
      f.detections.push_back(testutil::random_detection(rng, i % 3 + 1));
    const std::string text = write_coco_detections(f);
    const DetectionFile back = parse_coco_detections(text, 0);
    REQUIRE(back.detections.size() == f.detections.size());
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      const ScoredDetection& a = f.detections[i];
      const ScoredDetection& b = back.detections[i];
      CHECK(std::abs(a.box.x_tl - b.box.x_tl) <= 1e-6);
      CHECK(std::abs(a.box.y_tl - b.box.y_tl) <= 1e-6);
      CHECK(std::abs(a.box.x_br - b.box.x_br) <= 1.1e-6);
      CHECK(std::abs(a.box.y_br - b.box.y_br) <= 1.1e-6);
      CHECK(std::abs(a.score - b.score) <= 5.1e-7);
      CHECK(a.category == b.category);
      CHECK(a.image == b.image);
    }
    // Serialization is stable after one quantization pass.
    CHECK(write_coco_detections(back) == text);
  }
}

TEST_CASE("coco annotations writer round-trips") {
  const Dataset ds = parse_coco_annotations(kToyAnnotations);
  const Dataset back = parse_coco_annotations(write_coco_annotations(ds));
  REQUIRE(back.images.size() == ds.images.size());
  REQUIRE(back.ground_truth.size() == ds.ground_truth.size());
  CHECK(back.ground_truth[0].box == ds.ground_truth[0].box);
  CHECK(back.ground_truth[1].crowd_flag);
  CHECK(back.categories.size() == ds.categories.size());
}

TEST_CASE("visdrone writers round-trip") {
  std::vector<GroundTruthBox> gts;
  gts.emplace_back(BBox(684, 8, 957, 124), 4, 1);
  const auto back =
      parse_visdrone_ground_truth(write_visdrone_ground_truth(gts), 1);
  REQUIRE(back.size() == 1);
  CHECK(back[0].box == gts[0].box);

  std::vector<ScoredDetection> dets;
  dets.emplace_back(BBox(0.8, 0.8, 10.8, 10.8), 0.75, 2, 0, 1);
  const auto dback =
      parse_visdrone_detections(write_visdrone_detections(dets), 1, 0);
  REQUIRE(dback.size() == 1);
  CHECK(dback[0].box.x_br == doctest::Approx(10.8).epsilon(1e-9));
  CHECK(dback[0].score == 0.75);
}

TEST_CASE("visdrone categories map 1..10 in benchmark order") {
  const CategoryTable t = visdrone_categories();
  REQUIRE(t.size() == 10);
  const char* expected[] = {"pedestrian", "people",   "bicycle",
                            "car",        "van",      "truck",
                            "tricycle",   "awning-tricycle", "bus", "motor"};
  for (int i = 0; i < 10; ++i) {
    REQUIRE(t.contains(i + 1));
    CHECK(*t.name_of(i + 1) == expected[i]);
  }
}

TEST_CASE("parsers survive random byte mutations") {
  const std::string coco_det =
      write_coco_detections(parse_coco_detections(
          R"([{"image_id":1,"category_id":1,"bbox":[1,2,3,4],"score":0.5}])",
          0));
  const std::string visdrone = "684,8,273,116,1,4,0,0\n0,0,10,10,1,2,0,0\n";
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 500; ++trial) {
    std::string a = kToyAnnotations, d = coco_det, v = visdrone;
    for (std::string* s : {&a, &d, &v}) {
      std::uniform_int_distribution<std::size_t> pos(0, s->size() - 1);
      (*s)[pos(rng)] = static_cast<char>(byte(rng));
    }
    try {
      parse_coco_annotations(a);
    } catch (const Error&) {
    }
    try {
      parse_coco_detections(d, 0);
    } catch (const Error&) {
    }
    try {
      parse_visdrone_ground_truth(v, 1);
    } catch (const Error&) {
    }
  }
  CHECK(true);  // reaching here means no abnormal termination
}
