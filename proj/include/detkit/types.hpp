#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "detkit/geometry.hpp"

namespace detkit {

// One detector output: box + confidence + category, tagged with the source
// model and image it belongs to.
struct ScoredDetection {
  BBox box;
  double score = 0.0;
  int category = 0;
  int model = 0;
  long long image = 0;

  ScoredDetection() = default;
  ScoredDetection(const BBox& box, double score, int category, int model,
                  long long image);
};

struct GroundTruthBox {
  BBox box;
  int category = 0;
  long long image = 0;
  bool crowd_flag = false;
  // Optional per-instance binary mask raster, used by the augmenter when the
  // source dataset provides instance masks. Empty means rectangle mask.
  std::string mask_path;

  GroundTruthBox() = default;
  GroundTruthBox(const BBox& box, int category, long long image,
                 bool crowd_flag = false, std::string mask_path = {});
};

// Ordered (id, name) category list with unique ids.
class CategoryTable {
 public:
  void add(int id, std::string name);
  bool contains(int id) const;
  // Returns nullptr for unknown ids.
  const std::string* name_of(int id) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<int, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<int, std::string>> entries_;
};

// The ten VisDrone evaluation classes, ids 1..10 in benchmark order.
CategoryTable visdrone_categories();

}  // namespace detkit
