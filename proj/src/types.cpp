#include "detkit/types.hpp"

#include <cmath>

namespace detkit {

ScoredDetection::ScoredDetection(const BBox& box, double score, int category,
                                 int model, long long image)
    : box(box), score(score), category(category), model(model), image(image) {
  if (!(score >= 0.0 && score <= 1.0) || !std::isfinite(score))
    throw ValidationError("detection score must be in [0, 1], got " +
                          std::to_string(score));
  if (category < 0)
    throw ValidationError("category id must be non-negative, got " +
                          std::to_string(category));
}

GroundTruthBox::GroundTruthBox(const BBox& box, int category, long long image,
                               bool crowd_flag, std::string mask_path)
    : box(box),
      category(category),
      image(image),
      crowd_flag(crowd_flag),
      mask_path(std::move(mask_path)) {
  if (category < 0)
    throw ValidationError("category id must be non-negative, got " +
                          std::to_string(category));
}

void CategoryTable::add(int id, std::string name) {
  if (contains(id))
    throw ValidationError("duplicate category id " + std::to_string(id));
  entries_.emplace_back(id, std::move(name));
}

bool CategoryTable::contains(int id) const {
  return name_of(id) != nullptr;
}

const std::string* CategoryTable::name_of(int id) const {
  for (const auto& [eid, name] : entries_)
    if (eid == id) return &name;
  return nullptr;
}

CategoryTable visdrone_categories() {
  CategoryTable t;
  t.add(1, "pedestrian");
  t.add(2, "people");
  t.add(3, "bicycle");
  t.add(4, "car");
  t.add(5, "van");
  t.add(6, "truck");
  t.add(7, "tricycle");
  t.add(8, "awning-tricycle");
  t.add(9, "bus");
  t.add(10, "motor");
  return t;
}

}  // namespace detkit
