#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

struct ImageInfo {
  long long id = 0;
  double width = 0.0;   // 0 means unknown
  double height = 0.0;  // 0 means unknown
  std::string file_name;
};

struct Dataset {
  std::vector<ImageInfo> images;
  CategoryTable categories;
  std::vector<GroundTruthBox> ground_truth;

  const ImageInfo* find_image(long long id) const;
};

struct DetectionFile {
  std::vector<ScoredDetection> detections;
  int model = 0;
};

// COCO-style annotation JSON: top-level {images, annotations, categories},
// annotation boxes as [x, y, w, h]. Ground-truth boxes are clipped to the
// image when dimensions are known; iscrowd maps to crowd_flag; an optional
// "mask_path" string per annotation names a per-instance binary mask raster.
Dataset parse_coco_annotations(std::string_view text);

// COCO-style results JSON: [{image_id, category_id, bbox:[x,y,w,h], score}].
DetectionFile parse_coco_detections(std::string_view text, int model);

// Serializes a detection list back to the results layout, coordinates and
// scores with 6 decimal places so fractional fusion output survives the
// round-trip.
std::string write_coco_detections(const DetectionFile& dets);

// Serializes a full annotation file (images, categories, ground truth).
std::string write_coco_annotations(const Dataset& ds);

// VisDrone-style per-image text: one line per box, 8 comma-separated numeric
// fields x,y,w,h,flag-or-score,category,truncation,occlusion. Truncation and
// occlusion are parsed but dropped; category 0 (ignored regions) is filtered.
// Ground-truth mode treats field 5 as a 0/1 validity flag (0 skips the line);
// detection mode treats it as the confidence score.
std::vector<GroundTruthBox> parse_visdrone_ground_truth(std::string_view text,
                                                        long long image);
std::vector<ScoredDetection> parse_visdrone_detections(std::string_view text,
                                                       long long image,
                                                       int model);

std::string write_visdrone_ground_truth(std::span<const GroundTruthBox> gts);
std::string write_visdrone_detections(std::span<const ScoredDetection> dets);

// Clips all ground-truth boxes to their image bounds where dimensions are
// known. Used after assembling datasets from sources without embedded sizes.
void clip_ground_truth(Dataset& ds);

}  // namespace detkit
