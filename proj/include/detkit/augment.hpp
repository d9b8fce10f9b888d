#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "detkit/formats.hpp"

namespace detkit {

// One harvested object instance: the cropped raster patch, a binary mask of
// the same size (255 inside the object), and where it came from.
struct InstanceEntry {
  cv::Mat patch;
  cv::Mat mask;  // CV_8U, same size as patch
  long long source_image = 0;
  BBox original_box;
  int category = 0;
};

struct InstanceBank {
  std::map<int, std::vector<InstanceEntry>> by_category;
  std::vector<std::string> warnings;

  std::size_t total() const;
  bool empty() const { return total() == 0; }
};

struct AugmentConfig {
  int per_source_images = 2;
  int min_objects = 11;
  int max_objects = 29;
  std::uint64_t seed = 0;
  double scale_jitter_lo = 1.0;  // lo == hi == 1 disables rescaling
  double scale_jitter_hi = 1.0;
  bool allow_overlap = true;
  double overlap_iou_cap = 0.30;  // used when allow_overlap is false
  bool category_balanced = false;
  bool feather_edges = false;  // 1-px Gaussian feather on mask edges
};

// Crops every non-crowd ground-truth box out of its source raster. Instances
// with a mask_path get that raster thresholded to a binary mask; everything
// else gets a full-rectangle mask. Unreadable rasters or degenerate boxes
// are skipped with a warning.
InstanceBank extract_instances(const Dataset& ds,
                               const std::filesystem::path& images_dir);

struct PasteResult {
  cv::Mat image;
  // The scene's own boxes re-tagged with image_id, then one box per pasted
  // object appended in paste order.
  std::vector<GroundTruthBox> annotations;
  std::size_t num_pasted = 0;
  std::vector<std::string> warnings;
};

// Composites n bank instances onto the scene at uniform random in-bounds
// positions and returns the updated annotation list. Deterministic for a
// given rng state.
PasteResult paste_compose(const cv::Mat& scene,
                          std::span<const GroundTruthBox> scene_gts,
                          long long image_id, const InstanceBank& bank, int n,
                          std::mt19937_64& rng, const AugmentConfig& cfg);

struct AugmentResult {
  Dataset dataset;  // original entries plus the augmented images
  std::vector<std::string> warnings;
};

// For each source image, writes cfg.per_source_images augmented PNGs into
// out_dir, each with a uniform count of pasted objects in
// [min_objects, max_objects]. New image ids continue after the existing
// maximum; original entries are untouched.
AugmentResult augment_dataset(const Dataset& ds,
                              const std::filesystem::path& images_dir,
                              const std::filesystem::path& out_dir,
                              const AugmentConfig& cfg, int threads = 1);

}  // namespace detkit
