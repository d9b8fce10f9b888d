#pragma once

#include <span>
#include <string>
#include <vector>

#include "detkit/formats.hpp"
#include "detkit/types.hpp"

namespace detkit {

enum class MatchFlag {
  tp,
  fp,
  ignored,  // absorbed by a crowd region: counts neither way
};

struct DetectionMatch {
  int det_index = -1;  // index into the caller's detection list
  double score = 0.0;
  MatchFlag flag = MatchFlag::fp;
  int gt_index = -1;  // matched ground-truth index, -1 if none
};

// Match outcome for one (image, category) pair at one IoU threshold;
// detections ordered by descending score.
struct MatchResult {
  std::vector<DetectionMatch> detections;
  int num_gt = 0;  // non-crowd ground truth
};

// Greedy matching: detections in descending score order each take the
// unmatched non-crowd ground truth with the highest IoU >= iou_thresh.
// Detections that fail but overlap a crowd region at the threshold are
// flagged ignored; crowd boxes do not count toward num_gt.
MatchResult match_detections(std::span<const ScoredDetection> dets,
                             std::span<const GroundTruthBox> gts,
                             double iou_thresh);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// Cumulative precision/recall over an already globally sorted match
// sequence; ignored entries are skipped.
std::vector<PrPoint> pr_curve(std::span<const DetectionMatch> ordered,
                              int num_gt);

// 101-point interpolated AP: mean over the recall grid {0, 0.01, ..., 1} of
// the maximum precision at recall >= r.
double average_precision(std::span<const PrPoint> curve);

struct EvalConfig {
  std::vector<double> thresholds;  // defaults to 0.50:0.05:0.95
  int max_dets = 100;              // per image, highest-scored kept

  EvalConfig();
};

EvalConfig coco_eval_config();      // max_dets 100
EvalConfig visdrone_eval_config();  // max_dets 500

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<int> category_ids;        // categories with ground truth
  std::vector<std::vector<double>> ap;  // [category][threshold]
  std::vector<double> class_mean_ap;    // per threshold
  double map_c = 0.0;
  double map_50 = 0.0;
  double map_75 = 0.0;
  std::vector<std::pair<int, double>> per_class_ap50;
};

EvalReport evaluate(const DetectionFile& dets, const Dataset& ds,
                    const EvalConfig& cfg, int threads = 1);

// Human-readable table with map_c / map_50 / map_75 rows and the per-class
// AP at 0.50 breakdown.
std::string render_report_table(const EvalReport& report,
                                const CategoryTable& categories);
std::string report_to_json(const EvalReport& report,
                           const CategoryTable& categories);

}  // namespace detkit
