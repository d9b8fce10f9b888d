#pragma once

#include <span>
#include <vector>

#include "detkit/formats.hpp"
#include "detkit/types.hpp"

namespace detkit {

enum class RescaleMode {
  none,           // keep cluster-mean confidences
  clamped_count,  // score *= min(N, M) / M, N = cluster size, M = num models
};

struct FusionConfig {
  double match_iou = 0.55;
  int num_models = 1;
  RescaleMode rescale_mode = RescaleMode::clamped_count;
  double score_floor = 0.0;
  // Optional per-model score weights (indexed by model id); empty = all 1.
  std::vector<double> model_weights;
};

// A cluster of matched same-category boxes and their running fusion. The
// fused score is the arithmetic mean of member scores; fused coordinates are
// the score-weighted means of member coordinates.
struct FusionCluster {
  std::vector<ScoredDetection> members;
  ScoredDetection fused;
  int category = 0;
};

// Greedy clustering of one image's detections, highest score first. Each box
// joins the first same-category cluster whose running fused box has
// IoU > cfg.match_iou, otherwise it seeds a new cluster. No rescaling is
// applied to the returned clusters.
std::vector<FusionCluster> wbf_cluster(std::span<const ScoredDetection> dets,
                                       const FusionConfig& cfg);

// Full weighted box fusion for one image: clustering, then confidence
// rescaling per cfg.rescale_mode, score-floor filtering, and a descending
// score sort.
std::vector<ScoredDetection> wbf_fuse(std::span<const ScoredDetection> dets,
                                      const FusionConfig& cfg);

// Greedy per-category hard suppression: keep the highest-scored box, drop
// same-category boxes with IoU >= iou_thresh against a kept box.
std::vector<ScoredDetection> nms(std::span<const ScoredDetection> dets,
                                 double iou_thresh);

enum class SoftNmsMode { linear, gaussian };

// Score decay instead of removal: linear multiplies overlapping boxes by
// (1 - IoU) when IoU > iou_thresh; gaussian multiplies by exp(-IoU^2 / sigma).
// Boxes ending below score_floor are dropped.
std::vector<ScoredDetection> soft_nms(std::span<const ScoredDetection> dets,
                                      double iou_thresh, SoftNmsMode mode,
                                      double sigma,
                                      double score_floor = 1e-3);

// Concatenates all models' detections per image and fuses them. Output boxes
// carry a fresh model id (max input id + 1). cfg.num_models must equal the
// number of input files.
DetectionFile ensemble(const std::vector<DetectionFile>& det_files,
                       const FusionConfig& cfg, int threads = 1);

}  // namespace detkit
