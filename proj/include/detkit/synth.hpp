#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detkit/eval.hpp"
#include "detkit/formats.hpp"
#include "detkit/fusion.hpp"

namespace detkit {

// Synthetic ground-truth generator: boxes only, no rasters.
struct SceneConfig {
  int num_images = 200;
  double image_width = 1024.0;
  double image_height = 1024.0;
  int objects_min = 5;
  int objects_max = 15;
  // Per-class sampling weights (need not be normalized); defaults model a
  // long-tailed 10-class frequency profile.
  std::vector<double> class_weights;
  // Object widths/heights drawn log-uniformly from this range, px.
  double size_min = 32.0;
  double size_max = 160.0;
  std::uint64_t seed = 0;

  SceneConfig();
};

// Error profile of a simulated detector.
struct ScoreModel {
  double tp_mean = 0.8, tp_sigma = 0.1;
  double fp_mean = 0.3, fp_sigma = 0.1;
};

struct DetectorProfile {
  double miss_rate = 0.0;     // probability a gt produces no detection
  double jitter_sigma = 0.0;  // px stddev of independent corner noise
  double fp_rate = 0.0;       // expected spurious boxes per image
  double label_noise = 0.0;   // probability of a wrong category
  ScoreModel score_model;
};

// High precision, misses often (proposal-refinement style).
DetectorProfile multi_stage_profile();
// High recall, noisy localization, more spurious boxes (one-pass style).
DetectorProfile single_stage_profile();

Dataset generate_scenes(const SceneConfig& cfg);

DetectionFile simulate_detector(const Dataset& ds,
                                const DetectorProfile& profile,
                                std::uint64_t seed, int model = 0);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct DetectorStats {
  MetricStats map_c, map_50, map_75;
};

struct ExperimentReport {
  int trials = 0;
  DetectorStats a, b, fused;
};

// Per trial: generate scenes, simulate both detectors, evaluate each alone
// and their fusion. Deterministic for a given seed, any thread count.
ExperimentReport run_ensemble_experiment(const SceneConfig& scene_cfg,
                                         const DetectorProfile& profile_a,
                                         const DetectorProfile& profile_b,
                                         const FusionConfig& fusion_cfg,
                                         int trials, std::uint64_t seed = 0,
                                         int threads = 1,
                                         const EvalConfig& eval_cfg = {});

std::string render_experiment_table(const ExperimentReport& report);
std::string experiment_to_json(const ExperimentReport& report);

}  // namespace detkit
