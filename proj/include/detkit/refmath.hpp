#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detkit/geometry.hpp"

namespace detkit {

// Row-major 2-D grid; at(y, x) with y the row index.
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0);

  double& at(int y, int x) { return data[static_cast<std::size_t>(y) * cols + x]; }
  double at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * cols + x];
  }
};

// Per-class keypoint likelihood map at 1/stride of the input resolution.
// Values live in [0, 1].
struct Heatmap {
  Grid grid;
  int stride = 1;
};

// Ground-truth center point with its quantized grid cell, size-adaptive
// Gaussian sigma, and the sub-cell offset lost to quantization.
struct KeypointTarget {
  double gt_x = 0.0, gt_y = 0.0;  // input pixels
  int cell_x = 0, cell_y = 0;     // floor(gt / stride)
  double sigma = 1.0;
  double off_x = 0.0, off_y = 0.0;  // gt/stride - cell, in [0, 1)
};

KeypointTarget make_keypoint_target(double gt_x, double gt_y, int stride,
                                    double sigma);

// Sigma rule for Gaussian splats: max(0.5, (w + h) / 12) with w, h in grid
// cells (radius (w + h)/4, sigma = radius / 3).
double adaptive_sigma(double w_grid, double h_grid);

// Per-object absolute width/height regression target, in input pixels.
struct SizeTarget {
  int category = 0;
  double w = 0.0, h = 0.0;

  SizeTarget() = default;
  SizeTarget(int category, double w, double h);
};

// Strictly increasing per-stage quality thresholds of a cascade.
struct CascadeStageConfig {
  explicit CascadeStageConfig(std::vector<double> thresholds);
  int stages() const { return static_cast<int>(thresholds.size()); }
  std::vector<double> thresholds;
};

// Smooth L1: 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);
double smooth_l1_grad(double x);

// Sum of smooth L1 over the four corner-coordinate differences.
double bbox_reg_loss(const BBox& pred, const BBox& gt);
// Partials w.r.t. the prediction's (x_tl, y_tl, x_br, y_br).
std::array<double, 4> bbox_reg_loss_grad(const BBox& pred, const BBox& gt);
// Summed form over aligned prediction/ground-truth lists.
double total_reg_loss(std::span<const BBox> preds, std::span<const BBox> gts);

// -log p(y|x) plus, for foreground labels (y >= 1), the box regression term.
// A zero probability is an explicit error rather than a silent infinity.
double cascade_stage_loss(double prob_true_label, int label, const BBox& pred,
                          const BBox& gt);

using BoxRegressor = std::function<BBox(const BBox&)>;

// Applies regressors in order: d_N(... d_2(d_1(x)) ...).
BBox cascade_compose(std::span<const BoxRegressor> regressors,
                     const BBox& input);

struct KeypointSpec {
  double x = 0.0, y = 0.0;  // ground-truth point, input pixels
  double sigma = 1.0;
};

// Renders ground-truth Gaussians centered on each object's quantized cell;
// overlapping objects combine by element-wise max so values stay in [0, 1].
// The peak cell of every object is exactly 1.
Heatmap render_heatmap(std::span<const KeypointSpec> objects, int rows,
                       int cols, int stride);

// Penalty-reduced focal loss over heatmap cells: at gt == 1 cells
// (1-p)^2 log p, elsewhere (1-gt)^4 p^2 log(1-p), averaged over K keypoints
// and negated. Predictions are clamped away from hard 0/1 before logs;
// exact matches against a 0/1 target contribute exactly 0.
double focal_keypoint_loss(const Heatmap& pred, const Heatmap& gt, int K);
// Partials w.r.t. each predicted cell value.
Grid focal_keypoint_loss_grad(const Heatmap& pred, const Heatmap& gt, int K);

// Mean L1 between predicted offsets and the quantization residual
// gt/stride - cell, both components.
double offset_loss(std::span<const std::pair<double, double>> pred_offsets,
                   std::span<const KeypointTarget> targets, int K);
std::vector<std::pair<double, double>> offset_loss_grad(
    std::span<const std::pair<double, double>> pred_offsets,
    std::span<const KeypointTarget> targets, int K);

// Mean L1 between predicted and true (w, h) pairs.
double size_loss(std::span<const std::pair<double, double>> pred_wh,
                 std::span<const SizeTarget> targets);
std::vector<std::pair<double, double>> size_loss_grad(
    std::span<const std::pair<double, double>> pred_wh,
    std::span<const SizeTarget> targets);

double combined_centernet_loss(double keypoint, double size, double offset,
                               double lambda_size = 0.1,
                               double lambda_offset = 1.0);

// Center cell + offset + size (grid units) to a corner-form box in input
// pixels: ((cx+ox-w/2)*R, (cy+oy-h/2)*R, (cx+ox+w/2)*R, (cy+oy+h/2)*R).
BBox decode_center(double cell_x, double cell_y, double off_x, double off_y,
                   double w, double h, int stride);

struct Peak {
  int x = 0, y = 0;
  double score = 0.0;
};

// Cells that are the strict maximum of their window x window neighbourhood
// and strictly positive; top k by value, descending.
std::vector<Peak> peak_pick(const Heatmap& h, int k, int window);

// Self-test battery behind the CLI `refmath check` subcommand.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<CheckResult> run_refmath_checks(std::uint64_t seed = 0);

}  // namespace detkit
