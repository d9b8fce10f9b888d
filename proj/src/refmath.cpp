#include "detkit/refmath.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace detkit {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

Grid::Grid(int rows, int cols, double fill)
    : rows(rows), cols(cols),
      data(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
           fill) {
  if (rows < 0 || cols < 0)
    throw ValidationError("grid dimensions must be non-negative");
}

KeypointTarget make_keypoint_target(double gt_x, double gt_y, int stride,
                                    double sigma) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (gt_x < 0.0 || gt_y < 0.0)
    throw ValidationError("ground-truth point must be non-negative");
  KeypointTarget t;
  t.gt_x = gt_x;
  t.gt_y = gt_y;
  t.sigma = sigma;
  t.cell_x = static_cast<int>(std::floor(gt_x / stride));
  t.cell_y = static_cast<int>(std::floor(gt_y / stride));
  t.off_x = gt_x / stride - t.cell_x;
  t.off_y = gt_y / stride - t.cell_y;
  return t;
}

double adaptive_sigma(double w_grid, double h_grid) {
  const double radius = (w_grid + h_grid) / 4.0;
  return std::max(0.5, radius / 3.0);
}

SizeTarget::SizeTarget(int category, double w, double h)
    : category(category), w(w), h(h) {
  if (w < 0.0 || h < 0.0)
    throw ValidationError("size target components must be non-negative");
}

CascadeStageConfig::CascadeStageConfig(std::vector<double> thresholds)
    : thresholds(std::move(thresholds)) {
  if (this->thresholds.empty())
    throw ValidationError("cascade needs at least one stage");
  double prev = 0.0;
  for (double q : this->thresholds) {
    if (!(q > prev && q < 1.0))
      throw ValidationError(
          "stage thresholds must be strictly increasing within (0, 1)");
    prev = q;
  }
}

double smooth_l1(double x) {
  if (!std::isfinite(x)) throw ValidationError("smooth_l1 input must be finite");
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  const double a = std::abs(x);
  if (a < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

double bbox_reg_loss(const BBox& pred, const BBox& gt) {
  return smooth_l1(pred.x_tl - gt.x_tl) + smooth_l1(pred.y_tl - gt.y_tl) +
         smooth_l1(pred.x_br - gt.x_br) + smooth_l1(pred.y_br - gt.y_br);
}

std::array<double, 4> bbox_reg_loss_grad(const BBox& pred, const BBox& gt) {
  return {smooth_l1_grad(pred.x_tl - gt.x_tl),
          smooth_l1_grad(pred.y_tl - gt.y_tl),
          smooth_l1_grad(pred.x_br - gt.x_br),
          smooth_l1_grad(pred.y_br - gt.y_br)};
}

double total_reg_loss(std::span<const BBox> preds, std::span<const BBox> gts) {
  if (preds.size() != gts.size())
    throw ContractViolation("prediction/ground-truth lists must align");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    sum += bbox_reg_loss(preds[i], gts[i]);
  return sum;
}

double cascade_stage_loss(double prob_true_label, int label, const BBox& pred,
                          const BBox& gt) {
  if (prob_true_label == 0.0)
    throw ValidationError(
        "classification probability 0 gives infinite loss");
  if (!(prob_true_label > 0.0 && prob_true_label <= 1.0))
    throw ValidationError("classification probability must be in (0, 1]");
  double loss = -std::log(prob_true_label);
  if (label >= 1) loss += bbox_reg_loss(pred, gt);
  return loss;
}

BBox cascade_compose(std::span<const BoxRegressor> regressors,
                     const BBox& input) {
  if (regressors.empty())
    throw ContractViolation("cascade_compose needs at least one regressor");
  BBox box = input;
  for (const BoxRegressor& d : regressors) box = d(box);
  return box;
}

Heatmap render_heatmap(std::span<const KeypointSpec> objects, int rows,
                       int cols, int stride) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  Heatmap h;
  h.stride = stride;
  h.grid = Grid(rows, cols, 0.0);
  for (const KeypointSpec& obj : objects) {
    if (!(obj.sigma > 0.0)) throw ValidationError("sigma must be positive");
    const KeypointTarget t =
        make_keypoint_target(obj.x, obj.y, stride, obj.sigma);
    const double inv = 1.0 / (2.0 * obj.sigma * obj.sigma);
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        const double dx = x - t.cell_x;
        const double dy = y - t.cell_y;
        const double v = std::exp(-(dx * dx + dy * dy) * inv);
        if (v > h.grid.at(y, x)) h.grid.at(y, x) = v;
      }
    }
  }
  return h;
}

namespace {

void check_same_shape(const Heatmap& a, const Heatmap& b) {
  if (a.grid.rows != b.grid.rows || a.grid.cols != b.grid.cols)
    throw ContractViolation("heatmap shapes must match");
}

}  // namespace

double focal_keypoint_loss(const Heatmap& pred, const Heatmap& gt, int K) {
  check_same_shape(pred, gt);
  if (K < 1) throw ValidationError("keypoint count must be >= 1");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.grid.data.size(); ++i) {
    const double g = gt.grid.data[i];
    const double p_raw = pred.grid.data[i];
    if (g == 1.0) {
      if (p_raw == 1.0) continue;  // exact match, zero contribution
      const double p = clamp_prob(p_raw);
      sum += (1.0 - p) * (1.0 - p) * std::log(p);
    } else {
      if (p_raw == 0.0) continue;
      const double p = clamp_prob(p_raw);
      const double w = std::pow(1.0 - g, 4.0);
      sum += w * p * p * std::log(1.0 - p);
    }
  }
  return -sum / static_cast<double>(K);
}

Grid focal_keypoint_loss_grad(const Heatmap& pred, const Heatmap& gt, int K) {
  check_same_shape(pred, gt);
  if (K < 1) throw ValidationError("keypoint count must be >= 1");
  Grid out(pred.grid.rows, pred.grid.cols, 0.0);
  const double scale = -1.0 / static_cast<double>(K);
  for (std::size_t i = 0; i < pred.grid.data.size(); ++i) {
    const double g = gt.grid.data[i];
    const double p = clamp_prob(pred.grid.data[i]);
    double d;
    if (g == 1.0) {
      d = -2.0 * (1.0 - p) * std::log(p) + (1.0 - p) * (1.0 - p) / p;
    } else {
      const double w = std::pow(1.0 - g, 4.0);
      d = w * (2.0 * p * std::log(1.0 - p) - p * p / (1.0 - p));
    }
    out.data[i] = scale * d;
  }
  return out;
}

double offset_loss(std::span<const std::pair<double, double>> pred_offsets,
                   std::span<const KeypointTarget> targets, int K) {
  if (pred_offsets.size() != targets.size())
    throw ContractViolation("offset prediction/target lists must align");
  if (K != static_cast<int>(targets.size()) || K < 1)
    throw ContractViolation("K must equal the keypoint list length");
  // |o_pred + cell - gt/stride| per component; off_* stores gt/stride - cell.
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const KeypointTarget& t = targets[i];
    sum += std::abs(pred_offsets[i].first - t.off_x) +
           std::abs(pred_offsets[i].second - t.off_y);
  }
  return sum / static_cast<double>(K);
}

std::vector<std::pair<double, double>> offset_loss_grad(
    std::span<const std::pair<double, double>> pred_offsets,
    std::span<const KeypointTarget> targets, int K) {
  if (pred_offsets.size() != targets.size())
    throw ContractViolation("offset prediction/target lists must align");
  if (K != static_cast<int>(targets.size()) || K < 1)
    throw ContractViolation("K must equal the keypoint list length");
  const double inv = 1.0 / static_cast<double>(K);
  std::vector<std::pair<double, double>> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double rx = pred_offsets[i].first - targets[i].off_x;
    const double ry = pred_offsets[i].second - targets[i].off_y;
    out[i] = {inv * (rx > 0.0 ? 1.0 : (rx < 0.0 ? -1.0 : 0.0)),
              inv * (ry > 0.0 ? 1.0 : (ry < 0.0 ? -1.0 : 0.0))};
  }
  return out;
}

double size_loss(std::span<const std::pair<double, double>> pred_wh,
                 std::span<const SizeTarget> targets) {
  if (pred_wh.size() != targets.size())
    throw ContractViolation("size prediction/target lists must align");
  if (targets.empty())
    throw ContractViolation("size loss needs at least one object");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    sum += std::abs(pred_wh[i].first - targets[i].w) +
           std::abs(pred_wh[i].second - targets[i].h);
  return sum / static_cast<double>(targets.size());
}

std::vector<std::pair<double, double>> size_loss_grad(
    std::span<const std::pair<double, double>> pred_wh,
    std::span<const SizeTarget> targets) {
  if (pred_wh.size() != targets.size())
    throw ContractViolation("size prediction/target lists must align");
  if (targets.empty())
    throw ContractViolation("size loss needs at least one object");
  const double inv = 1.0 / static_cast<double>(targets.size());
  std::vector<std::pair<double, double>> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double rw = pred_wh[i].first - targets[i].w;
    const double rh = pred_wh[i].second - targets[i].h;
    out[i] = {inv * (rw > 0.0 ? 1.0 : (rw < 0.0 ? -1.0 : 0.0)),
              inv * (rh > 0.0 ? 1.0 : (rh < 0.0 ? -1.0 : 0.0))};
  }
  return out;
}

double combined_centernet_loss(double keypoint, double size, double offset,
                               double lambda_size, double lambda_offset) {
  if (!std::isfinite(keypoint) || !std::isfinite(size) ||
      !std::isfinite(offset))
    throw ValidationError("loss terms must be finite");
  return keypoint + lambda_size * size + lambda_offset * offset;
}

BBox decode_center(double cell_x, double cell_y, double off_x, double off_y,
                   double w, double h, int stride) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  if (w < 0.0 || h < 0.0)
    throw ValidationError("decoded size must be non-negative");
  const double cx = cell_x + off_x;
  const double cy = cell_y + off_y;
  return BBox((cx - w / 2.0) * stride, (cy - h / 2.0) * stride,
              (cx + w / 2.0) * stride, (cy + h / 2.0) * stride);
}

std::vector<Peak> peak_pick(const Heatmap& h, int k, int window) {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (window < 1 || window % 2 == 0)
    throw ValidationError("window must be a positive odd size");
  const int half = window / 2;
  std::vector<Peak> peaks;
  for (int y = 0; y < h.grid.rows; ++y) {
    for (int x = 0; x < h.grid.cols; ++x) {
      const double v = h.grid.at(y, x);
      if (!(v > 0.0)) continue;
      bool strict_max = true;
      for (int dy = -half; dy <= half && strict_max; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int ny = y + dy;
          const int nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h.grid.rows || nx >= h.grid.cols)
            continue;
          if (h.grid.at(ny, nx) >= v) {
            strict_max = false;
            break;
          }
        }
      }
      if (strict_max) peaks.push_back({x, y, v});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (static_cast<int>(peaks.size()) > k)
    peaks.resize(static_cast<std::size_t>(k));
  return peaks;
}

}  // namespace detkit
