#include <cmath>
#include <random>
#include <sstream>

#include "detkit/refmath.hpp"
#include "detkit/rng.hpp"

namespace detkit {

namespace {

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

bool rel_close(double a, double b, double tol) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) <= tol * scale;
}

CheckResult check(const std::string& name, bool pass,
                  const std::string& detail = {}) {
  return {name, pass, pass ? "" : detail};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

CheckResult scalar_fixtures() {
  struct Case {
    const char* what;
    double got, want;
    double tol;
  };
  const BBox unit(0, 0, 10, 10), shifted(1, 1, 11, 11);
  const Case cases[] = {
      {"smooth_l1(0.5)", smooth_l1(0.5), 0.125, 1e-12},
      {"smooth_l1(-2)", smooth_l1(-2.0), 1.5, 1e-12},
      {"bbox_reg_loss unit shift", bbox_reg_loss(shifted, unit), 2.0, 1e-12},
      {"stage loss background", cascade_stage_loss(0.5, 0, unit, shifted),
       0.6931471805599453, 1e-9},
      {"stage loss foreground", cascade_stage_loss(0.5, 1, shifted, unit),
       2.6931471805599453, 1e-9},
      {"focal peak p=0.5",
       focal_keypoint_loss(
           [] {
             Heatmap h;
             h.grid = Grid(1, 1, 0.5);
             return h;
           }(),
           [] {
             Heatmap h;
             h.grid = Grid(1, 1, 1.0);
             return h;
           }(),
           1),
       0.25 * std::log(2.0), 1e-9},
      {"size_loss fixture",
       size_loss(std::vector<std::pair<double, double>>{{10, 10}},
                 std::vector<SizeTarget>{SizeTarget(0, 8, 12)}),
       4.0, 1e-12},
      {"combined loss", combined_centernet_loss(1.0, 4.0, 0.7), 2.1, 1e-12},
  };
  for (const Case& c : cases)
    if (!close(c.got, c.want, c.tol))
      return check("scalar fixtures", false,
                   std::string(c.what) + ": got " + fmt(c.got) + ", want " +
                       fmt(c.want));
  const BBox decoded = decode_center(50, 50, 0.2, 0.3, 10, 20, 1);
  if (!close(decoded.x_tl, 45.2, 1e-9) || !close(decoded.y_tl, 40.3, 1e-9) ||
      !close(decoded.x_br, 55.2, 1e-9) || !close(decoded.y_br, 60.3, 1e-9))
    return check("scalar fixtures", false, "decode_center fixture mismatch");
  return check("scalar fixtures", true);
}

CheckResult heatmap_fixture() {
  const KeypointSpec obj{8.0, 8.0, 1.0};
  const Heatmap h = render_heatmap(std::span(&obj, 1), 8, 8, 4);
  if (h.grid.at(2, 2) != 1.0)
    return check("heatmap peak", false, "peak cell is not exactly 1");
  if (!close(h.grid.at(2, 3), std::exp(-0.5), 1e-9))
    return check("heatmap peak", false, "neighbour cell mismatch");
  for (double v : h.grid.data)
    if (v < 0.0 || v > 1.0)
      return check("heatmap peak", false, "value outside [0, 1]");
  return check("heatmap peak", true);
}

CheckResult gradient_battery(std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, 17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double step = 1e-5, tol = 1e-4;

  auto fd_ok = [&](double analytic, double lo, double hi) {
    const double fd = (hi - lo) / (2.0 * step);
    return rel_close(analytic, fd, tol);
  };

  for (int i = 0; i < 100; ++i) {
    double x = u(rng);
    if (std::abs(std::abs(x) - 1.0) < 1e-3) x += 0.01;  // away from the kink
    if (!fd_ok(smooth_l1_grad(x), smooth_l1(x - step), smooth_l1(x + step)))
      return check("gradient battery", false,
                   "smooth_l1 gradient mismatch at x=" + fmt(x));
  }

  std::uniform_real_distribution<double> up(0.02, 0.98);
  for (int i = 0; i < 100; ++i) {
    const double g = (i % 2 == 0) ? 1.0 : up(rng);
    const double p = up(rng);
    Heatmap gt, pred_lo, pred_hi, pred;
    gt.grid = Grid(1, 1, g);
    pred.grid = Grid(1, 1, p);
    pred_lo.grid = Grid(1, 1, p - step);
    pred_hi.grid = Grid(1, 1, p + step);
    const Grid grad = focal_keypoint_loss_grad(pred, gt, 1);
    if (!fd_ok(grad.at(0, 0), focal_keypoint_loss(pred_lo, gt, 1),
               focal_keypoint_loss(pred_hi, gt, 1)))
      return check("gradient battery", false,
                   "focal gradient mismatch at p=" + fmt(p));
  }
  return check("gradient battery", true);
}

CheckResult encode_decode_identity(std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, 23);
  std::uniform_int_distribution<int> cell(2, 20);
  std::uniform_int_distribution<int> half_size(1, 6);
  const int stride = 4;
  for (int i = 0; i < 50; ++i) {
    const double w = 2.0 * half_size(rng) * stride;
    const double h = 2.0 * half_size(rng) * stride;
    const double cx = cell(rng) * stride;
    const double cy = cell(rng) * stride;
    const BBox original(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2);
    const KeypointTarget t = make_keypoint_target(cx, cy, stride, 1.0);
    const KeypointSpec spec{cx, cy, 1.0};
    const Heatmap map = render_heatmap(std::span(&spec, 1), 32, 32, stride);
    const std::vector<Peak> peaks = peak_pick(map, 1, 3);
    if (peaks.size() != 1 || peaks[0].x != t.cell_x || peaks[0].y != t.cell_y)
      return check("encode/decode identity", false, "peak not at target cell");
    const BBox decoded =
        decode_center(peaks[0].x, peaks[0].y, t.off_x, t.off_y, w / stride,
                      h / stride, stride);
    if (!close(decoded.x_tl, original.x_tl, 1e-6) ||
        !close(decoded.y_tl, original.y_tl, 1e-6) ||
        !close(decoded.x_br, original.x_br, 1e-6) ||
        !close(decoded.y_br, original.y_br, 1e-6))
      return check("encode/decode identity", false, "box not recovered");
  }
  return check("encode/decode identity", true);
}

}  // namespace

std::vector<CheckResult> run_refmath_checks(std::uint64_t seed) {
  std::vector<CheckResult> results;
  results.push_back(scalar_fixtures());
  results.push_back(heatmap_fixture());
  results.push_back(gradient_battery(seed));
  results.push_back(encode_decode_identity(seed));
  return results;
}

}  // namespace detkit
