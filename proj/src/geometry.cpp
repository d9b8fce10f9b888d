#include "detkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace detkit {

namespace {

bool all_finite(double a, double b, double c, double d) {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) &&
         std::isfinite(d);
}

}  // namespace

BBox::BBox(double x_tl, double y_tl, double x_br, double y_br)
    : x_tl(x_tl), y_tl(y_tl), x_br(x_br), y_br(y_br) {
  if (!all_finite(x_tl, y_tl, x_br, y_br))
    throw ValidationError("box coordinates must be finite");
  if (x_br < x_tl || y_br < y_tl)
    throw ValidationError("box has negative extent: (" + std::to_string(x_tl) +
                          ", " + std::to_string(y_tl) + ", " +
                          std::to_string(x_br) + ", " + std::to_string(y_br) +
                          ")");
}

double area(const BBox& b) { return b.width() * b.height(); }

double intersection(const BBox& a, const BBox& b) {
  const double w =
      std::min(a.x_br, b.x_br) - std::max(a.x_tl, b.x_tl);
  if (w <= 0.0) return 0.0;
  const double h =
      std::min(a.y_br, b.y_br) - std::max(a.y_tl, b.y_tl);
  if (h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection(a, b);
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

bool meets_quality(const BBox& pred, const BBox& gt, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw ValidationError("quality threshold must be in [0, 1]");
  return iou(pred, gt) > t;
}

bool detection_matches(const BBox& pred, const BBox& gt, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw ValidationError("quality threshold must be in [0, 1]");
  return iou(pred, gt) >= t;
}

BBox from_xywh(double x, double y, double w, double h) {
  if (!(w >= 0.0) || !(h >= 0.0))
    throw ValidationError("width/height must be non-negative, got (" +
                          std::to_string(w) + ", " + std::to_string(h) + ")");
  return BBox(x, y, x + w, y + h);
}

BBox clip_box(const BBox& b, double width, double height) {
  const double x0 = std::clamp(b.x_tl, 0.0, width);
  const double y0 = std::clamp(b.y_tl, 0.0, height);
  const double x1 = std::clamp(b.x_br, 0.0, width);
  const double y1 = std::clamp(b.y_br, 0.0, height);
  return BBox(x0, y0, std::max(x0, x1), std::max(y0, y1));
}

}  // namespace detkit
