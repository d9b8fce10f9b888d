#pragma once

#include "detkit/errors.hpp"

namespace detkit {

// Axis-aligned box in corner form. Coordinates are continuous pixels;
// zero-area boxes are allowed, negative extents are not.
struct BBox {
  double x_tl = 0.0;
  double y_tl = 0.0;
  double x_br = 0.0;
  double y_br = 0.0;

  BBox() = default;
  BBox(double x_tl, double y_tl, double x_br, double y_br);

  double width() const { return x_br - x_tl; }
  double height() const { return y_br - y_tl; }

  friend bool operator==(const BBox& a, const BBox& b) = default;
};

double area(const BBox& b);
double intersection(const BBox& a, const BBox& b);

// Intersection over union. Defined as 0 when the union has zero area, so two
// coincident degenerate boxes never count as a match.
double iou(const BBox& a, const BBox& b);

// Strict comparison: true iff iou(pred, gt) > t. The evaluator uses the
// non-strict detection_matches() instead; both predicates exist by design.
bool meets_quality(const BBox& pred, const BBox& gt, double t);

// Non-strict variant used by the evaluation protocol: iou >= t.
bool detection_matches(const BBox& pred, const BBox& gt, double t);

// Lifts (x, y, width, height) storage form to corner form.
BBox from_xywh(double x, double y, double w, double h);

// Clips a box to [0, width] x [0, height]. A box fully outside collapses to a
// zero-area box on the border.
BBox clip_box(const BBox& b, double width, double height);

}  // namespace detkit
