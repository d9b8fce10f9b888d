#include "detkit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "detkit/parallel.hpp"

namespace detkit {

namespace {

void check_single_image(std::span<const ScoredDetection> dets,
                        const char* op) {
  for (const ScoredDetection& d : dets)
    if (d.image != dets.front().image)
      throw ContractViolation(std::string(op) +
                              " operates on a single image, got ids " +
                              std::to_string(dets.front().image) + " and " +
                              std::to_string(d.image));
}

void check_config(const FusionConfig& cfg) {
  if (!(cfg.match_iou > 0.0 && cfg.match_iou < 1.0))
    throw ValidationError("match_iou must be in (0, 1), got " +
                          std::to_string(cfg.match_iou));
  if (cfg.num_models < 1)
    throw ValidationError("num_models must be >= 1");
  if (!(cfg.score_floor >= 0.0 && cfg.score_floor < 1.0))
    throw ValidationError("score_floor must be in [0, 1)");
}

double model_weight(const FusionConfig& cfg, int model) {
  if (cfg.model_weights.empty()) return 1.0;
  if (model < 0 || static_cast<std::size_t>(model) >= cfg.model_weights.size())
    return 1.0;
  return cfg.model_weights[static_cast<std::size_t>(model)];
}

// Processing order: descending score, ties by model id then input order.
std::vector<std::size_t> score_order(std::span<const ScoredDetection> dets) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].model != dets[b].model) return dets[a].model < dets[b].model;
    return a < b;
  });
  return order;
}

// Recomputes the running fusion from the member list: mean score, and
// score-weighted mean of each corner coordinate.
void refresh_fused(FusionCluster& cluster) {
  double score_sum = 0.0;
  double x_tl = 0.0, y_tl = 0.0, x_br = 0.0, y_br = 0.0;
  for (const ScoredDetection& m : cluster.members) {
    score_sum += m.score;
    x_tl += m.score * m.box.x_tl;
    y_tl += m.score * m.box.y_tl;
    x_br += m.score * m.box.x_br;
    y_br += m.score * m.box.y_br;
  }
  const double mean_score = score_sum / static_cast<double>(cluster.members.size());
  BBox box = cluster.members.front().box;
  if (score_sum > 0.0)
    box = BBox(x_tl / score_sum, y_tl / score_sum, x_br / score_sum,
               y_br / score_sum);
  const ScoredDetection& first = cluster.members.front();
  cluster.fused =
      ScoredDetection(box, mean_score, cluster.category, first.model,
                      first.image);
}

}  // namespace

std::vector<FusionCluster> wbf_cluster(std::span<const ScoredDetection> dets,
                                       const FusionConfig& cfg) {
  check_config(cfg);
  if (dets.empty()) return {};
  check_single_image(dets, "wbf_cluster");

  std::vector<FusionCluster> clusters;
  for (std::size_t idx : score_order(dets)) {
    ScoredDetection det = dets[idx];
    const double w = model_weight(cfg, det.model);
    if (w != 1.0)
      det = ScoredDetection(det.box, std::clamp(det.score * w, 0.0, 1.0),
                            det.category, det.model, det.image);
    FusionCluster* target = nullptr;
    for (FusionCluster& c : clusters) {
      if (c.category != det.category) continue;
      if (iou(det.box, c.fused.box) > cfg.match_iou) {
        target = &c;
        break;
      }
    }
    if (target) {
      target->members.push_back(det);
      refresh_fused(*target);
    } else {
      FusionCluster c;
      c.category = det.category;
      c.members.push_back(det);
      refresh_fused(c);
      clusters.push_back(std::move(c));
    }
  }
  return clusters;
}

std::vector<ScoredDetection> wbf_fuse(std::span<const ScoredDetection> dets,
                                      const FusionConfig& cfg) {
  std::vector<FusionCluster> clusters = wbf_cluster(dets, cfg);
  std::vector<ScoredDetection> out;
  out.reserve(clusters.size());
  for (const FusionCluster& c : clusters) {
    ScoredDetection fused = c.fused;
    if (cfg.rescale_mode == RescaleMode::clamped_count) {
      const double n = static_cast<double>(c.members.size());
      const double m = static_cast<double>(cfg.num_models);
      const double factor = std::min(n, m) / m;
      fused = ScoredDetection(fused.box, fused.score * factor, fused.category,
                              fused.model, fused.image);
    }
    if (fused.score < cfg.score_floor) continue;
    out.push_back(fused);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) {
                     return a.score > b.score;
                   });
  return out;
}

std::vector<ScoredDetection> nms(std::span<const ScoredDetection> dets,
                                 double iou_thresh) {
  if (dets.empty()) return {};
  check_single_image(dets, "nms");

  std::vector<ScoredDetection> kept;
  for (std::size_t idx : score_order(dets)) {
    const ScoredDetection& d = dets[idx];
    bool suppressed = false;
    for (const ScoredDetection& k : kept) {
      if (k.category != d.category) continue;
      if (iou(d.box, k.box) >= iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<ScoredDetection> soft_nms(std::span<const ScoredDetection> dets,
                                      double iou_thresh, SoftNmsMode mode,
                                      double sigma, double score_floor) {
  if (dets.empty()) return {};
  check_single_image(dets, "soft_nms");
  if (mode == SoftNmsMode::gaussian && !(sigma > 0.0))
    throw ValidationError("gaussian soft-nms requires sigma > 0");

  // Working copy, processed greedily by current score within each category.
  std::vector<ScoredDetection> pool(dets.begin(), dets.end());
  std::vector<bool> done(pool.size(), false);
  std::vector<ScoredDetection> out;
  for (;;) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (done[i]) continue;
      if (best == pool.size() || pool[i].score > pool[best].score)
        best = i;
    }
    if (best == pool.size()) break;
    done[best] = true;
    const ScoredDetection picked = pool[best];
    out.push_back(picked);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (done[i] || pool[i].category != picked.category) continue;
      const double ov = iou(picked.box, pool[i].box);
      double decay = 1.0;
      if (mode == SoftNmsMode::linear) {
        if (ov > iou_thresh) decay = 1.0 - ov;
      } else {
        decay = std::exp(-(ov * ov) / sigma);
      }
      if (decay != 1.0)
        pool[i] = ScoredDetection(pool[i].box, pool[i].score * decay,
                                  pool[i].category, pool[i].model,
                                  pool[i].image);
    }
  }
  std::erase_if(out,
                [&](const ScoredDetection& d) { return d.score < score_floor; });
  std::stable_sort(out.begin(), out.end(),
                   [](const ScoredDetection& a, const ScoredDetection& b) {
                     return a.score > b.score;
                   });
  return out;
}

DetectionFile ensemble(const std::vector<DetectionFile>& det_files,
                       const FusionConfig& cfg, int threads) {
  if (det_files.empty())
    throw ContractViolation("ensemble requires at least one detection file");
  if (cfg.num_models != static_cast<int>(det_files.size()))
    throw ContractViolation("cfg.num_models (" +
                            std::to_string(cfg.num_models) +
                            ") must equal the number of input files (" +
                            std::to_string(det_files.size()) + ")");
  check_config(cfg);

  int fresh_model = 0;
  std::map<long long, std::vector<ScoredDetection>> per_image;
  for (const DetectionFile& f : det_files) {
    fresh_model = std::max(fresh_model, f.model + 1);
    for (const ScoredDetection& d : f.detections)
      per_image[d.image].push_back(d);
  }

  std::vector<const std::vector<ScoredDetection>*> groups;
  groups.reserve(per_image.size());
  for (const auto& [id, dets] : per_image) groups.push_back(&dets);

  std::vector<std::vector<ScoredDetection>> fused(groups.size());
  parallel_for(groups.size(), threads,
               [&](std::size_t i) { fused[i] = wbf_fuse(*groups[i], cfg); });

  DetectionFile out;
  out.model = fresh_model;
  for (const auto& image_dets : fused)
    for (const ScoredDetection& d : image_dets)
      out.detections.emplace_back(d.box, d.score, d.category, fresh_model,
                                  d.image);
  return out;
}

}  // namespace detkit
