#include "detkit/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "detkit/parallel.hpp"

namespace detkit {

MatchResult match_detections(std::span<const ScoredDetection> dets,
                             std::span<const GroundTruthBox> gts,
                             double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0))
    throw ValidationError("iou threshold must be in (0, 1]");

  std::vector<int> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  MatchResult result;
  std::vector<bool> taken(gts.size(), false);
  for (const GroundTruthBox& g : gts)
    if (!g.crowd_flag) ++result.num_gt;

  for (int idx : order) {
    const ScoredDetection& d = dets[idx];
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (gts[j].crowd_flag || taken[j]) continue;
      const double ov = iou(d.box, gts[j].box);
      if (ov >= iou_thresh && ov > best_iou) {
        best_iou = ov;
        best_gt = static_cast<int>(j);
      }
    }
    DetectionMatch m;
    m.det_index = idx;
    m.score = d.score;
    if (best_gt >= 0) {
      taken[best_gt] = true;
      m.flag = MatchFlag::tp;
      m.gt_index = best_gt;
    } else {
      m.flag = MatchFlag::fp;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (!gts[j].crowd_flag) continue;
        if (iou(d.box, gts[j].box) >= iou_thresh) {
          m.flag = MatchFlag::ignored;
          break;
        }
      }
    }
    result.detections.push_back(m);
  }
  return result;
}

std::vector<PrPoint> pr_curve(std::span<const DetectionMatch> ordered,
                              int num_gt) {
  if (num_gt < 0) throw ValidationError("num_gt must be non-negative");
  std::vector<PrPoint> curve;
  int tp = 0, fp = 0;
  for (const DetectionMatch& m : ordered) {
    if (m.flag == MatchFlag::ignored) continue;
    if (m.flag == MatchFlag::tp)
      ++tp;
    else
      ++fp;
    PrPoint p;
    p.recall = num_gt > 0 ? static_cast<double>(tp) / num_gt : 0.0;
    p.precision = static_cast<double>(tp) / (tp + fp);
    curve.push_back(p);
  }
  return curve;
}

double average_precision(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0.0;
  // Precision envelope from the right, then sample the 101-point grid.
  const std::size_t n = curve.size();
  std::vector<double> envelope(n);
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double sum = 0.0;
  std::size_t j = 0;
  for (int g = 0; g <= 100; ++g) {
    const double r = g / 100.0;
    while (j < n && curve[j].recall < r) ++j;
    if (j < n) sum += envelope[j];
  }
  return sum / 101.0;
}

EvalConfig::EvalConfig() {
  for (int i = 0; i < 10; ++i) thresholds.push_back((50 + 5 * i) / 100.0);
}

EvalConfig coco_eval_config() { return EvalConfig{}; }

EvalConfig visdrone_eval_config() {
  EvalConfig cfg;
  cfg.max_dets = 500;
  return cfg;
}

namespace {

// Key for the cross-image aggregation sort: score desc, then image id and
// per-image input order for determinism.
struct RankedMatch {
  DetectionMatch match;
  long long image = 0;
};

double threshold_lookup(const EvalReport& report, double t) {
  for (std::size_t i = 0; i < report.thresholds.size(); ++i)
    if (std::abs(report.thresholds[i] - t) < 1e-9)
      return report.class_mean_ap[i];
  return std::nan("");
}

}  // namespace

EvalReport evaluate(const DetectionFile& dets, const Dataset& ds,
                    const EvalConfig& cfg, int threads) {
  if (cfg.thresholds.empty())
    throw ValidationError("evaluation needs at least one IoU threshold");
  if (cfg.max_dets < 1) throw ValidationError("max_dets must be >= 1");

  std::set<long long> image_ids;
  for (const ImageInfo& img : ds.images) image_ids.insert(img.id);
  for (const ScoredDetection& d : dets.detections) {
    if (!image_ids.count(d.image))
      throw ReferenceError("detection references unknown image id " +
                           std::to_string(d.image));
    if (!ds.categories.contains(d.category))
      throw ReferenceError("detection references unknown category id " +
                           std::to_string(d.category));
  }

  // Per-image cap: keep the max_dets highest-scored detections.
  std::map<long long, std::vector<ScoredDetection>> dets_by_image;
  for (const ScoredDetection& d : dets.detections)
    dets_by_image[d.image].push_back(d);
  for (auto& [id, list] : dets_by_image) {
    if (static_cast<int>(list.size()) <= cfg.max_dets) continue;
    std::vector<int> order(list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (list[a].score != list[b].score) return list[a].score > list[b].score;
      return a < b;
    });
    order.resize(static_cast<std::size_t>(cfg.max_dets));
    std::sort(order.begin(), order.end());  // preserve input order
    std::vector<ScoredDetection> capped;
    capped.reserve(order.size());
    for (int i : order) capped.push_back(list[i]);
    list = std::move(capped);
  }

  // Group by (category, image).
  struct PerCategory {
    std::map<long long, std::vector<ScoredDetection>> dets;
    std::map<long long, std::vector<GroundTruthBox>> gts;
    int num_gt = 0;
  };
  std::map<int, PerCategory> by_category;
  for (const auto& [cid, name] : ds.categories.entries())
    by_category[cid];  // keep table order semantics via sorted ids
  for (const auto& [image, list] : dets_by_image)
    for (const ScoredDetection& d : list)
      by_category[d.category].dets[image].push_back(d);
  for (const GroundTruthBox& g : ds.ground_truth) {
    auto it = by_category.find(g.category);
    if (it == by_category.end())
      throw ReferenceError("ground truth references unknown category id " +
                           std::to_string(g.category));
    it->second.gts[g.image].push_back(g);
    if (!g.crowd_flag) ++it->second.num_gt;
  }

  EvalReport report;
  report.thresholds = cfg.thresholds;
  for (const auto& [cid, data] : by_category)
    if (data.num_gt > 0) report.category_ids.push_back(cid);

  const std::size_t num_cats = report.category_ids.size();
  const std::size_t num_thrs = cfg.thresholds.size();
  report.ap.assign(num_cats, std::vector<double>(num_thrs, 0.0));

  parallel_for(num_cats * num_thrs, threads, [&](std::size_t job) {
    const std::size_t ci = job / num_thrs;
    const std::size_t ti = job % num_thrs;
    const PerCategory& cat = by_category.at(report.category_ids[ci]);
    const double thr = cfg.thresholds[ti];

    std::vector<RankedMatch> all;
    int num_gt = 0;
    for (long long image : image_ids) {
      auto dit = cat.dets.find(image);
      auto git = cat.gts.find(image);
      static const std::vector<ScoredDetection> no_dets;
      static const std::vector<GroundTruthBox> no_gts;
      const auto& image_dets = dit == cat.dets.end() ? no_dets : dit->second;
      const auto& image_gts = git == cat.gts.end() ? no_gts : git->second;
      if (image_dets.empty() && image_gts.empty()) continue;
      MatchResult mr = match_detections(image_dets, image_gts, thr);
      num_gt += mr.num_gt;
      for (const DetectionMatch& m : mr.detections)
        all.push_back({m, image});
    }
    std::sort(all.begin(), all.end(), [](const RankedMatch& a,
                                         const RankedMatch& b) {
      if (a.match.score != b.match.score) return a.match.score > b.match.score;
      if (a.image != b.image) return a.image < b.image;
      return a.match.det_index < b.match.det_index;
    });
    std::vector<DetectionMatch> ordered;
    ordered.reserve(all.size());
    for (const RankedMatch& r : all) ordered.push_back(r.match);
    report.ap[ci][ti] = average_precision(pr_curve(ordered, num_gt));
  });

  report.class_mean_ap.assign(num_thrs, 0.0);
  if (num_cats > 0) {
    for (std::size_t ti = 0; ti < num_thrs; ++ti) {
      double sum = 0.0;
      for (std::size_t ci = 0; ci < num_cats; ++ci) sum += report.ap[ci][ti];
      report.class_mean_ap[ti] = sum / static_cast<double>(num_cats);
    }
    double sum = 0.0;
    for (double v : report.class_mean_ap) sum += v;
    report.map_c = sum / static_cast<double>(num_thrs);
  }
  report.map_50 = threshold_lookup(report, 0.50);
  report.map_75 = threshold_lookup(report, 0.75);

  for (std::size_t ci = 0; ci < num_cats; ++ci) {
    for (std::size_t ti = 0; ti < num_thrs; ++ti) {
      if (std::abs(cfg.thresholds[ti] - 0.50) < 1e-9) {
        report.per_class_ap50.emplace_back(report.category_ids[ci],
                                           report.ap[ci][ti]);
        break;
      }
    }
  }
  return report;
}

namespace {

std::string fixed4(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_report_table(const EvalReport& report,
                                const CategoryTable& categories) {
  std::string out;
  out += "metric    value\n";
  out += "map_c     " + fixed4(report.map_c) + "\n";
  out += "map_50    " + fixed4(report.map_50) + "\n";
  out += "map_75    " + fixed4(report.map_75) + "\n";
  if (!report.per_class_ap50.empty()) {
    out += "\nclass                      ap_50\n";
    for (const auto& [cid, ap] : report.per_class_ap50) {
      const std::string* name = categories.name_of(cid);
      std::string label = name && !name->empty()
                              ? *name
                              : "category " + std::to_string(cid);
      label.resize(std::max<std::size_t>(label.size(), 26), ' ');
      out += label + " " + fixed4(ap) + "\n";
    }
  }
  return out;
}

std::string report_to_json(const EvalReport& report,
                           const CategoryTable& categories) {
  nlohmann::json j;
  j["map_c"] = report.map_c;
  j["map_50"] = report.map_50;
  j["map_75"] = report.map_75;
  j["thresholds"] = report.thresholds;
  j["class_mean_ap"] = report.class_mean_ap;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t ci = 0; ci < report.category_ids.size(); ++ci) {
    nlohmann::json c;
    const int cid = report.category_ids[ci];
    c["id"] = cid;
    const std::string* name = categories.name_of(cid);
    c["name"] = name ? *name : "";
    c["ap"] = report.ap[ci];
    for (const auto& [pid, ap50] : report.per_class_ap50)
      if (pid == cid) c["ap_50"] = ap50;
    classes.push_back(std::move(c));
  }
  j["per_class"] = std::move(classes);
  return j.dump(2);
}

}  // namespace detkit
