#include "detkit/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "detkit/parallel.hpp"
#include "detkit/rng.hpp"

namespace detkit {

SceneConfig::SceneConfig()
    : class_weights{0.35, 0.20, 0.12, 0.09, 0.07,
                    0.05, 0.04, 0.03, 0.03, 0.02} {}

DetectorProfile multi_stage_profile() {
  DetectorProfile p;
  p.miss_rate = 0.30;
  p.jitter_sigma = 1.0;
  p.fp_rate = 0.5;
  return p;
}

DetectorProfile single_stage_profile() {
  DetectorProfile p;
  p.miss_rate = 0.05;
  p.jitter_sigma = 6.0;
  p.fp_rate = 3.0;
  return p;
}

namespace {

void check_scene(const SceneConfig& cfg) {
  if (cfg.num_images < 0) throw ValidationError("num_images must be >= 0");
  if (!(cfg.image_width > 0.0 && cfg.image_height > 0.0))
    throw ValidationError("image size must be positive");
  if (cfg.objects_min < 0 || cfg.objects_max < cfg.objects_min)
    throw ValidationError("invalid objects-per-image range");
  if (cfg.class_weights.empty())
    throw ValidationError("class_weights must be non-empty");
  double total = 0.0;
  for (double w : cfg.class_weights) {
    if (!(w >= 0.0)) throw ValidationError("class weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("class weights must sum > 0");
  if (!(cfg.size_min > 0.0 && cfg.size_max >= cfg.size_min))
    throw ValidationError("invalid object size range");
}

void check_profile(const DetectorProfile& p) {
  if (!(p.miss_rate >= 0.0 && p.miss_rate <= 1.0))
    throw ValidationError("miss_rate must be in [0, 1]");
  if (!(p.label_noise >= 0.0 && p.label_noise <= 1.0))
    throw ValidationError("label_noise must be in [0, 1]");
  if (p.jitter_sigma < 0.0 || p.fp_rate < 0.0)
    throw ValidationError("jitter_sigma and fp_rate must be >= 0");
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

int pick_weighted(std::mt19937_64& rng, const std::vector<double>& weights,
                  double total) {
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

MetricStats stats_of(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

Dataset generate_scenes(const SceneConfig& cfg) {
  check_scene(cfg);
  Dataset ds;
  double total_weight = 0.0;
  for (double w : cfg.class_weights) total_weight += w;
  for (std::size_t i = 0; i < cfg.class_weights.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "class%02zu", i + 1);
    ds.categories.add(static_cast<int>(i) + 1, name);
  }

  for (int n = 0; n < cfg.num_images; ++n) {
    const long long image_id = n + 1;
    ImageInfo info;
    info.id = image_id;
    info.width = cfg.image_width;
    info.height = cfg.image_height;
    info.file_name = "synthetic_" + std::to_string(image_id) + ".png";
    ds.images.push_back(std::move(info));

    std::mt19937_64 rng = make_rng(cfg.seed, static_cast<std::uint64_t>(image_id));
    std::uniform_int_distribution<int> count(cfg.objects_min, cfg.objects_max);
    const int objects = count(rng);
    for (int k = 0; k < objects; ++k) {
      const int category = pick_weighted(rng, cfg.class_weights, total_weight) + 1;
      const double w =
          std::min(log_uniform(rng, cfg.size_min, cfg.size_max), cfg.image_width);
      const double h = std::min(log_uniform(rng, cfg.size_min, cfg.size_max),
                                cfg.image_height);
      std::uniform_real_distribution<double> px(0.0, cfg.image_width - w);
      std::uniform_real_distribution<double> py(0.0, cfg.image_height - h);
      const double x = px(rng);
      const double y = py(rng);
      ds.ground_truth.emplace_back(BBox(x, y, x + w, y + h), category, image_id);
    }
  }
  return ds;
}

DetectionFile simulate_detector(const Dataset& ds,
                                const DetectorProfile& profile,
                                std::uint64_t seed, int model) {
  check_profile(profile);
  DetectionFile out;
  out.model = model;

  const int num_categories = static_cast<int>(ds.categories.size());

  for (const ImageInfo& img : ds.images) {
    std::mt19937_64 rng =
        make_rng(seed, static_cast<std::uint64_t>(img.id), 0x51u);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::normal_distribution<double> tp_score(profile.score_model.tp_mean,
                                              profile.score_model.tp_sigma);
    std::normal_distribution<double> fp_score(profile.score_model.fp_mean,
                                              profile.score_model.fp_sigma);

    for (const GroundTruthBox& g : ds.ground_truth) {
      if (g.image != img.id) continue;
      if (u01(rng) < profile.miss_rate) continue;
      double x0 = g.box.x_tl, y0 = g.box.y_tl, x1 = g.box.x_br, y1 = g.box.y_br;
      if (profile.jitter_sigma > 0.0) {
        x0 += profile.jitter_sigma * jitter(rng);
        y0 += profile.jitter_sigma * jitter(rng);
        x1 += profile.jitter_sigma * jitter(rng);
        y1 += profile.jitter_sigma * jitter(rng);
      }
      BBox box(std::min(x0, x1), std::min(y0, y1), std::max(x0, x1),
               std::max(y0, y1));
      if (img.width > 0 && img.height > 0)
        box = clip_box(box, img.width, img.height);
      int category = g.category;
      if (profile.label_noise > 0.0 && num_categories > 1 &&
          u01(rng) < profile.label_noise) {
        // Uniform over the other categories.
        const auto& entries = ds.categories.entries();
        std::uniform_int_distribution<int> pick(0, num_categories - 2);
        int alt = pick(rng);
        for (int i = 0; i <= alt; ++i)
          if (entries[static_cast<std::size_t>(i)].first == g.category) {
            ++alt;
            break;
          }
        category = entries[static_cast<std::size_t>(alt)].first;
      }
      out.detections.emplace_back(box, clamp01(tp_score(rng)), category, model,
                                  img.id);
    }

    if (profile.fp_rate > 0.0) {
      std::poisson_distribution<int> fp_count(profile.fp_rate);
      const int spurious = fp_count(rng);
      for (int k = 0; k < spurious; ++k) {
        // Spurious boxes borrow their size from a random ground-truth box so
        // they share the object statistics.
        double w = 32.0, h = 32.0;
        if (!ds.ground_truth.empty()) {
          std::uniform_int_distribution<std::size_t> pick(
              0, ds.ground_truth.size() - 1);
          const BBox& src = ds.ground_truth[pick(rng)].box;
          w = std::max(1.0, src.width());
          h = std::max(1.0, src.height());
        }
        w = std::min(w, img.width > 0 ? img.width : w);
        h = std::min(h, img.height > 0 ? img.height : h);
        std::uniform_real_distribution<double> px(
            0.0, std::max(0.0, (img.width > 0 ? img.width : 1024.0) - w));
        std::uniform_real_distribution<double> py(
            0.0, std::max(0.0, (img.height > 0 ? img.height : 1024.0) - h));
        const double x = px(rng);
        const double y = py(rng);
        int category = 1;
        if (num_categories > 0) {
          std::uniform_int_distribution<int> pick_cat(0, num_categories - 1);
          category =
              ds.categories.entries()[static_cast<std::size_t>(pick_cat(rng))]
                  .first;
        }
        out.detections.emplace_back(BBox(x, y, x + w, y + h),
                                    clamp01(fp_score(rng)), category, model,
                                    img.id);
      }
    }
  }
  return out;
}

ExperimentReport run_ensemble_experiment(const SceneConfig& scene_cfg,
                                         const DetectorProfile& profile_a,
                                         const DetectorProfile& profile_b,
                                         const FusionConfig& fusion_cfg,
                                         int trials, std::uint64_t seed,
                                         int threads,
                                         const EvalConfig& eval_cfg) {
  if (trials < 1) throw ValidationError("trials must be >= 1");
  check_scene(scene_cfg);
  check_profile(profile_a);
  check_profile(profile_b);

  struct TrialMetrics {
    double a[3], b[3], fused[3];  // map_c, map_50, map_75
  };
  std::vector<TrialMetrics> metrics(static_cast<std::size_t>(trials));

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    SceneConfig cfg = scene_cfg;
    cfg.seed = derive_seed(seed, t, 1);
    const Dataset ds = generate_scenes(cfg);
    const DetectionFile det_a =
        simulate_detector(ds, profile_a, derive_seed(seed, t, 2), 0);
    const DetectionFile det_b =
        simulate_detector(ds, profile_b, derive_seed(seed, t, 3), 1);
    FusionConfig fcfg = fusion_cfg;
    fcfg.num_models = 2;
    const DetectionFile fused = ensemble({det_a, det_b}, fcfg);

    const EvalReport ra = evaluate(det_a, ds, eval_cfg);
    const EvalReport rb = evaluate(det_b, ds, eval_cfg);
    const EvalReport rf = evaluate(fused, ds, eval_cfg);
    metrics[t] = {{ra.map_c, ra.map_50, ra.map_75},
                  {rb.map_c, rb.map_50, rb.map_75},
                  {rf.map_c, rf.map_50, rf.map_75}};
  });

  auto collect = [&](auto member, int idx) {
    std::vector<double> values;
    values.reserve(metrics.size());
    for (const TrialMetrics& m : metrics) values.push_back((m.*member)[idx]);
    return stats_of(values);
  };

  ExperimentReport report;
  report.trials = trials;
  report.a = {collect(&TrialMetrics::a, 0), collect(&TrialMetrics::a, 1),
              collect(&TrialMetrics::a, 2)};
  report.b = {collect(&TrialMetrics::b, 0), collect(&TrialMetrics::b, 1),
              collect(&TrialMetrics::b, 2)};
  report.fused = {collect(&TrialMetrics::fused, 0),
                  collect(&TrialMetrics::fused, 1),
                  collect(&TrialMetrics::fused, 2)};
  return report;
}

namespace {

std::string stat_cell(const MetricStats& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f +/- %.4f", s.mean, s.stddev);
  return buf;
}

nlohmann::json stats_json(const DetectorStats& s) {
  return {{"map_c", {{"mean", s.map_c.mean}, {"stddev", s.map_c.stddev}}},
          {"map_50", {{"mean", s.map_50.mean}, {"stddev", s.map_50.stddev}}},
          {"map_75", {{"mean", s.map_75.mean}, {"stddev", s.map_75.stddev}}}};
}

}  // namespace

std::string render_experiment_table(const ExperimentReport& report) {
  std::string out;
  out += "detector   map_c               map_50              map_75\n";
  const auto row = [&](const char* name, const DetectorStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %-19s %-19s %-19s\n", name,
                  stat_cell(s.map_c).c_str(), stat_cell(s.map_50).c_str(),
                  stat_cell(s.map_75).c_str());
    out += buf;
  };
  row("A", report.a);
  row("B", report.b);
  row("fused", report.fused);
  out += "trials: " + std::to_string(report.trials) + "\n";
  return out;
}

std::string experiment_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["trials"] = report.trials;
  j["a"] = stats_json(report.a);
  j["b"] = stats_json(report.b);
  j["fused"] = stats_json(report.fused);
  return j.dump(2);
}

}  // namespace detkit
