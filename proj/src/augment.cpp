#include "detkit/augment.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "detkit/parallel.hpp"
#include "detkit/rng.hpp"

namespace detkit {

namespace {

void check_config(const AugmentConfig& cfg) {
  if (cfg.per_source_images < 1)
    throw ValidationError("per_source_images must be >= 1");
  if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
    throw ValidationError("invalid pasted-object range");
  if (!(cfg.scale_jitter_lo > 0.0 &&
        cfg.scale_jitter_hi >= cfg.scale_jitter_lo))
    throw ValidationError("invalid scale jitter range");
}

cv::Rect rounded_rect(const BBox& box) {
  const int x = static_cast<int>(std::lround(box.x_tl));
  const int y = static_cast<int>(std::lround(box.y_tl));
  const int w = static_cast<int>(std::lround(box.width()));
  const int h = static_cast<int>(std::lround(box.height()));
  return {x, y, w, h};
}

// Uniformly picks a bank entry; in balanced mode a category is drawn first.
const InstanceEntry& sample_entry(const InstanceBank& bank,
                                  std::mt19937_64& rng,
                                  bool category_balanced) {
  if (category_balanced) {
    std::uniform_int_distribution<std::size_t> pick_cat(
        0, bank.by_category.size() - 1);
    auto it = bank.by_category.begin();
    std::advance(it, static_cast<long>(pick_cat(rng)));
    std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
    return it->second[pick(rng)];
  }
  std::size_t total = bank.total();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  std::size_t idx = pick(rng);
  for (const auto& [cat, entries] : bank.by_category) {
    if (idx < entries.size()) return entries[idx];
    idx -= entries.size();
  }
  return bank.by_category.rbegin()->second.back();  // unreachable
}

void composite(cv::Mat& scene, const cv::Mat& patch, const cv::Mat& mask,
               int x0, int y0, bool feather) {
  cv::Rect roi(x0, y0, patch.cols, patch.rows);
  cv::Mat target = scene(roi);
  if (!feather) {
    patch.copyTo(target, mask);
    return;
  }
  cv::Mat alpha;
  mask.convertTo(alpha, CV_32F, 1.0 / 255.0);
  cv::GaussianBlur(alpha, alpha, cv::Size(3, 3), 1.0);
  for (int y = 0; y < patch.rows; ++y) {
    const float* a = alpha.ptr<float>(y);
    const cv::Vec3b* src = patch.ptr<cv::Vec3b>(y);
    cv::Vec3b* dst = target.ptr<cv::Vec3b>(y);
    for (int x = 0; x < patch.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = a[x] * src[x][c] + (1.0f - a[x]) * dst[x][c];
        dst[x][c] = static_cast<uchar>(std::lround(v));
      }
    }
  }
}

}  // namespace

std::size_t InstanceBank::total() const {
  std::size_t n = 0;
  for (const auto& [cat, entries] : by_category) n += entries.size();
  return n;
}

InstanceBank extract_instances(const Dataset& ds,
                               const std::filesystem::path& images_dir) {
  InstanceBank bank;
  std::map<long long, cv::Mat> cache;
  for (const GroundTruthBox& g : ds.ground_truth) {
    if (g.crowd_flag) continue;
    const ImageInfo* info = ds.find_image(g.image);
    if (!info) {
      bank.warnings.push_back("instance references unknown image id " +
                              std::to_string(g.image) + ", skipped");
      continue;
    }
    auto it = cache.find(g.image);
    if (it == cache.end()) {
      cv::Mat img = cv::imread((images_dir / info->file_name).string(),
                               cv::IMREAD_COLOR);
      if (img.empty())
        bank.warnings.push_back("unreadable raster " + info->file_name +
                                ", instances skipped");
      it = cache.emplace(g.image, std::move(img)).first;
    }
    const cv::Mat& img = it->second;
    if (img.empty()) continue;

    cv::Rect rect = rounded_rect(g.box);
    rect &= cv::Rect(0, 0, img.cols, img.rows);
    if (rect.width <= 0 || rect.height <= 0) {
      bank.warnings.push_back("zero-area box on image " +
                              std::to_string(g.image) + ", skipped");
      continue;
    }

    InstanceEntry entry;
    entry.patch = img(rect).clone();
    entry.source_image = g.image;
    entry.original_box = g.box;
    entry.category = g.category;
    entry.mask = cv::Mat(rect.height, rect.width, CV_8U, cv::Scalar(255));
    if (!g.mask_path.empty()) {
      cv::Mat m = cv::imread((images_dir / g.mask_path).string(),
                             cv::IMREAD_GRAYSCALE);
      if (m.empty() || m.cols != rect.width || m.rows != rect.height) {
        bank.warnings.push_back("mask " + g.mask_path +
                                " unreadable or wrong size, using rectangle");
      } else {
        cv::threshold(m, entry.mask, 0, 255, cv::THRESH_BINARY);
      }
    }
    bank.by_category[g.category].push_back(std::move(entry));
  }
  return bank;
}

PasteResult paste_compose(const cv::Mat& scene,
                          std::span<const GroundTruthBox> scene_gts,
                          long long image_id, const InstanceBank& bank, int n,
                          std::mt19937_64& rng, const AugmentConfig& cfg) {
  if (n < 1) throw ValidationError("paste count must be >= 1");
  if (bank.empty())
    throw ContractViolation("instance bank is empty");
  if (scene.empty() || scene.type() != CV_8UC3)
    throw ValidationError("scene must be a non-empty 8-bit BGR raster");

  PasteResult result;
  result.image = scene.clone();
  for (const GroundTruthBox& g : scene_gts)
    result.annotations.emplace_back(g.box, g.category, image_id, g.crowd_flag,
                                    g.mask_path);
  std::uniform_real_distribution<double> scale(cfg.scale_jitter_lo,
                                               cfg.scale_jitter_hi);
  constexpr int kRetryCap = 25;

  for (int k = 0; k < n; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kRetryCap && !placed; ++attempt) {
      const InstanceEntry& entry =
          sample_entry(bank, rng, cfg.category_balanced);
      cv::Mat patch = entry.patch;
      cv::Mat mask = entry.mask;
      if (cfg.scale_jitter_lo != 1.0 || cfg.scale_jitter_hi != 1.0) {
        const double s = scale(rng);
        const int w = std::max(1, static_cast<int>(std::lround(patch.cols * s)));
        const int h = std::max(1, static_cast<int>(std::lround(patch.rows * s)));
        cv::resize(entry.patch, patch, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
        cv::resize(entry.mask, mask, cv::Size(w, h), 0, 0, cv::INTER_NEAREST);
      }
      if (patch.cols > result.image.cols || patch.rows > result.image.rows)
        continue;  // larger than the scene; resample

      std::uniform_int_distribution<int> px(0, result.image.cols - patch.cols);
      std::uniform_int_distribution<int> py(0, result.image.rows - patch.rows);
      const int x0 = px(rng);
      const int y0 = py(rng);
      const BBox pasted_box(x0, y0, x0 + patch.cols, y0 + patch.rows);

      if (!cfg.allow_overlap) {
        bool collides = false;
        for (const GroundTruthBox& g : result.annotations)
          if (iou(pasted_box, g.box) > cfg.overlap_iou_cap) {
            collides = true;
            break;
          }
        if (collides) continue;
      }

      composite(result.image, patch, mask, x0, y0, cfg.feather_edges);
      result.annotations.emplace_back(pasted_box, entry.category, image_id);
      ++result.num_pasted;
      placed = true;
    }
    if (!placed)
      result.warnings.push_back("could not place instance " +
                                std::to_string(k + 1) + " on image " +
                                std::to_string(image_id) + ", skipped");
  }
  return result;
}

AugmentResult augment_dataset(const Dataset& ds,
                              const std::filesystem::path& images_dir,
                              const std::filesystem::path& out_dir,
                              const AugmentConfig& cfg, int threads) {
  check_config(cfg);
  std::filesystem::create_directories(out_dir);

  InstanceBank bank = extract_instances(ds, images_dir);
  AugmentResult result;
  result.dataset = ds;
  result.warnings = bank.warnings;
  if (bank.empty()) {
    result.warnings.push_back("instance bank is empty, nothing to augment");
    return result;
  }

  long long next_id = 0;
  for (const ImageInfo& img : ds.images) next_id = std::max(next_id, img.id);

  struct Job {
    const ImageInfo* source;
    int copy_index;      // 1-based augmented copy per source image
    long long image_id;  // output id
  };
  std::vector<Job> jobs;
  for (const ImageInfo& img : ds.images)
    for (int k = 1; k <= cfg.per_source_images; ++k)
      jobs.push_back({&img, k, ++next_id});

  struct JobOutput {
    ImageInfo info;
    std::vector<GroundTruthBox> gts;
    std::vector<std::string> warnings;
    bool ok = false;
  };
  std::vector<JobOutput> outputs(jobs.size());

  // Group ground truth per source image once, for overlap checks.
  std::map<long long, std::vector<GroundTruthBox>> gts_by_image;
  for (const GroundTruthBox& g : ds.ground_truth)
    gts_by_image[g.image].push_back(g);

  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    JobOutput& out = outputs[j];
    cv::Mat scene = cv::imread((images_dir / job.source->file_name).string(),
                               cv::IMREAD_COLOR);
    if (scene.empty()) {
      out.warnings.push_back("unreadable raster " + job.source->file_name +
                             ", augmentation skipped");
      return;
    }
    std::mt19937_64 rng =
        make_rng(cfg.seed, static_cast<std::uint64_t>(job.source->id),
                 static_cast<std::uint64_t>(job.copy_index));
    std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
    const int n = count(rng);

    static const std::vector<GroundTruthBox> no_gts;
    auto git = gts_by_image.find(job.source->id);
    const auto& scene_gts = git == gts_by_image.end() ? no_gts : git->second;
    PasteResult pasted =
        paste_compose(scene, scene_gts, job.image_id, bank, n, rng, cfg);

    const std::filesystem::path stem =
        std::filesystem::path(job.source->file_name).stem();
    const std::string file_name =
        stem.string() + "_aug" + std::to_string(job.copy_index) + ".png";
    if (!cv::imwrite((out_dir / file_name).string(), pasted.image)) {
      throw Error("cannot write augmented raster " +
                  (out_dir / file_name).string());
    }

    out.info = {job.image_id, static_cast<double>(scene.cols),
                static_cast<double>(scene.rows), file_name};
    out.gts = std::move(pasted.annotations);
    out.warnings = std::move(pasted.warnings);
    out.ok = true;
  });

  for (JobOutput& out : outputs) {
    for (std::string& w : out.warnings)
      result.warnings.push_back(std::move(w));
    if (!out.ok) continue;
    result.dataset.images.push_back(out.info);
    for (GroundTruthBox& g : out.gts)
      result.dataset.ground_truth.push_back(std::move(g));
  }
  return result;
}

}  // namespace detkit
