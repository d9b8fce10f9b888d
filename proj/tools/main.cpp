#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/augment.hpp"
#include "detkit/errors.hpp"
#include "detkit/eval.hpp"
#include "detkit/formats.hpp"
#include "detkit/fusion.hpp"
#include "detkit/manifest.hpp"
#include "detkit/refmath.hpp"
#include "detkit/synth.hpp"
#include "detkit/version.hpp"

namespace fs = std::filesystem;
using namespace detkit;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

RunManifest make_manifest(const std::string& subcommand, std::uint64_t seed,
                          int threads) {
  RunManifest m;
  m.subcommand = subcommand;
  m.version = kVersion;
  m.seed = seed;
  m.threads = threads;
  m.timestamp = current_timestamp();
  return m;
}

// VisDrone layouts are directories of per-image text files; image ids are
// assigned by lexicographic stem order.
std::vector<std::pair<std::string, fs::path>> list_txt_files(
    const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw Error(dir.string() + " is not a directory");
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.emplace_back(entry.path().stem().string(), entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

Dataset load_visdrone_dataset(const fs::path& ann_dir,
                              const fs::path& images_dir) {
  Dataset ds;
  ds.categories = visdrone_categories();
  long long id = 0;
  for (const auto& [stem, path] : list_txt_files(ann_dir)) {
    ++id;
    ImageInfo info;
    info.id = id;
    info.file_name = stem + ".jpg";
    if (!images_dir.empty()) {
      for (const char* ext : {".jpg", ".png", ".jpeg", ".bmp"}) {
        if (fs::exists(images_dir / (stem + ext))) {
          info.file_name = stem + ext;
          break;
        }
      }
    }
    auto gts = parse_visdrone_ground_truth(read_file(path), id);
    for (auto& g : gts) ds.ground_truth.push_back(std::move(g));
    ds.images.push_back(std::move(info));
  }
  return ds;
}

int run_fuse(const std::vector<std::string>& inputs,
             const std::string& format, double match_iou,
             const std::string& rescale, double score_floor,
             const std::string& out, std::uint64_t seed, int threads) {
  Timer timer;
  FusionConfig cfg;
  cfg.match_iou = match_iou;
  cfg.num_models = static_cast<int>(inputs.size());
  cfg.score_floor = score_floor;
  if (rescale == "clamped")
    cfg.rescale_mode = RescaleMode::clamped_count;
  else if (rescale == "none")
    cfg.rescale_mode = RescaleMode::none;
  else
    throw ValidationError("unknown rescale mode '" + rescale + "'");

  RunManifest manifest = make_manifest("fuse", seed, threads);
  manifest.config["format"] = format;
  manifest.config["match_iou"] = std::to_string(match_iou);
  manifest.config["rescale"] = rescale;
  manifest.config["score_floor"] = std::to_string(score_floor);
  for (const std::string& input : inputs) manifest.add_input(input);

  if (format == "coco") {
    std::vector<DetectionFile> files;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      files.push_back(
          parse_coco_detections(read_file(inputs[i]), static_cast<int>(i)));
    const DetectionFile fused = ensemble(files, cfg, threads);
    write_file(out, write_coco_detections(fused));
    manifest.outputs.push_back(out);
    manifest.wall_time_s = timer.seconds();
    manifest.write(out + ".manifest.json");
  } else if (format == "visdrone") {
    // Image ids come from the union of stems across all input directories.
    std::set<std::string> stems;
    for (const std::string& input : inputs)
      for (const auto& [stem, path] : list_txt_files(input)) stems.insert(stem);
    std::vector<std::string> ordered(stems.begin(), stems.end());

    fs::create_directories(out);
    for (std::size_t s = 0; s < ordered.size(); ++s) {
      const long long image_id = static_cast<long long>(s) + 1;
      std::vector<DetectionFile> files;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        DetectionFile f;
        f.model = static_cast<int>(i);
        const fs::path path = fs::path(inputs[i]) / (ordered[s] + ".txt");
        if (fs::exists(path))
          f.detections = parse_visdrone_detections(read_file(path), image_id,
                                                   f.model);
        files.push_back(std::move(f));
      }
      const DetectionFile fused = ensemble(files, cfg, threads);
      write_file(fs::path(out) / (ordered[s] + ".txt"),
                 write_visdrone_detections(fused.detections));
    }
    manifest.outputs.push_back(out);
    manifest.wall_time_s = timer.seconds();
    manifest.write(fs::path(out) / "manifest.json");
  } else {
    throw ValidationError("unknown format '" + format + "'");
  }
  return 0;
}

int run_eval(const std::string& dets_path, const std::string& gt_path,
             const std::string& preset, int max_dets_override,
             const std::string& images_dir, const std::string& out,
             std::uint64_t seed, int threads) {
  Timer timer;
  EvalConfig cfg;
  Dataset ds;
  DetectionFile dets;
  if (preset == "visdrone") {
    cfg = visdrone_eval_config();
    ds = load_visdrone_dataset(gt_path, images_dir);
    const auto gt_files = list_txt_files(gt_path);
    std::set<std::string> gt_stems;
    for (const auto& [stem, path] : gt_files) gt_stems.insert(stem);
    for (const auto& [stem, path] : list_txt_files(dets_path))
      if (!gt_stems.count(stem))
        throw ReferenceError("detection file " + stem +
                             ".txt has no matching ground-truth file");
    for (std::size_t s = 0; s < gt_files.size(); ++s) {
      const fs::path det_file =
          fs::path(dets_path) / (gt_files[s].first + ".txt");
      if (!fs::exists(det_file)) continue;
      auto image_dets = parse_visdrone_detections(
          read_file(det_file), static_cast<long long>(s) + 1, 0);
      for (auto& d : image_dets) dets.detections.push_back(std::move(d));
    }
  } else if (preset == "coco") {
    cfg = coco_eval_config();
    ds = parse_coco_annotations(read_file(gt_path));
    dets = parse_coco_detections(read_file(dets_path), 0);
  } else {
    throw ValidationError("unknown preset '" + preset + "'");
  }
  if (max_dets_override > 0) cfg.max_dets = max_dets_override;

  const EvalReport report = evaluate(dets, ds, cfg, threads);
  std::cout << render_report_table(report, ds.categories);

  if (!out.empty()) {
    write_file(out, report_to_json(report, ds.categories));
    RunManifest manifest = make_manifest("eval", seed, threads);
    manifest.config["preset"] = preset;
    manifest.config["max_dets"] = std::to_string(cfg.max_dets);
    manifest.add_input(dets_path);
    manifest.add_input(gt_path);
    manifest.outputs.push_back(out);
    manifest.wall_time_s = timer.seconds();
    manifest.write(out + ".manifest.json");
  }
  return 0;
}

int run_augment(const std::string& dataset_path, const std::string& images_dir,
                const std::string& out_dir, const std::string& format,
                AugmentConfig cfg, int threads) {
  Timer timer;
  Dataset ds;
  if (format == "coco")
    ds = parse_coco_annotations(read_file(dataset_path));
  else if (format == "visdrone")
    ds = load_visdrone_dataset(dataset_path, images_dir);
  else
    throw ValidationError("unknown format '" + format + "'");

  const AugmentResult result =
      augment_dataset(ds, images_dir, out_dir, cfg, threads);
  for (const std::string& w : result.warnings)
    std::cerr << "warning: " << w << "\n";

  if (format == "coco") {
    write_file(fs::path(out_dir) / "annotations.json",
               write_coco_annotations(result.dataset));
  } else {
    // Per-image text files matching the input layout, augmented images only
    // (the originals keep their existing annotation files).
    const auto original_count = ds.images.size();
    for (std::size_t i = original_count; i < result.dataset.images.size();
         ++i) {
      const ImageInfo& img = result.dataset.images[i];
      std::vector<GroundTruthBox> gts;
      for (const GroundTruthBox& g : result.dataset.ground_truth)
        if (g.image == img.id) gts.push_back(g);
      write_file(fs::path(out_dir) /
                     (fs::path(img.file_name).stem().string() + ".txt"),
                 write_visdrone_ground_truth(gts));
    }
  }

  RunManifest manifest = make_manifest("augment", cfg.seed, threads);
  manifest.config["format"] = format;
  manifest.config["per_image"] = std::to_string(cfg.per_source_images);
  manifest.config["min"] = std::to_string(cfg.min_objects);
  manifest.config["max"] = std::to_string(cfg.max_objects);
  manifest.add_input(dataset_path);
  manifest.outputs.push_back(out_dir);
  manifest.wall_time_s = timer.seconds();
  manifest.write(fs::path(out_dir) / "manifest.json");
  return 0;
}

// Flat key = value lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_file(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t") == std::string::npos;
      if (!blank)
        throw ParseError("config line " + std::to_string(line_no) +
                             ": expected key = value",
                         0, line_no);
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(v);
  } catch (...) {
    throw ValidationError("config key '" + key + "': not a number: " + v);
  }
}

void apply_profile_config(DetectorProfile& p, const std::string& prefix,
                          const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string field = key.substr(prefix.size());
    if (field == "miss_rate")
      p.miss_rate = to_double(value, key);
    else if (field == "jitter_sigma")
      p.jitter_sigma = to_double(value, key);
    else if (field == "fp_rate")
      p.fp_rate = to_double(value, key);
    else if (field == "label_noise")
      p.label_noise = to_double(value, key);
    else if (field == "tp_mean")
      p.score_model.tp_mean = to_double(value, key);
    else if (field == "tp_sigma")
      p.score_model.tp_sigma = to_double(value, key);
    else if (field == "fp_mean")
      p.score_model.fp_mean = to_double(value, key);
    else if (field == "fp_sigma")
      p.score_model.fp_sigma = to_double(value, key);
    else
      throw ValidationError("unknown config key '" + key + "'");
  }
}

int run_synth_experiment(const std::string& config_path, int trials,
                         int num_images, const std::string& out,
                         std::uint64_t seed, int threads) {
  Timer timer;
  SceneConfig scene;
  DetectorProfile profile_a = multi_stage_profile();
  DetectorProfile profile_b = single_stage_profile();
  FusionConfig fusion;
  EvalConfig eval_cfg;

  RunManifest manifest = make_manifest("synth experiment", seed, threads);
  if (!config_path.empty()) {
    const auto kv = parse_config_file(config_path);
    for (const auto& [key, value] : kv) {
      if (key == "scene.num_images")
        scene.num_images = static_cast<int>(to_double(value, key));
      else if (key == "scene.image_width")
        scene.image_width = to_double(value, key);
      else if (key == "scene.image_height")
        scene.image_height = to_double(value, key);
      else if (key == "scene.objects_min")
        scene.objects_min = static_cast<int>(to_double(value, key));
      else if (key == "scene.objects_max")
        scene.objects_max = static_cast<int>(to_double(value, key));
      else if (key == "scene.size_min")
        scene.size_min = to_double(value, key);
      else if (key == "scene.size_max")
        scene.size_max = to_double(value, key);
      else if (key == "scene.class_weights") {
        scene.class_weights.clear();
        std::istringstream ws(value);
        std::string tok;
        while (std::getline(ws, tok, ','))
          scene.class_weights.push_back(to_double(tok, key));
      } else if (key == "fusion.match_iou")
        fusion.match_iou = to_double(value, key);
      else if (key == "fusion.rescale") {
        if (value == "clamped")
          fusion.rescale_mode = RescaleMode::clamped_count;
        else if (value == "none")
          fusion.rescale_mode = RescaleMode::none;
        else
          throw ValidationError("unknown rescale mode '" + value + "'");
      } else if (key == "eval.max_dets")
        eval_cfg.max_dets = static_cast<int>(to_double(value, key));
      else if (key.rfind("detector_a.", 0) == 0 ||
               key.rfind("detector_b.", 0) == 0) {
        // handled below
      } else
        throw ValidationError("unknown config key '" + key + "'");
    }
    apply_profile_config(profile_a, "detector_a.", kv);
    apply_profile_config(profile_b, "detector_b.", kv);
    manifest.add_input(config_path);
  }
  if (num_images > 0) scene.num_images = num_images;

  const ExperimentReport report = run_ensemble_experiment(
      scene, profile_a, profile_b, fusion, trials, seed, threads, eval_cfg);
  const std::string table = render_experiment_table(report);
  std::cout << table;

  if (!out.empty()) {
    write_file(out, experiment_to_json(report));
    write_file(out + ".txt", table);
    manifest.config["trials"] = std::to_string(trials);
    manifest.config["num_images"] = std::to_string(scene.num_images);
    manifest.outputs.push_back(out);
    manifest.wall_time_s = timer.seconds();
    manifest.write(out + ".manifest.json");
  }
  return 0;
}

int run_refmath_check(std::uint64_t seed) {
  const auto results = run_refmath_checks(seed);
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.pass) std::cout << ": " << r.detail;
    std::cout << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detkit: detection ensembling, evaluation and augmentation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--seed", seed, "random seed (default 0)")->capture_default_str();
  app.add_option("--threads", threads, "parallelism cap")->capture_default_str();
  app.fallthrough();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "fuse detection files with WBF");
  std::vector<std::string> fuse_inputs;
  std::string fuse_format = "coco", fuse_rescale = "clamped", fuse_out;
  double fuse_iou = 0.55, fuse_floor = 0.0;
  fuse->add_option("--inputs", fuse_inputs, "detection files (or dirs)")
      ->required()
      ->delimiter(',');
  fuse->add_option("--format", fuse_format, "coco|visdrone")
      ->capture_default_str();
  fuse->add_option("--iou", fuse_iou, "cluster match IoU")
      ->capture_default_str();
  fuse->add_option("--rescale", fuse_rescale, "clamped|none")
      ->capture_default_str();
  fuse->add_option("--score-floor", fuse_floor, "drop fused boxes below")
      ->capture_default_str();
  fuse->add_option("--out", fuse_out, "output file (or dir)")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate detections (mAP)");
  std::string eval_dets, eval_gt, eval_preset = "coco", eval_images, eval_out;
  int eval_max_dets = 0;
  eval_cmd->add_option("--dets", eval_dets, "detection file (or dir)")
      ->required();
  eval_cmd->add_option("--gt", eval_gt, "annotation file (or dir)")->required();
  eval_cmd->add_option("--preset", eval_preset, "coco|visdrone")
      ->capture_default_str();
  eval_cmd->add_option("--max-dets", eval_max_dets,
                       "override per-image detection cap");
  eval_cmd->add_option("--images", eval_images,
                       "image dir (visdrone, optional)");
  eval_cmd->add_option("--out", eval_out, "write JSON report here");

  // augment
  auto* augment_cmd =
      app.add_subcommand("augment", "cut-paste augmentation of a dataset");
  std::string aug_dataset, aug_images, aug_out, aug_format = "coco";
  AugmentConfig aug_cfg;
  double jitter_lo = 1.0, jitter_hi = 1.0;
  augment_cmd->add_option("--dataset", aug_dataset, "annotation file (or dir)")
      ->required();
  augment_cmd->add_option("--images", aug_images, "source image dir")
      ->required();
  augment_cmd->add_option("--out", aug_out, "output dir")->required();
  augment_cmd->add_option("--format", aug_format, "coco|visdrone")
      ->capture_default_str();
  augment_cmd->add_option("--per-image", aug_cfg.per_source_images,
                          "augmented copies per source image")
      ->capture_default_str();
  augment_cmd->add_option("--min", aug_cfg.min_objects, "min pasted objects")
      ->capture_default_str();
  augment_cmd->add_option("--max", aug_cfg.max_objects, "max pasted objects")
      ->capture_default_str();
  augment_cmd->add_option("--scale-jitter-lo", jitter_lo,
                          "lower scale jitter bound");
  augment_cmd->add_option("--scale-jitter-hi", jitter_hi,
                          "upper scale jitter bound");
  augment_cmd->add_flag("--no-overlap{false}", aug_cfg.allow_overlap,
                        "reject overlapping paste locations");
  augment_cmd->add_flag("--balanced", aug_cfg.category_balanced,
                        "sample categories uniformly");
  augment_cmd->add_flag("--feather", aug_cfg.feather_edges,
                        "feather mask edges");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthetic experiments");
  auto* experiment =
      synth_cmd->add_subcommand("experiment", "two-detector fusion study");
  std::string synth_config, synth_out;
  int synth_trials = 20, synth_images = 0;
  experiment->add_option("--config", synth_config, "flat key=value file");
  experiment->add_option("--trials", synth_trials, "number of trials")
      ->capture_default_str();
  experiment->add_option("--images", synth_images,
                         "override scene.num_images");
  experiment->add_option("--out", synth_out, "write JSON report here");
  synth_cmd->require_subcommand(1);

  // refmath
  auto* refmath_cmd = app.add_subcommand("refmath", "reference math");
  auto* check = refmath_cmd->add_subcommand("check", "run the self tests");
  refmath_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 1;
  }

  try {
    if (*fuse)
      return run_fuse(fuse_inputs, fuse_format, fuse_iou, fuse_rescale,
                      fuse_floor, fuse_out, seed, threads);
    if (*eval_cmd)
      return run_eval(eval_dets, eval_gt, eval_preset, eval_max_dets,
                      eval_images, eval_out, seed, threads);
    if (*augment_cmd) {
      aug_cfg.seed = seed;
      aug_cfg.scale_jitter_lo = jitter_lo;
      aug_cfg.scale_jitter_hi = jitter_hi;
      return run_augment(aug_dataset, aug_images, aug_out, aug_format, aug_cfg,
                         threads);
    }
    if (*experiment)
      return run_synth_experiment(synth_config, synth_trials, synth_images,
                                  synth_out, seed, threads);
    if (*check) return run_refmath_check(seed);
  } catch (const ContractViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
