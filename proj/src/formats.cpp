#include "detkit/formats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

namespace detkit {

using nlohmann::json;

namespace {

// Numbers are written with 6 decimal places; integral values print without a
// fractional part to keep files compact.
std::string format_number(double v) {
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
  }
  return buf;
}

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("JSON parse error: ") + e.what(), e.byte);
  } catch (const json::exception& e) {
    // e.g. out_of_range on number overflow
    throw ParseError(std::string("JSON parse error: ") + e.what());
  }
}

// Any json exception surfacing past the explicit type checks is an input
// problem, not a crash.
template <typename Fn>
auto guard_json(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed input: ") + e.what());
  }
}

double require_number(const json& j, const char* key, const char* ctx) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw ParseError(std::string(ctx) + ": missing or non-numeric '" + key +
                     "'");
  return it->get<double>();
}

BBox read_xywh(const json& entry, const char* ctx) {
  auto it = entry.find("bbox");
  if (it == entry.end() || !it->is_array() || it->size() != 4)
    throw ParseError(std::string(ctx) + ": 'bbox' must be a 4-element array");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!(*it)[i].is_number())
      throw ParseError(std::string(ctx) + ": non-numeric bbox element");
    v[i] = (*it)[i].get<double>();
  }
  return from_xywh(v[0], v[1], v[2], v[3]);
}

}  // namespace

const ImageInfo* Dataset::find_image(long long id) const {
  for (const auto& img : images)
    if (img.id == id) return &img;
  return nullptr;
}

namespace {

Dataset parse_coco_annotations_impl(std::string_view text) {
  const json root = parse_json(text);
  if (!root.is_object())
    throw ParseError("annotation file must be a JSON object");

  Dataset ds;
  std::unordered_map<long long, std::size_t> image_index;
  if (auto it = root.find("images"); it != root.end()) {
    if (!it->is_array()) throw ParseError("'images' must be an array");
    for (const auto& img : *it) {
      ImageInfo info;
      info.id = static_cast<long long>(require_number(img, "id", "image"));
      if (auto w = img.find("width"); w != img.end() && w->is_number())
        info.width = w->get<double>();
      if (auto h = img.find("height"); h != img.end() && h->is_number())
        info.height = h->get<double>();
      if (auto f = img.find("file_name"); f != img.end() && f->is_string())
        info.file_name = f->get<std::string>();
      if (image_index.count(info.id))
        throw ValidationError("duplicate image id " + std::to_string(info.id));
      image_index[info.id] = ds.images.size();
      ds.images.push_back(std::move(info));
    }
  }

  if (auto it = root.find("categories"); it != root.end()) {
    if (!it->is_array()) throw ParseError("'categories' must be an array");
    for (const auto& cat : *it) {
      const int id =
          static_cast<int>(require_number(cat, "id", "category"));
      std::string name;
      if (auto n = cat.find("name"); n != cat.end() && n->is_string())
        name = n->get<std::string>();
      ds.categories.add(id, std::move(name));
    }
  }

  if (auto it = root.find("annotations"); it != root.end()) {
    if (!it->is_array()) throw ParseError("'annotations' must be an array");
    for (const auto& ann : *it) {
      const long long image_id =
          static_cast<long long>(require_number(ann, "image_id", "annotation"));
      auto img_it = image_index.find(image_id);
      if (img_it == image_index.end())
        throw ReferenceError("annotation references unknown image id " +
                             std::to_string(image_id));
      const int category =
          static_cast<int>(require_number(ann, "category_id", "annotation"));
      if (!ds.categories.contains(category))
        throw ReferenceError("annotation references unknown category id " +
                             std::to_string(category));
      BBox box = read_xywh(ann, "annotation");
      const ImageInfo& img = ds.images[img_it->second];
      if (img.width > 0 && img.height > 0)
        box = clip_box(box, img.width, img.height);
      bool crowd = false;
      if (auto c = ann.find("iscrowd"); c != ann.end()) {
        if (c->is_number())
          crowd = c->get<double>() != 0.0;
        else if (c->is_boolean())
          crowd = c->get<bool>();
      }
      std::string mask_path;
      if (auto m = ann.find("mask_path"); m != ann.end() && m->is_string())
        mask_path = m->get<std::string>();
      ds.ground_truth.emplace_back(box, category, image_id, crowd,
                                   std::move(mask_path));
    }
  }
  return ds;
}

DetectionFile parse_coco_detections_impl(std::string_view text, int model) {
  const json root = parse_json(text);
  if (!root.is_array())
    throw ParseError("detection file must be a JSON array");

  DetectionFile out;
  out.model = model;
  out.detections.reserve(root.size());
  for (const auto& entry : root) {
    if (!entry.is_object())
      throw ParseError("detection entry must be a JSON object");
    const long long image_id =
        static_cast<long long>(require_number(entry, "image_id", "detection"));
    const int category =
        static_cast<int>(require_number(entry, "category_id", "detection"));
    const double score = require_number(entry, "score", "detection");
    const BBox box = read_xywh(entry, "detection");
    out.detections.emplace_back(box, score, category, model, image_id);
  }
  return out;
}

}  // namespace

Dataset parse_coco_annotations(std::string_view text) {
  return guard_json([&] { return parse_coco_annotations_impl(text); });
}

DetectionFile parse_coco_detections(std::string_view text, int model) {
  return guard_json([&] { return parse_coco_detections_impl(text, model); });
}

std::string write_coco_detections(const DetectionFile& dets) {
  if (dets.detections.empty()) return "[]";
  std::string out = "[\n";
  for (std::size_t i = 0; i < dets.detections.size(); ++i) {
    const ScoredDetection& d = dets.detections[i];
    out += "  {\"image_id\": " + std::to_string(d.image) +
           ", \"category_id\": " + std::to_string(d.category) +
           ", \"bbox\": [" + format_fixed(d.box.x_tl) + ", " +
           format_fixed(d.box.y_tl) + ", " + format_fixed(d.box.width()) +
           ", " + format_fixed(d.box.height()) +
           "], \"score\": " + format_fixed(d.score) + "}";
    if (i + 1 < dets.detections.size()) out += ",";
    out += "\n";
  }
  out += "]";
  return out;
}

std::string write_coco_annotations(const Dataset& ds) {
  std::string out = "{\n  \"images\": [";
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const ImageInfo& img = ds.images[i];
    out += i == 0 ? "\n" : ",\n";
    out += "    {\"id\": " + std::to_string(img.id) +
           ", \"width\": " + format_number(img.width) +
           ", \"height\": " + format_number(img.height) + ", \"file_name\": " +
           json(img.file_name).dump() + "}";
  }
  out += "\n  ],\n  \"categories\": [";
  const auto& cats = ds.categories.entries();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    out += i == 0 ? "\n" : ",\n";
    out += "    {\"id\": " + std::to_string(cats[i].first) + ", \"name\": " +
           json(cats[i].second).dump() + "}";
  }
  out += "\n  ],\n  \"annotations\": [";
  for (std::size_t i = 0; i < ds.ground_truth.size(); ++i) {
    const GroundTruthBox& g = ds.ground_truth[i];
    out += i == 0 ? "\n" : ",\n";
    out += "    {\"id\": " + std::to_string(i + 1) +
           ", \"image_id\": " + std::to_string(g.image) +
           ", \"category_id\": " + std::to_string(g.category) + ", \"bbox\": [" +
           format_fixed(g.box.x_tl) + ", " + format_fixed(g.box.y_tl) + ", " +
           format_fixed(g.box.width()) + ", " + format_fixed(g.box.height()) +
           "], \"iscrowd\": " + (g.crowd_flag ? "1" : "0");
    if (!g.mask_path.empty())
      out += ", \"mask_path\": " + json(g.mask_path).dump();
    out += "}";
  }
  out += "\n  ]\n}";
  return out;
}

namespace {

struct VisDroneLine {
  double x, y, w, h, field5;
  int category;
  bool skip;  // ignored region or invalid ground-truth flag
};

double parse_field(const std::string& field, std::size_t line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  // Allow trailing whitespace only.
  while (end && *end != '\0' && (*end == ' ' || *end == '\t')) ++end;
  if (end == begin || (end && *end != '\0'))
    throw ParseError("line " + std::to_string(line_no) +
                         ": non-numeric field '" + field + "'",
                     0, line_no);
  if (!std::isfinite(v))
    throw ParseError("line " + std::to_string(line_no) + ": non-finite field",
                     0, line_no);
  return v;
}

// Splits one line into the 8 required numeric fields.
VisDroneLine parse_visdrone_line(std::string_view line, std::size_t line_no,
                                 bool ground_truth_mode,
                                 const CategoryTable& table) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(current);
  if (fields.size() != 8)
    throw ParseError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                         std::to_string(fields.size()),
                     0, line_no);

  double v[8];
  for (int i = 0; i < 8; ++i) v[i] = parse_field(fields[i], line_no);

  VisDroneLine out{};
  out.x = v[0];
  out.y = v[1];
  out.w = v[2];
  out.h = v[3];
  out.field5 = v[4];
  out.category = static_cast<int>(v[5]);
  out.skip = false;

  if (out.category == 0) {  // ignored regions
    out.skip = true;
    return out;
  }
  if (ground_truth_mode && out.field5 == 0.0) {  // invalid entry flag
    out.skip = true;
    return out;
  }
  if (!table.contains(out.category))
    throw ReferenceError("line " + std::to_string(line_no) +
                         ": unknown VisDrone category id " +
                         std::to_string(out.category));
  return out;
}

// Iterates lines, tolerating \r\n endings and skipping blank lines.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = true;
    for (char c : line)
      if (c != ' ' && c != '\t') {
        blank = false;
        break;
      }
    if (!blank) fn(line, line_no);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

}  // namespace

std::vector<GroundTruthBox> parse_visdrone_ground_truth(std::string_view text,
                                                        long long image) {
  const CategoryTable table = visdrone_categories();
  std::vector<GroundTruthBox> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const VisDroneLine f =
        parse_visdrone_line(line, line_no, /*ground_truth_mode=*/true, table);
    if (f.skip) return;
    BBox box;
    try {
      box = from_xywh(f.x, f.y, f.w, f.h);
    } catch (const ValidationError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), 0,
                       line_no);
    }
    out.emplace_back(box, f.category, image);
  });
  return out;
}

std::vector<ScoredDetection> parse_visdrone_detections(std::string_view text,
                                                       long long image,
                                                       int model) {
  const CategoryTable table = visdrone_categories();
  std::vector<ScoredDetection> out;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const VisDroneLine f =
        parse_visdrone_line(line, line_no, /*ground_truth_mode=*/false, table);
    if (f.skip) return;
    BBox box;
    try {
      box = from_xywh(f.x, f.y, f.w, f.h);
    } catch (const ValidationError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), 0,
                       line_no);
    }
    if (!(f.field5 >= 0.0 && f.field5 <= 1.0))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": score must be in [0, 1], got " +
                            std::to_string(f.field5));
    out.emplace_back(box, f.field5, f.category, model, image);
  });
  return out;
}

std::string write_visdrone_ground_truth(std::span<const GroundTruthBox> gts) {
  std::string out;
  for (const GroundTruthBox& g : gts) {
    out += format_number(g.box.x_tl) + "," + format_number(g.box.y_tl) + "," +
           format_number(g.box.width()) + "," + format_number(g.box.height()) +
           ",1," + std::to_string(g.category) + ",0,0\n";
  }
  return out;
}

std::string write_visdrone_detections(std::span<const ScoredDetection> dets) {
  std::string out;
  for (const ScoredDetection& d : dets) {
    out += format_number(d.box.x_tl) + "," + format_number(d.box.y_tl) + "," +
           format_number(d.box.width()) + "," + format_number(d.box.height()) +
           "," + format_fixed(d.score) + "," + std::to_string(d.category) +
           ",0,0\n";
  }
  return out;
}

void clip_ground_truth(Dataset& ds) {
  for (GroundTruthBox& g : ds.ground_truth) {
    const ImageInfo* img = ds.find_image(g.image);
    if (img && img->width > 0 && img->height > 0)
      g.box = clip_box(g.box, img->width, img->height);
  }
}

}  // namespace detkit
