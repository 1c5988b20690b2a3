#include "synood/dataset.hpp"

#include "synood/errors.hpp"
#include "synood/io.hpp"
#include "synood/json_io.hpp"
#include "synood/text.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace synood {

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw ValidationError("vocabulary must contain at least one label");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (trim(l).empty()) throw ValidationError("vocabulary label must be non-empty");
    if (!seen.insert(ascii_lower(trim(l))).second) {
      throw ValidationError("duplicate vocabulary label '" + l + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (ascii_lower(labels_[i]) == ascii_lower(label)) return i;
  }
  return std::nullopt;
}

void CandidatePolicy::validate() const {
  if (!(min_box_area >= 0.0)) throw ArgumentError("min_box_area must be >= 0");
  if (max_edits_per_image < 1) throw ArgumentError("max_edits_per_image must be >= 1");
  if (!(max_relative_area > 0.0 && max_relative_area <= 1.0)) {
    throw ArgumentError("max_relative_area must be in (0, 1]");
  }
}

namespace {

// The accepted subset of COCO. Anything else is an error.
const std::set<std::string> kTopLevelKeys = {"images", "annotations", "categories", "info", "licenses"};
const std::set<std::string> kImageKeys = {"id", "file_name", "width", "height"};
const std::set<std::string> kAnnotationKeys = {"id", "image_id", "bbox", "category_id", "area", "iscrowd"};
const std::set<std::string> kCategoryKeys = {"id", "name", "supercategory"};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ValidationError("unsupported field '" + key + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

std::uint64_t require_id(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ValidationError("field '" + std::string(key) + "' in " + where + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

const json& require_array(const json& root, const char* key) {
  const auto& v = require(root, key, "document");
  if (!v.is_array()) throw ValidationError(std::string("'") + key + "' must be an array");
  return v;
}

struct ImageInfo {
  std::string file_name;
  int width;
  int height;
};

}  // namespace

Dataset parse_coco_json(std::string_view text, const fs::path& image_root) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
  check_keys(root, kTopLevelKeys, "document");

  std::vector<std::string> labels;
  std::unordered_map<std::uint64_t, std::uint32_t> category_index;
  for (const auto& c : require_array(root, "categories")) {
    check_keys(c, kCategoryKeys, "category");
    const auto id = require_id(c, "id", "category");
    const auto& name = require(c, "name", "category");
    if (!name.is_string()) throw ValidationError("category name must be a string");
    if (!category_index.emplace(id, static_cast<std::uint32_t>(labels.size())).second) {
      throw ValidationError("duplicate category id " + std::to_string(id));
    }
    labels.push_back(name.get<std::string>());
  }
  Vocabulary vocab(std::move(labels));

  std::map<std::uint64_t, ImageInfo> images;
  for (const auto& im : require_array(root, "images")) {
    check_keys(im, kImageKeys, "image");
    const auto id = require_id(im, "id", "image");
    const auto& name = require(im, "file_name", "image");
    const auto& w = require(im, "width", "image");
    const auto& h = require(im, "height", "image");
    if (!name.is_string() || !w.is_number_integer() || !h.is_number_integer() || w.get<int>() <= 0 ||
        h.get<int>() <= 0) {
      throw ValidationError("image " + std::to_string(id) + " has invalid file_name/width/height");
    }
    if (!images.emplace(id, ImageInfo{name.get<std::string>(), w.get<int>(), h.get<int>()}).second) {
      throw ValidationError("duplicate image id " + std::to_string(id));
    }
  }

  Dataset ds{std::move(vocab), {}};
  std::vector<std::uint64_t> invalid;
  std::set<std::uint64_t> seen_ids;
  for (const auto& a : require_array(root, "annotations")) {
    check_keys(a, kAnnotationKeys, "annotation");
    const auto id = require_id(a, "id", "annotation");
    if (!seen_ids.insert(id).second) throw ValidationError("duplicate annotation id", {id});
    const auto image_id = require_id(a, "image_id", "annotation");
    const auto category_id = require_id(a, "category_id", "annotation");
    if (auto it = a.find("iscrowd"); it != a.end() && !(it->is_number_integer() && it->get<int>() == 0)) {
      throw ValidationError("crowd annotations are not supported", {id});
    }
    const auto& bbox = require(a, "bbox", "annotation");
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      throw ValidationError("annotation bbox must be [x, y, w, h]", {id});
    }
    auto img = images.find(image_id);
    auto cat = category_index.find(category_id);
    if (img == images.end() || cat == category_index.end()) {
      throw ValidationError("annotation references unknown image or category", {id});
    }
    IdObjectRecord r;
    r.record_id = id;
    r.image_id = image_id;
    r.image_path = (image_root / img->second.file_name).string();
    r.image_width = img->second.width;
    r.image_height = img->second.height;
    r.box = Box{bbox[0].get<float>(), bbox[1].get<float>(), bbox[2].get<float>(), bbox[3].get<float>()};
    r.label_id = cat->second;
    if (!fits_within(r.box, r.image_width, r.image_height)) invalid.push_back(id);
    ds.records.push_back(std::move(r));
  }
  if (!invalid.empty()) {
    std::ostringstream os;
    os << "invalid boxes (non-positive size or outside image) in records:";
    for (auto id : invalid) os << ' ' << id;
    throw ValidationError(os.str(), std::move(invalid));
  }
  return ds;
}

Dataset load_annotations(const fs::path& path, AnnotationFormat format, const fs::path& image_root) {
  if (format != AnnotationFormat::coco_json) throw ArgumentError("unsupported annotation format");
  const auto root = image_root.empty() ? path.parent_path() : image_root;
  return parse_coco_json(read_text_file(path), root);
}

std::vector<IdObjectRecord> select_edit_candidates(std::span<const IdObjectRecord> records,
                                                   const CandidatePolicy& policy) {
  policy.validate();
  std::vector<const IdObjectRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->record_id < b->record_id; });

  std::map<std::uint64_t, std::size_t> per_image;
  std::vector<IdObjectRecord> out;
  for (const auto* r : order) {
    const double area = r->box.area();
    const double image_area = static_cast<double>(r->image_width) * r->image_height;
    if (area < policy.min_box_area || area > policy.max_relative_area * image_area) continue;
    auto& n = per_image[r->image_id];
    if (n >= policy.max_edits_per_image) continue;
    ++n;
    out.push_back(*r);
  }
  return out;
}

void write_record_manifest(const fs::path& path, std::span<const IdObjectRecord> records) {
  std::string text;
  for (const auto& r : records) {
    text += json(r).dump();
    text += '\n';
  }
  write_file_atomic(path, text);
}

std::vector<IdObjectRecord> read_record_manifest(const fs::path& path) {
  std::vector<IdObjectRecord> out;
  std::size_t offset = 0;
  for (const auto& line : read_lines(path)) {
    if (!trim(line).empty()) {
      try {
        out.push_back(json::parse(line).get<IdObjectRecord>());
      } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), offset + e.byte);
      } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what(), offset);
      }
    }
    offset += line.size() + 1;
  }
  return out;
}

}  // namespace synood
