#pragma once

// COCO-flavored annotation document.
//
//   {
//     "version": 1,
//     "images":      [{"id", "file", "width", "height", "scene_tag"?}],
//     "instances":   [{"id", "name"}],
//     "annotations": [{"image_id", "instance_id", "bbox": [x, y, w, h],
//                      "visible_fraction"?}],
//     "detections"?: [{"image_id", "instance_id", "bbox", "score"}],
//     "proposals"?:  [{"image_id", "proposal_id", "bbox", "mask"?,
//                      "square_bbox"?}],
//     "metadata"?:   {...}
//   }
//
// Boxes are stored as [x, y, width, height] and converted to half-open
// corners on read. The conversion is exact whenever x + w is representable,
// which holds for integer and other coarse dyadic coordinates.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "insdet/error.hpp"
#include "insdet/geometry.hpp"
#include "insdet/records.hpp"

namespace insdet {

inline constexpr int kAnnotationVersion = 1;

struct AnnotationSet {
  std::vector<ImageRecord> images;
  std::vector<InstanceRecord> instances;
  std::vector<GroundTruth> annotations;
  std::optional<std::vector<Detection>> detections;
  std::optional<std::vector<ProposalRecord>> proposals;
  nlohmann::ordered_json metadata;  // null when absent

  const ImageRecord* find_image(ImageId id) const {
    for (const auto& im : images) {
      if (im.id == id) return &im;
    }
    return nullptr;
  }

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson bbox_to_json(const BoundingBox& b) {
  return ojson::array({b.x_min, b.y_min, b.width(), b.height()});
}

inline BoundingBox bbox_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    fail(ErrorCode::kMalformedBbox, where + ": bbox must be an array of 4 numbers");
  }
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number()) fail(ErrorCode::kSchema, where + ": bbox entries must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) fail(ErrorCode::kMalformedBbox, where + ": non-finite bbox");
  }
  if (!(v[2] > 0.0) || !(v[3] > 0.0)) {
    fail(ErrorCode::kMalformedBbox, where + ": bbox width and height must be > 0");
  }
  if (v[0] < 0.0 || v[1] < 0.0) {
    fail(ErrorCode::kMalformedBbox, where + ": bbox origin must be >= 0");
  }
  BoundingBox b{v[0], v[1], v[0] + v[2], v[1] + v[3]};
  if (!b.valid()) fail(ErrorCode::kMalformedBbox, where + ": degenerate bbox");
  return b;
}

inline const nlohmann::ordered_json& field(const nlohmann::ordered_json& obj, const char* key,
                                   const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::kSchema, where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::kSchema, where + ": missing field '" + key + "'");
  return *it;
}

inline std::int64_t int_field(const nlohmann::ordered_json& obj, const char* key,
                              const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number_integer()) {
    fail(ErrorCode::kSchema, where + ": field '" + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

inline std::string string_field(const nlohmann::ordered_json& obj, const char* key,
                                const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_string()) fail(ErrorCode::kSchema, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline const nlohmann::ordered_json* optional_array(const nlohmann::ordered_json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) return nullptr;
  if (!it->is_array()) fail(ErrorCode::kSchema, std::string("'") + key + "' must be an array");
  return &*it;
}

}  // namespace detail

inline nlohmann::ordered_json annotations_to_json(const AnnotationSet& set) {
  using detail::ojson;
  ojson doc;
  doc["version"] = kAnnotationVersion;
  ojson images = ojson::array();
  for (const auto& im : set.images) {
    ojson j{{"id", im.id}, {"file", im.file}, {"width", im.width}, {"height", im.height}};
    if (im.scene_tag) j["scene_tag"] = std::string(to_string(*im.scene_tag));
    images.push_back(std::move(j));
  }
  doc["images"] = std::move(images);
  ojson instances = ojson::array();
  for (const auto& in : set.instances) instances.push_back({{"id", in.id}, {"name", in.name}});
  doc["instances"] = std::move(instances);
  ojson anns = ojson::array();
  for (const auto& gt : set.annotations) {
    ojson j{{"image_id", gt.image_id},
            {"instance_id", gt.instance_id},
            {"bbox", detail::bbox_to_json(gt.box)}};
    if (gt.visible_fraction) j["visible_fraction"] = *gt.visible_fraction;
    anns.push_back(std::move(j));
  }
  doc["annotations"] = std::move(anns);
  if (set.detections) {
    ojson dets = ojson::array();
    for (const auto& d : *set.detections) {
      dets.push_back({{"image_id", d.image_id},
                      {"instance_id", d.instance_id},
                      {"bbox", detail::bbox_to_json(d.box)},
                      {"score", d.score}});
    }
    doc["detections"] = std::move(dets);
  }
  if (set.proposals) {
    ojson props = ojson::array();
    for (const auto& p : *set.proposals) {
      ojson j{{"image_id", p.image_id},
              {"proposal_id", p.proposal_id},
              {"bbox", detail::bbox_to_json(p.box)}};
      if (p.mask_file) j["mask"] = *p.mask_file;
      if (p.square_box) j["square_bbox"] = detail::bbox_to_json(*p.square_box);
      props.push_back(std::move(j));
    }
    doc["proposals"] = std::move(props);
  }
  if (!set.metadata.is_null()) doc["metadata"] = set.metadata;
  return doc;
}

inline AnnotationSet annotations_from_json(const nlohmann::ordered_json& doc) {
  using detail::int_field;
  using detail::string_field;
  if (!doc.is_object()) fail(ErrorCode::kSchema, "annotation document must be an object");
  if (auto it = doc.find("version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() != kAnnotationVersion) {
      fail(ErrorCode::kVersionMismatch,
           "annotation version " + it->dump() + " != " + std::to_string(kAnnotationVersion));
    }
  }

  AnnotationSet set;
  std::unordered_map<ImageId, std::optional<SceneTag>> image_tags;
  const auto& images = detail::field(doc, "images", "document");
  if (!images.is_array()) fail(ErrorCode::kSchema, "'images' must be an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    ImageRecord im;
    im.id = int_field(images[i], "id", where);
    im.file = string_field(images[i], "file", where);
    const auto w = int_field(images[i], "width", where);
    const auto h = int_field(images[i], "height", where);
    if (w <= 0 || h <= 0 || w > INT32_MAX || h > INT32_MAX) {
      fail(ErrorCode::kSchema, where + ": width and height must be positive");
    }
    im.width = static_cast<int>(w);
    im.height = static_cast<int>(h);
    if (auto it = images[i].find("scene_tag"); it != images[i].end()) {
      if (!it->is_string()) fail(ErrorCode::kSchema, where + ": scene_tag must be a string");
      im.scene_tag = parse_scene_tag(it->get<std::string>());
    }
    if (!image_tags.emplace(im.id, im.scene_tag).second) {
      fail(ErrorCode::kDuplicateId, "duplicate image id " + std::to_string(im.id));
    }
    set.images.push_back(std::move(im));
  }

  std::unordered_set<InstanceId> instance_ids;
  const auto& instances = detail::field(doc, "instances", "document");
  if (!instances.is_array()) fail(ErrorCode::kSchema, "'instances' must be an array");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string where = "instances[" + std::to_string(i) + "]";
    InstanceRecord in{int_field(instances[i], "id", where),
                      string_field(instances[i], "name", where)};
    if (!instance_ids.insert(in.id).second) {
      fail(ErrorCode::kDuplicateId, "duplicate instance id " + std::to_string(in.id));
    }
    set.instances.push_back(std::move(in));
  }

  auto check_image = [&](ImageId id, const std::string& where) {
    if (!image_tags.count(id)) {
      fail(ErrorCode::kUnknownId, where + ": unknown image_id " + std::to_string(id));
    }
  };
  auto check_instance = [&](InstanceId id, const std::string& where) {
    if (!instance_ids.count(id)) {
      fail(ErrorCode::kUnknownId, where + ": unknown instance_id " + std::to_string(id));
    }
  };

  if (const auto* anns = detail::optional_array(doc, "annotations")) {
    for (std::size_t i = 0; i < anns->size(); ++i) {
      const std::string where = "annotations[" + std::to_string(i) + "]";
      const auto& a = (*anns)[i];
      GroundTruth gt;
      gt.image_id = int_field(a, "image_id", where);
      gt.instance_id = int_field(a, "instance_id", where);
      check_image(gt.image_id, where);
      check_instance(gt.instance_id, where);
      gt.box = detail::bbox_from_json(detail::field(a, "bbox", where), where);
      gt.scene_tag = image_tags.at(gt.image_id);
      if (auto it = a.find("visible_fraction"); it != a.end()) {
        if (!it->is_number()) fail(ErrorCode::kSchema, where + ": visible_fraction must be a number");
        const double v = it->get<double>();
        if (!(v > 0.0 && v <= 1.0)) fail(ErrorCode::kSchema, where + ": visible_fraction must be in (0, 1]");
        gt.visible_fraction = v;
      }
      set.annotations.push_back(gt);
    }
  }

  if (const auto* dets = detail::optional_array(doc, "detections")) {
    set.detections.emplace();
    for (std::size_t i = 0; i < dets->size(); ++i) {
      const std::string where = "detections[" + std::to_string(i) + "]";
      const auto& d = (*dets)[i];
      Detection det;
      det.image_id = int_field(d, "image_id", where);
      det.instance_id = int_field(d, "instance_id", where);
      check_image(det.image_id, where);
      check_instance(det.instance_id, where);
      det.box = detail::bbox_from_json(detail::field(d, "bbox", where), where);
      const auto& score = detail::field(d, "score", where);
      if (!score.is_number()) fail(ErrorCode::kSchema, where + ": score must be a number");
      det.score = score.get<double>();
      if (!std::isfinite(det.score)) fail(ErrorCode::kNonFiniteValue, where + ": non-finite score");
      set.detections->push_back(det);
    }
  }

  if (const auto* props = detail::optional_array(doc, "proposals")) {
    set.proposals.emplace();
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < props->size(); ++i) {
      const std::string where = "proposals[" + std::to_string(i) + "]";
      const auto& p = (*props)[i];
      ProposalRecord rec;
      rec.image_id = int_field(p, "image_id", where);
      check_image(rec.image_id, where);
      rec.proposal_id = string_field(p, "proposal_id", where);
      if (!seen.insert(rec.proposal_id).second) {
        fail(ErrorCode::kDuplicateId, where + ": duplicate proposal_id '" + rec.proposal_id + "'");
      }
      rec.box = detail::bbox_from_json(detail::field(p, "bbox", where), where);
      if (auto it = p.find("mask"); it != p.end()) {
        if (!it->is_string()) fail(ErrorCode::kSchema, where + ": mask must be a string");
        rec.mask_file = it->get<std::string>();
      }
      if (auto it = p.find("square_bbox"); it != p.end()) {
        rec.square_box = detail::bbox_from_json(*it, where + ".square_bbox");
      }
      set.proposals->push_back(std::move(rec));
    }
  }

  if (auto it = doc.find("metadata"); it != doc.end()) {
    set.metadata = *it;
  }
  return set;
}

inline std::string dump_annotations(const AnnotationSet& set) {
  return annotations_to_json(set).dump(1) + "\n";
}

inline AnnotationSet parse_annotations(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed annotation JSON: ") + e.what());
  }
  try {
    return annotations_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("annotation schema error: ") + e.what());
  }
}

inline void write_annotations(const std::filesystem::path& path, const AnnotationSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out << dump_annotations(set);
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

inline AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingPath, "cannot open annotation file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_annotations(ss.str());
}

}  // namespace insdet
