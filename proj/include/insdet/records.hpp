#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "insdet/error.hpp"
#include "insdet/geometry.hpp"

namespace insdet {

using ImageId = std::int64_t;
using InstanceId = std::int64_t;

// Per-scene clutter/occlusion level. Closed vocabulary.
enum class SceneTag { kEasy, kHard };

inline std::string_view to_string(SceneTag tag) {
  return tag == SceneTag::kEasy ? "easy" : "hard";
}

inline SceneTag parse_scene_tag(std::string_view text) {
  if (text == "easy") return SceneTag::kEasy;
  if (text == "hard") return SceneTag::kHard;
  fail(ErrorCode::kSchema,
       "scene_tag must be \"easy\" or \"hard\", got \"" + std::string(text) + "\"");
}

struct ImageRecord {
  ImageId id = 0;
  std::string file;
  int width = 0;
  int height = 0;
  std::optional<SceneTag> scene_tag;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct InstanceRecord {
  InstanceId id = 0;
  std::string name;

  friend bool operator==(const InstanceRecord&, const InstanceRecord&) = default;
};

// One annotated instance in one image.
struct GroundTruth {
  ImageId image_id = 0;
  InstanceId instance_id = 0;
  BoundingBox box;
  // Copied from the owning image record; constant within an image.
  std::optional<SceneTag> scene_tag;
  std::optional<double> visible_fraction;

  SizeTag size() const { return size_tag(box); }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Scored, instance-labeled box. Higher score means more confident.
struct Detection {
  ImageId image_id = 0;
  InstanceId instance_id = 0;
  BoundingBox box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Class-agnostic region proposal for one test image. `square_box` is the
// crop fed to the feature extractor.
struct ProposalRecord {
  ImageId image_id = 0;
  std::string proposal_id;
  BoundingBox box;
  std::optional<std::string> mask_file;
  std::optional<BoundingBox> square_box;

  friend bool operator==(const ProposalRecord&, const ProposalRecord&) = default;
};

}  // namespace insdet
