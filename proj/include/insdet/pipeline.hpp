#pragma once

// Glue between the on-disk formats and the matchers: profile features are
// grouped per instance, proposal features per image, and each image is
// matched independently.

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "insdet/annotations.hpp"
#include "insdet/feature_file.hpp"
#include "insdet/matching.hpp"
#include "insdet/parallel.hpp"

namespace insdet {

inline constexpr double kDefaultTau = 0.3;
inline constexpr std::string_view kTieBreakRule =
    "equal similarities resolve to the lower proposal index, then the lower instance index";

struct MatchConfig {
  double tau = kDefaultTau;
  MatchAlgorithm algorithm = MatchAlgorithm::kStable;
  bool strict = false;  // rank-select only: also retire matched instances
};

inline MatchAlgorithm parse_match_algorithm(std::string_view text) {
  if (text == "rank-select") return MatchAlgorithm::kRankSelect;
  if (text == "stable") return MatchAlgorithm::kStable;
  fail(ErrorCode::kConfig, "unknown algorithm '" + std::string(text) + "' (rank-select|stable)");
}

// Profile vector ids are "<instance>/<view>", where <instance> is the
// instance name or its numeric id. Returns profiles in catalog order;
// instances without any view are left out.
inline std::vector<InstanceProfile> profiles_from_features(const FeatureFile& file,
                                                           std::span<const InstanceRecord> catalog) {
  std::unordered_map<std::string, InstanceId> by_key;
  for (const auto& in : catalog) {
    by_key.emplace(in.name, in.id);
    by_key.emplace(std::to_string(in.id), in.id);
  }
  std::map<InstanceId, std::vector<FeatureVector>> views;
  for (std::size_t i = 0; i < file.count(); ++i) {
    const auto& id = file.ids[i];
    const auto slash = id.rfind('/');
    if (slash == std::string::npos) {
      fail(ErrorCode::kUnknownId, "profile vector id '" + id + "' is not <instance>/<view>");
    }
    auto it = by_key.find(id.substr(0, slash));
    if (it == by_key.end()) {
      fail(ErrorCode::kUnknownId, "profile vector '" + id + "' names no catalog instance");
    }
    const auto row = file.row(i);
    views[it->second].push_back({id, {row.begin(), row.end()}});
  }
  std::vector<InstanceProfile> out;
  for (const auto& in : catalog) {
    auto it = views.find(in.id);
    if (it != views.end()) out.push_back({in.id, std::move(it->second)});
  }
  return out;
}

struct ImageMatch {
  ImageId image_id = 0;
  MatchResult result;
  std::vector<Detection> detections;
};

// Matches every image's proposals against all profiles. Results come back in
// image order; a proposal without a feature vector is an error.
inline std::vector<ImageMatch> match_images(std::span<const ImageRecord> images,
                                            std::span<const ProposalRecord> proposals,
                                            const FeatureFile& proposal_features,
                                            std::span<const InstanceProfile> profiles,
                                            const MatchConfig& config, unsigned threads = 1) {
  if (!(config.tau >= -1.0 && config.tau <= 1.0)) fail(ErrorCode::kConfig, "tau must lie in [-1, 1]");
  if (!profiles.empty() && proposal_features.count() > 0 &&
      profiles.front().views.front().values.size() != proposal_features.dim) {
    fail(ErrorCode::kDimMismatch,
         "proposal features have dim " + std::to_string(proposal_features.dim) +
             ", profile features have dim " +
             std::to_string(profiles.front().views.front().values.size()));
  }
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < proposal_features.count(); ++i) row_of.emplace(proposal_features.ids[i], i);

  std::map<ImageId, std::vector<const ProposalRecord*>> per_image;
  for (const auto& p : proposals) per_image[p.image_id].push_back(&p);

  std::vector<ImageMatch> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t k) {
    ImageMatch& im = out[k];
    im.image_id = images[k].id;
    auto it = per_image.find(im.image_id);
    if (it == per_image.end() || profiles.empty()) return;
    std::vector<FeatureVector> vecs;
    std::vector<ProposalBox> boxes;
    for (const auto* p : it->second) {
      auto r = row_of.find(p->proposal_id);
      if (r == row_of.end()) {
        fail(ErrorCode::kUnknownId, "proposal '" + p->proposal_id + "' has no feature vector");
      }
      const auto row = proposal_features.row(r->second);
      vecs.push_back({p->proposal_id, {row.begin(), row.end()}});
      boxes.push_back({p->proposal_id, p->box});
    }
    const auto m = threshold_filter(similarity_matrix(vecs, profiles), config.tau);
    im.result = run_matcher(m, config.algorithm, config.strict);
    im.detections = to_detections(im.result, boxes, im.image_id);
  });
  return out;
}

}  // namespace insdet
