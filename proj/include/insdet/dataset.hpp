#pragma once

// On-disk dataset layout:
//
//   <root>/objects/<instance>/<view>.png   RGBA profile views, alpha = mask
//   <root>/backgrounds/*.png               RGB backgrounds
//   <root>/scenes/annotations.json         test images + ground truth
//
// A <root>/layout.json file may override any of the three subtree paths
// (keys "objects", "backgrounds", "scenes", "annotations"), relative to root.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "insdet/annotations.hpp"
#include "insdet/error.hpp"
#include "insdet/image.hpp"
#include "insdet/parallel.hpp"
#include "insdet/synth.hpp"

namespace insdet {

inline constexpr int kExpectedViews = 24;

struct ViewEntry {
  int view_index = 0;
  std::filesystem::path file;
  int width = 0;
  int height = 0;
};

struct InstanceEntry {
  InstanceId id = 0;
  std::string name;
  std::filesystem::path dir;
  std::vector<ViewEntry> views;
};

struct BackgroundEntry {
  std::string id;
  std::filesystem::path file;
  int width = 0;
  int height = 0;
};

struct DatasetLayout {
  std::filesystem::path root;
  std::filesystem::path objects_root;
  std::filesystem::path backgrounds_root;
  std::filesystem::path scenes_root;
  std::vector<InstanceEntry> instances;
  std::vector<BackgroundEntry> backgrounds;
  std::optional<std::filesystem::path> annotation_file;
  std::size_t num_scene_images = 0;
  std::size_t num_easy = 0;
  std::size_t num_hard = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir,
                                                         bool want_dirs) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    const auto name = e.path().filename().string();
    if (name.empty() || name[0] == '.') continue;
    if (want_dirs ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".png")) {
      out.push_back(e.path());
    }
  }
  if (ec) fail(ErrorCode::kIo, "cannot list " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::optional<long long> leading_integer(const std::string& s) {
  std::size_t n = 0;
  while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
  if (n == 0 || n > 18) return std::nullopt;
  return std::stoll(s.substr(0, n));
}

}  // namespace detail

inline DatasetLayout scan_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail(ErrorCode::kMissingPath, "dataset root not found: " + root.string());
  DatasetLayout layout;
  layout.root = root;
  layout.objects_root = root / "objects";
  layout.backgrounds_root = root / "backgrounds";
  layout.scenes_root = root / "scenes";
  std::optional<fs::path> annotations;
  bool explicit_backgrounds = false, explicit_scenes = false;

  if (fs::exists(root / "layout.json")) {
    nlohmann::json j;
    try {
      std::ifstream in(root / "layout.json");
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kSchema, "malformed layout.json: " + std::string(e.what()));
    }
    if (!j.is_object()) fail(ErrorCode::kSchema, "layout.json must be an object");
    for (const auto& [key, v] : j.items()) {
      if (!v.is_string()) fail(ErrorCode::kSchema, "layout.json values must be strings");
      const fs::path p = root / v.get<std::string>();
      if (key == "objects") layout.objects_root = p;
      else if (key == "backgrounds") layout.backgrounds_root = p, explicit_backgrounds = true;
      else if (key == "scenes") layout.scenes_root = p, explicit_scenes = true;
      else if (key == "annotations") annotations = p;
      else fail(ErrorCode::kSchema, "unknown layout.json key '" + key + "'");
    }
  }

  if (!fs::is_directory(layout.objects_root)) {
    fail(ErrorCode::kMissingPath, "missing objects subtree: " + layout.objects_root.string());
  }
  if (explicit_backgrounds && !fs::is_directory(layout.backgrounds_root)) {
    fail(ErrorCode::kMissingPath, "missing backgrounds subtree: " + layout.backgrounds_root.string());
  }
  if (explicit_scenes && !fs::is_directory(layout.scenes_root)) {
    fail(ErrorCode::kMissingPath, "missing scenes subtree: " + layout.scenes_root.string());
  }

  const auto dirs = detail::sorted_entries(layout.objects_root, true);
  bool numeric_names = !dirs.empty();
  for (const auto& d : dirs) {
    numeric_names = numeric_names && detail::leading_integer(d.filename().string()).has_value();
  }
  std::set<InstanceId> ids;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    InstanceEntry inst;
    inst.name = dirs[i].filename().string();
    inst.dir = dirs[i];
    inst.id = numeric_names ? *detail::leading_integer(inst.name) : InstanceId(i + 1);
    if (!ids.insert(inst.id).second) {
      fail(ErrorCode::kDuplicateId, "duplicate instance id " + std::to_string(inst.id) +
                                        " (" + inst.name + ")");
    }
    const auto files = detail::sorted_entries(dirs[i], false);
    if (files.empty()) fail(ErrorCode::kEmptyInput, "instance " + inst.name + " has no profile views");
    for (std::size_t v = 0; v < files.size(); ++v) {
      const auto info = probe_png(files[v]);
      const auto stem = detail::leading_integer(files[v].stem().string());
      inst.views.push_back({stem ? int(*stem) : int(v), files[v], info.width, info.height});
    }
    if (inst.views.size() != kExpectedViews) {
      layout.warnings.push_back("instance " + inst.name + " has " +
                                std::to_string(inst.views.size()) + " views, expected " +
                                std::to_string(kExpectedViews));
    }
    layout.instances.push_back(std::move(inst));
  }
  if (layout.instances.empty()) {
    fail(ErrorCode::kEmptyInput, "no instances under " + layout.objects_root.string());
  }

  if (fs::is_directory(layout.backgrounds_root)) {
    for (const auto& f : detail::sorted_entries(layout.backgrounds_root, false)) {
      const auto info = probe_png(f);
      layout.backgrounds.push_back({f.stem().string(), f, info.width, info.height});
    }
  }

  if (!annotations && fs::exists(layout.scenes_root / "annotations.json")) {
    annotations = layout.scenes_root / "annotations.json";
  }
  if (annotations) {
    if (!fs::exists(*annotations)) {
      fail(ErrorCode::kMissingPath, "missing annotation file: " + annotations->string());
    }
    const auto set = read_annotations(*annotations);
    layout.annotation_file = annotations;
    layout.num_scene_images = set.images.size();
    for (const auto& im : set.images) {
      if (im.scene_tag == SceneTag::kEasy) ++layout.num_easy;
      if (im.scene_tag == SceneTag::kHard) ++layout.num_hard;
    }
  }
  return layout;
}

// Decodes every profile view into a cropped foreground asset.
inline std::vector<ForegroundAsset> load_assets(const DatasetLayout& layout, unsigned threads = 1) {
  std::vector<std::pair<const InstanceEntry*, const ViewEntry*>> jobs;
  for (const auto& inst : layout.instances) {
    for (const auto& v : inst.views) jobs.emplace_back(&inst, &v);
  }
  std::vector<ForegroundAsset> assets(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& [inst, view] = jobs[i];
    assets[i] = make_asset(inst->id, inst->name, view->view_index, read_png(view->file, 4));
  });
  return assets;
}

inline std::vector<Background> load_backgrounds(const DatasetLayout& layout, unsigned threads = 1) {
  std::vector<Background> out(layout.backgrounds.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = {layout.backgrounds[i].id, read_png(layout.backgrounds[i].file, 3)};
  });
  return out;
}

}  // namespace insdet
