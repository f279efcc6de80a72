#pragma once

// Cut-paste-learn scene synthesis.
//
// Segmented foreground instances are rescaled, optionally aspect-jittered,
// and pasted onto background images. Blending softens only the alpha
// transition band just inside the instance mask, so the opaque footprint
// (and therefore the annotated box) is exactly the rescaled hard mask.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "insdet/annotations.hpp"
#include "insdet/error.hpp"
#include "insdet/geometry.hpp"
#include "insdet/image.hpp"
#include "insdet/parallel.hpp"
#include "insdet/records.hpp"
#include "insdet/rng.hpp"

namespace insdet {

enum class BlendMode { kGaussian, kMotion, kBox, kNaive };

inline constexpr std::array<BlendMode, 4> kAllBlendModes = {
    BlendMode::kGaussian, BlendMode::kMotion, BlendMode::kBox, BlendMode::kNaive};

inline std::string_view to_string(BlendMode mode) {
  switch (mode) {
    case BlendMode::kGaussian: return "gaussian";
    case BlendMode::kMotion: return "motion";
    case BlendMode::kBox: return "box";
    case BlendMode::kNaive: return "naive";
  }
  return "naive";
}

inline BlendMode parse_blend_mode(std::string_view text) {
  for (auto mode : kAllBlendModes) {
    if (to_string(mode) == text) return mode;
  }
  fail(ErrorCode::kConfig, "unknown blend mode '" + std::string(text) + "'");
}

struct BlurParams {
  double gaussian_sigma = 2.0;  // px
  int box_size = 5;             // odd kernel side, px
  int motion_length = 7;        // px; angle is drawn per placement
};

enum class PlacementPolicy {
  kCenterInside,  // placement center lies on the canvas
  kFullyInside,   // whole pasted patch lies on the canvas when it fits
};

struct SynthConfig {
  int count_min = 25;
  int count_max = 35;
  double scale_min = 0.15;
  double scale_max = 0.5;
  bool aspect_jitter = true;
  double jitter_min = 0.85;
  double jitter_max = 1.18;
  std::vector<BlendMode> blend_modes{kAllBlendModes.begin(), kAllBlendModes.end()};
  BlurParams blur;
  // Annotations whose unoccluded share falls below this are dropped.
  double min_visible_fraction = 0.05;
  // Canvas size; 0 x 0 keeps each background's native size.
  int output_width = 1024;
  int output_height = 768;
  // Side of the square profile crop that `scale` multiplies.
  int canonical_size = 256;
  PlacementPolicy placement = PlacementPolicy::kCenterInside;
  // Each instance at most once per scene, as in real test scenes.
  bool distinct_instances = false;

  void validate() const {
    auto bad = [](const std::string& msg) { fail(ErrorCode::kConfig, msg); };
    if (count_min < 0 || count_min > count_max) bad("count range must satisfy 0 <= min <= max");
    if (!(scale_min > 0.0) || !(scale_min <= scale_max) || !std::isfinite(scale_max)) {
      bad("scale range must satisfy 0 < min <= max");
    }
    if (aspect_jitter && (!(jitter_min > 0.0) || !(jitter_min <= jitter_max) ||
                          !std::isfinite(jitter_max))) {
      bad("aspect jitter range must satisfy 0 < min <= max");
    }
    if (blend_modes.empty()) bad("at least one blend mode must be enabled");
    for (std::size_t i = 0; i < blend_modes.size(); ++i) {
      for (std::size_t j = i + 1; j < blend_modes.size(); ++j) {
        if (blend_modes[i] == blend_modes[j]) bad("duplicate blend mode");
      }
    }
    if (!(blur.gaussian_sigma >= 0.0) || !std::isfinite(blur.gaussian_sigma)) {
      bad("gaussian_sigma must be >= 0");
    }
    if (blur.box_size < 1 || blur.box_size % 2 == 0) bad("box_size must be odd and >= 1");
    if (blur.motion_length < 1) bad("motion_length must be >= 1");
    if (!(min_visible_fraction >= 0.0 && min_visible_fraction <= 1.0)) {
      bad("min_visible_fraction must lie in [0, 1]");
    }
    if ((output_width == 0) != (output_height == 0) || output_width < 0 || output_height < 0) {
      bad("output_size must be two positive integers or [0, 0]");
    }
    if (canonical_size < 1) bad("canonical_size must be >= 1");
  }
};

inline nlohmann::ordered_json synth_config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json modes = nlohmann::ordered_json::array();
  for (auto m : c.blend_modes) modes.push_back(std::string(to_string(m)));
  return {
      {"count_range", {c.count_min, c.count_max}},
      {"scale_range", {c.scale_min, c.scale_max}},
      {"aspect_jitter", {{"enabled", c.aspect_jitter}, {"range", {c.jitter_min, c.jitter_max}}}},
      {"blend_modes", modes},
      {"blur",
       {{"gaussian_sigma", c.blur.gaussian_sigma},
        {"box_size", c.blur.box_size},
        {"motion_length", c.blur.motion_length}}},
      {"min_visible_fraction", c.min_visible_fraction},
      {"output_size", {c.output_width, c.output_height}},
      {"canonical_size", c.canonical_size},
      {"placement", c.placement == PlacementPolicy::kCenterInside ? "center_inside" : "fully_inside"},
      {"distinct_instances", c.distinct_instances},
  };
}

// Overlays keys from `j` onto `base`. Keys listed in `passthrough` are
// accepted and left to the caller; any other unknown key is a config error.
inline SynthConfig synth_config_from_json(const nlohmann::ordered_json& j, SynthConfig base = {},
                                          std::span<const std::string_view> passthrough = {}) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "config must be a key-value object");
  auto pair_of = [](const nlohmann::ordered_json& v, const std::string& key, auto& lo, auto& hi) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(ErrorCode::kConfig, key + " must be [min, max]");
    }
    lo = v[0].get<std::remove_reference_t<decltype(lo)>>();
    hi = v[1].get<std::remove_reference_t<decltype(hi)>>();
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "count_range") {
        pair_of(v, key, base.count_min, base.count_max);
      } else if (key == "scale_range") {
        pair_of(v, key, base.scale_min, base.scale_max);
      } else if (key == "aspect_jitter") {
        if (v.is_boolean()) {
          base.aspect_jitter = v.get<bool>();
          continue;
        }
        if (!v.is_object()) fail(ErrorCode::kConfig, "aspect_jitter must be an object or bool");
        for (const auto& [k2, v2] : v.items()) {
          if (k2 == "enabled") base.aspect_jitter = v2.get<bool>();
          else if (k2 == "range") pair_of(v2, "aspect_jitter.range", base.jitter_min, base.jitter_max);
          else fail(ErrorCode::kConfig, "unknown key aspect_jitter." + k2);
        }
      } else if (key == "blend_modes") {
        if (!v.is_array()) fail(ErrorCode::kConfig, "blend_modes must be an array");
        base.blend_modes.clear();
        for (const auto& m : v) base.blend_modes.push_back(parse_blend_mode(m.get<std::string>()));
      } else if (key == "blur") {
        if (!v.is_object()) fail(ErrorCode::kConfig, "blur must be an object");
        for (const auto& [k2, v2] : v.items()) {
          if (k2 == "gaussian_sigma") base.blur.gaussian_sigma = v2.get<double>();
          else if (k2 == "box_size") base.blur.box_size = v2.get<int>();
          else if (k2 == "motion_length") base.blur.motion_length = v2.get<int>();
          else fail(ErrorCode::kConfig, "unknown key blur." + k2);
        }
      } else if (key == "min_visible_fraction") {
        base.min_visible_fraction = v.get<double>();
      } else if (key == "output_size") {
        pair_of(v, key, base.output_width, base.output_height);
      } else if (key == "canonical_size") {
        base.canonical_size = v.get<int>();
      } else if (key == "placement") {
        const auto p = v.get<std::string>();
        if (p == "center_inside") base.placement = PlacementPolicy::kCenterInside;
        else if (p == "fully_inside") base.placement = PlacementPolicy::kFullyInside;
        else fail(ErrorCode::kConfig, "placement must be center_inside or fully_inside");
      } else if (key == "distinct_instances") {
        base.distinct_instances = v.get<bool>();
      } else if (std::find(passthrough.begin(), passthrough.end(), key) == passthrough.end()) {
        fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config type error: ") + e.what());
  }
  base.validate();
  return base;
}

inline constexpr std::uint8_t kOpaqueAlpha = 128;

// One segmented profile view of a catalog instance, cropped to the tight
// box of its opaque pixels.
struct ForegroundAsset {
  InstanceId instance_id = 0;
  std::string instance_name;
  int view_index = 0;
  Image rgba;
};

inline ForegroundAsset make_asset(InstanceId id, std::string name, int view, const Image& rgba) {
  if (rgba.channels != 4) fail(ErrorCode::kInvalidArgument, "asset image must be RGBA");
  Mask opaque(rgba.width, rgba.height);
  for (int y = 0; y < rgba.height; ++y) {
    for (int x = 0; x < rgba.width; ++x) opaque.set(x, y, rgba.at(x, y, 3) >= kOpaqueAlpha);
  }
  const auto box = tight_box(opaque);
  if (!box) {
    fail(ErrorCode::kEmptyInput, "asset " + name + "/" + std::to_string(view) + " has no opaque pixel");
  }
  const int x0 = int(box->x_min), y0 = int(box->y_min);
  Image crop(int(box->width()), int(box->height()), 4);
  for (int y = 0; y < crop.height; ++y) {
    for (int x = 0; x < crop.width; ++x) {
      for (int c = 0; c < 4; ++c) crop.at(x, y, c) = rgba.at(x0 + x, y0 + y, c);
    }
  }
  return {id, std::move(name), view, std::move(crop)};
}

struct Placement {
  std::size_t asset_index = 0;
  double scale = 1.0;
  double aspect_jitter = 1.0;  // width multiplier
  double center_x = 0.0;
  double center_y = 0.0;
  BlendMode blend_mode = BlendMode::kNaive;
  double motion_angle = 0.0;  // radians, used by motion blur only

  friend bool operator==(const Placement&, const Placement&) = default;
};

struct PatchSize {
  int width = 0;
  int height = 0;
};

// Pasted size: the asset's longer side maps to canonical_size, then `scale`
// applies to both axes and the jitter to the width.
inline PatchSize placed_size(const ForegroundAsset& asset, double scale, double jitter,
                             int canonical_size) {
  const double k = double(canonical_size) / std::max(asset.rgba.width, asset.rgba.height);
  return {static_cast<int>(std::lround(asset.rgba.width * k * scale * jitter)),
          static_cast<int>(std::lround(asset.rgba.height * k * scale))};
}

// Draws the placement list for one scene. Fully deterministic in `rng`.
inline std::vector<Placement> sample_placements(const SynthConfig& config,
                                                std::span<const ForegroundAsset> assets,
                                                int canvas_w, int canvas_h, Rng& rng) {
  config.validate();
  if (assets.empty()) fail(ErrorCode::kEmptyInput, "empty asset catalog");
  if (canvas_w <= 0 || canvas_h <= 0) fail(ErrorCode::kInvalidArgument, "empty canvas");
  std::set<InstanceId> unused;
  if (config.distinct_instances) {
    for (const auto& a : assets) unused.insert(a.instance_id);
    if (std::size_t(config.count_max) > unused.size()) {
      fail(ErrorCode::kConfig, "distinct_instances needs count_max <= number of instances (" +
                                   std::to_string(unused.size()) + ")");
    }
  }
  const auto n = rng.uniform_int(config.count_min, config.count_max);
  std::vector<Placement> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    Placement p;
    do {
      p.asset_index = static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(assets.size()) - 1));
    } while (config.distinct_instances && !unused.count(assets[p.asset_index].instance_id));
    unused.erase(assets[p.asset_index].instance_id);
    p.scale = rng.uniform(config.scale_min, config.scale_max);
    p.aspect_jitter = config.aspect_jitter ? rng.uniform(config.jitter_min, config.jitter_max) : 1.0;
    p.blend_mode = config.blend_modes[static_cast<std::size_t>(
        rng.uniform_int(0, std::int64_t(config.blend_modes.size()) - 1))];
    p.motion_angle = rng.uniform(0.0, std::numbers::pi);
    double x_lo = 0.0, x_hi = canvas_w, y_lo = 0.0, y_hi = canvas_h;
    if (config.placement == PlacementPolicy::kFullyInside) {
      const auto size = placed_size(assets[p.asset_index], p.scale, p.aspect_jitter,
                                    config.canonical_size);
      if (size.width <= canvas_w) {
        x_lo = size.width / 2.0;
        x_hi = canvas_w - size.width / 2.0;
      }
      if (size.height <= canvas_h) {
        y_lo = size.height / 2.0;
        y_hi = canvas_h - size.height / 2.0;
      }
    }
    // Half-open canvas: keep the center strictly left of the far edge.
    p.center_x = std::min(rng.uniform(x_lo, x_hi), std::nextafter(double(canvas_w), 0.0));
    p.center_y = std::min(rng.uniform(y_lo, y_hi), std::nextafter(double(canvas_h), 0.0));
    out.push_back(p);
  }
  return out;
}

inline std::vector<Placement> sample_placements(const SynthConfig& config,
                                                std::span<const ForegroundAsset> assets,
                                                int canvas_w, int canvas_h,
                                                std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_placements(config, assets, canvas_w, canvas_h, rng);
}

namespace detail {

// Float plane with a zero border so kernels can read past the patch edge.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<float> v;

  float at(int x, int y) const {
    if (x < 0 || y < 0 || x >= width || y >= height) return 0.0f;
    return v[static_cast<std::size_t>(y) * width + x];
  }
};

inline std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    s += k[i + r];
  }
  for (auto& x : k) x /= s;
  return k;
}

inline Plane convolve_separable(const Plane& in, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  Plane tmp{in.width, in.height, std::vector<float>(in.v.size())};
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * in.at(x + i, y);
      tmp.v[static_cast<std::size_t>(y) * in.width + x] = static_cast<float>(s);
    }
  }
  Plane out{in.width, in.height, std::vector<float>(in.v.size())};
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, y + i);
      out.v[static_cast<std::size_t>(y) * in.width + x] = static_cast<float>(s);
    }
  }
  return out;
}

// Normalized line kernel of `length` px at `angle`, rasterized by bilinear
// splatting of dense samples along the segment.
inline std::vector<double> motion_kernel(int length, double angle, int& radius) {
  radius = (length + 1) / 2;
  const int side = 2 * radius + 1;
  std::vector<double> k(static_cast<std::size_t>(side * side), 0.0);
  const int samples = 4 * length + 1;
  const double half = (length - 1) / 2.0;
  const double c = std::cos(angle), s = std::sin(angle);
  for (int i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : -half + 2.0 * half * i / (samples - 1);
    const double x = t * c + radius, y = t * s + radius;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto splat = [&](int xx, int yy, double w) {
      if (xx >= 0 && yy >= 0 && xx < side && yy < side) k[yy * side + xx] += w;
    };
    splat(x0, y0, (1 - fx) * (1 - fy));
    splat(x0 + 1, y0, fx * (1 - fy));
    splat(x0, y0 + 1, (1 - fx) * fy);
    splat(x0 + 1, y0 + 1, fx * fy);
  }
  double total = 0.0;
  for (double w : k) total += w;
  for (auto& w : k) w /= total;
  return k;
}

inline Plane convolve_2d(const Plane& in, const std::vector<double>& k, int radius) {
  const int side = 2 * radius + 1;
  Plane out{in.width, in.height, std::vector<float>(in.v.size())};
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double w = k[(dy + radius) * side + (dx + radius)];
          if (w != 0.0) s += w * in.at(x - dx, y - dy);
        }
      }
      out.v[static_cast<std::size_t>(y) * in.width + x] = static_cast<float>(s);
    }
  }
  return out;
}

}  // namespace detail

// Feathered alpha for a hard mask: the blurred mask, clipped to the mask
// itself, so softening stays inside the footprint.
inline std::vector<float> feather_alpha(const Mask& hard, BlendMode mode, const BlurParams& blur,
                                        double motion_angle) {
  detail::Plane plane{hard.width(), hard.height(), {}};
  plane.v.reserve(hard.bits().size());
  for (auto b : hard.bits()) plane.v.push_back(b ? 1.0f : 0.0f);
  detail::Plane soft;
  switch (mode) {
    case BlendMode::kNaive:
      return plane.v;
    case BlendMode::kGaussian:
      if (blur.gaussian_sigma <= 0.0) return plane.v;
      soft = detail::convolve_separable(plane, detail::gaussian_kernel(blur.gaussian_sigma));
      break;
    case BlendMode::kBox: {
      if (blur.box_size <= 1) return plane.v;
      std::vector<double> k(static_cast<std::size_t>(blur.box_size), 1.0 / blur.box_size);
      soft = detail::convolve_separable(plane, k);
      break;
    }
    case BlendMode::kMotion: {
      if (blur.motion_length <= 1) return plane.v;
      int radius = 0;
      const auto k = detail::motion_kernel(blur.motion_length, motion_angle, radius);
      soft = detail::convolve_2d(plane, k, radius);
      break;
    }
  }
  for (std::size_t i = 0; i < plane.v.size(); ++i) {
    plane.v[i] = std::min(plane.v[i], std::clamp(soft.v[i], 0.0f, 1.0f));
  }
  return plane.v;
}

// A rescaled asset ready to paste: color, feathered alpha, and hard mask, at
// canvas offset (left, top).
struct Patch {
  int left = 0;
  int top = 0;
  Image rgb;
  std::vector<float> alpha;
  Mask hard;
};

inline Patch prepare_patch(const ForegroundAsset& asset, const Placement& placement,
                           const BlurParams& blur, int canonical_size) {
  const auto size = placed_size(asset, placement.scale, placement.aspect_jitter, canonical_size);
  if (size.width < 1 || size.height < 1) fail(ErrorCode::kDegenerateScale, "degenerate scale");
  const Image scaled = resize_area(asset.rgba, size.width, size.height);
  Patch patch;
  patch.hard = Mask(size.width, size.height);
  patch.rgb = Image(size.width, size.height, 3);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      patch.hard.set(x, y, scaled.at(x, y, 3) >= kOpaqueAlpha);
      for (int c = 0; c < 3; ++c) patch.rgb.at(x, y, c) = scaled.at(x, y, c);
    }
  }
  if (patch.hard.count() == 0) fail(ErrorCode::kDegenerateScale, "degenerate scale");
  patch.alpha = feather_alpha(patch.hard, placement.blend_mode, blur, placement.motion_angle);
  patch.left = static_cast<int>(std::floor(placement.center_x - size.width / 2.0));
  patch.top = static_cast<int>(std::floor(placement.center_y - size.height / 2.0));
  return patch;
}

inline void paste(Image& canvas, const Patch& patch) {
  for (int y = 0; y < patch.rgb.height; ++y) {
    const int cy = patch.top + y;
    if (cy < 0 || cy >= canvas.height) continue;
    for (int x = 0; x < patch.rgb.width; ++x) {
      const int cx = patch.left + x;
      if (cx < 0 || cx >= canvas.width) continue;
      const float a = patch.alpha[static_cast<std::size_t>(y) * patch.rgb.width + x];
      if (a <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        if (a >= 1.0f) {
          canvas.at(cx, cy, c) = patch.rgb.at(x, y, c);
        } else {
          const double v = a * patch.rgb.at(x, y, c) + (1.0 - a) * canvas.at(cx, cy, c);
          canvas.at(cx, cy, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
}

inline bool patch_intersects(const Patch& patch, int canvas_w, int canvas_h) {
  return patch.left < canvas_w && patch.top < canvas_h && patch.left + patch.rgb.width > 0 &&
         patch.top + patch.rgb.height > 0;
}

// Composites one placement onto a copy of `background` (RGB).
inline Image blend(const Image& background, const ForegroundAsset& asset,
                   const Placement& placement, const BlurParams& blur = {},
                   int canonical_size = 256) {
  if (background.channels != 3) fail(ErrorCode::kInvalidArgument, "background must be RGB");
  const Patch patch = prepare_patch(asset, placement, blur, canonical_size);
  if (!patch_intersects(patch, background.width, background.height)) {
    fail(ErrorCode::kInvalidArgument, "placement footprint lies outside the image");
  }
  Image out = background;
  paste(out, patch);
  return out;
}

struct SceneAnnotation {
  InstanceId instance_id = 0;
  BoundingBox box;
  double visible_fraction = 1.0;
  std::size_t placement_index = 0;

  friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

struct SynthScene {
  Image image;
  std::vector<Placement> placements;
  std::vector<SceneAnnotation> annotations;
  std::uint64_t seed = 0;
  std::string background_id;
};

inline Image fit_background(const Image& background, const SynthConfig& config) {
  Image rgb = background;
  if (rgb.channels != 3) {
    Image conv(rgb.width, rgb.height, 3);
    for (int y = 0; y < rgb.height; ++y) {
      for (int x = 0; x < rgb.width; ++x) {
        for (int c = 0; c < 3; ++c) conv.at(x, y, c) = rgb.at(x, y, rgb.channels == 1 ? 0 : c);
      }
    }
    rgb = std::move(conv);
  }
  if (config.output_width > 0 &&
      (rgb.width != config.output_width || rgb.height != config.output_height)) {
    rgb = resize_area(rgb, config.output_width, config.output_height);
  }
  return rgb;
}

// Pastes placements in sampled order, later ones occluding earlier ones.
// Each annotation box is the tight box of the instance's on-canvas opaque
// footprint before occlusion; visible_fraction is the unoccluded share.
inline SynthScene compose_scene(const SynthConfig& config, std::span<const ForegroundAsset> assets,
                                const Image& background, std::string background_id,
                                std::uint64_t rng_seed) {
  config.validate();
  SynthScene scene;
  scene.seed = rng_seed;
  scene.background_id = std::move(background_id);
  scene.image = fit_background(background, config);
  const int w = scene.image.width, h = scene.image.height;

  Rng rng(rng_seed);
  scene.placements = sample_placements(config, assets, w, h, rng);

  std::vector<std::int32_t> owner(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> footprint(scene.placements.size(), 0);
  std::vector<std::optional<BoundingBox>> boxes(scene.placements.size());
  for (std::size_t k = 0; k < scene.placements.size(); ++k) {
    const auto& p = scene.placements[k];
    const Patch patch = prepare_patch(assets[p.asset_index], p, config.blur, config.canonical_size);
    paste(scene.image, patch);
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    for (int y = 0; y < patch.hard.height(); ++y) {
      const int cy = patch.top + y;
      if (cy < 0 || cy >= h) continue;
      for (int x = 0; x < patch.hard.width(); ++x) {
        const int cx = patch.left + x;
        if (cx < 0 || cx >= w || !patch.hard.at(x, y)) continue;
        owner[static_cast<std::size_t>(cy) * w + cx] = static_cast<std::int32_t>(k);
        ++footprint[k];
        x0 = std::min(x0, cx);
        y0 = std::min(y0, cy);
        x1 = std::max(x1, cx);
        y1 = std::max(y1, cy);
      }
    }
    if (footprint[k] > 0) boxes[k] = BoundingBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
  }

  std::vector<std::size_t> visible(scene.placements.size(), 0);
  for (auto o : owner) {
    if (o >= 0) ++visible[static_cast<std::size_t>(o)];
  }
  for (std::size_t k = 0; k < scene.placements.size(); ++k) {
    if (footprint[k] == 0 || visible[k] == 0) continue;
    const double frac = double(visible[k]) / double(footprint[k]);
    if (frac < config.min_visible_fraction) continue;
    scene.annotations.push_back(
        {assets[scene.placements[k].asset_index].instance_id, *boxes[k], frac, k});
  }
  return scene;
}

struct Background {
  std::string id;
  Image image;
};

// One scene from a scene seed: the background is drawn from a child stream,
// placements from another.
inline SynthScene synthesize_scene(const SynthConfig& config,
                                   std::span<const ForegroundAsset> assets,
                                   std::span<const Background> backgrounds, std::uint64_t seed) {
  if (backgrounds.empty()) fail(ErrorCode::kEmptyInput, "no background images");
  Rng pick(derive_seed(seed, 0));
  const auto& bg = backgrounds[static_cast<std::size_t>(
      pick.uniform_int(0, std::int64_t(backgrounds.size()) - 1))];
  SynthScene scene = compose_scene(config, assets, bg.image, bg.id, derive_seed(seed, 1));
  scene.seed = seed;
  return scene;
}

struct SceneRecord {
  std::size_t scene_id = 0;
  std::uint64_t seed = 0;
  std::string background_id;
  std::string file;
  std::size_t num_annotations = 0;
};

struct DatasetManifest {
  std::uint64_t master_seed = 0;
  std::vector<SceneRecord> scenes;
  std::filesystem::path annotation_file;
  std::filesystem::path manifest_file;
};

inline std::vector<InstanceRecord> catalog_of(std::span<const ForegroundAsset> assets) {
  std::map<InstanceId, std::string> seen;
  for (const auto& a : assets) seen.emplace(a.instance_id, a.instance_name);
  std::vector<InstanceRecord> out;
  for (const auto& [id, name] : seen) out.push_back({id, name});
  return out;
}

// Writes `count` scenes under out_dir/images/, one annotations.json and a
// line-delimited manifest.jsonl. Scene i uses seed derive_seed(master, i),
// so the output is identical for any thread count.
inline DatasetManifest generate_dataset(const SynthConfig& config,
                                        std::span<const ForegroundAsset> assets,
                                        std::span<const Background> backgrounds, std::size_t count,
                                        const std::filesystem::path& out_dir,
                                        std::uint64_t master_seed, unsigned threads = 1) {
  config.validate();
  if (count < 1) fail(ErrorCode::kConfig, "scene count must be >= 1");
  if (assets.empty()) fail(ErrorCode::kEmptyInput, "empty asset catalog");
  if (backgrounds.empty()) fail(ErrorCode::kEmptyInput, "no background images");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  std::vector<Background> fitted(backgrounds.size());
  parallel_for(backgrounds.size(), threads, [&](std::size_t i) {
    fitted[i] = {backgrounds[i].id, fit_background(backgrounds[i].image, config)};
  });

  std::vector<SceneRecord> records(count);
  std::vector<ImageRecord> images(count);
  std::vector<std::vector<SceneAnnotation>> annotations(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    SynthScene scene = synthesize_scene(config, assets, fitted, seed);
    char name[32];
    std::snprintf(name, sizeof name, "images/%06zu.png", i);
    write_png(out_dir / name, scene.image);
    records[i] = {i, seed, scene.background_id, name, scene.annotations.size()};
    images[i] = {static_cast<ImageId>(i + 1), name, scene.image.width, scene.image.height, {}};
    annotations[i] = std::move(scene.annotations);
  });

  AnnotationSet set;
  set.images = std::move(images);
  set.instances = catalog_of(assets);
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& a : annotations[i]) {
      set.annotations.push_back({static_cast<ImageId>(i + 1), a.instance_id, a.box, {},
                                 a.visible_fraction});
    }
  }
  set.metadata = {{"generator", "cut-paste"},
                  {"master_seed", master_seed},
                  {"count", count},
                  {"config", synth_config_to_json(config)}};

  DatasetManifest manifest;
  manifest.master_seed = master_seed;
  manifest.annotation_file = out_dir / "annotations.json";
  manifest.manifest_file = out_dir / "manifest.jsonl";
  write_annotations(manifest.annotation_file, set);

  std::ofstream lines(manifest.manifest_file, std::ios::binary | std::ios::trunc);
  if (!lines) fail(ErrorCode::kIo, "cannot open for writing: " + manifest.manifest_file.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j{{"scene_id", r.scene_id},
                             {"seed", r.seed},
                             {"background_id", r.background_id},
                             {"file", r.file},
                             {"annotations", r.num_annotations}};
    lines << j.dump() << '\n';
  }
  if (!lines) fail(ErrorCode::kIo, "write failed: " + manifest.manifest_file.string());
  manifest.scenes = std::move(records);
  return manifest;
}

}  // namespace insdet
