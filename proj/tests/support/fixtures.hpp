#pragma once

// Procedural stand-ins for profile views and backgrounds, so tests need no
// image files on disk.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "insdet/image.hpp"
#include "insdet/rng.hpp"
#include "insdet/synth.hpp"

namespace fixtures {

// An ellipse of opaque texture inside a transparent margin, with a soft
// one-pixel alpha rim. `hue` varies the colors between instances.
inline insdet::Image ellipse_view(int w, int h, int hue, int margin = 3) {
  insdet::Image img(w + 2 * margin, h + 2 * margin, 4);
  const double cx = img.width / 2.0, cy = img.height / 2.0;
  const double rx = w / 2.0, ry = h / 2.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double a = std::clamp((1.0 - d) * std::min(rx, ry) + 0.5, 0.0, 1.0);
      img.at(x, y, 0) = static_cast<std::uint8_t>((40 + 37 * hue + 3 * x) % 256);
      img.at(x, y, 1) = static_cast<std::uint8_t>((90 + 11 * hue + 5 * y) % 256);
      img.at(x, y, 2) = static_cast<std::uint8_t>((200 + 53 * hue + x * y) % 256);
      img.at(x, y, 3) = static_cast<std::uint8_t>(std::lround(a * 255));
    }
  }
  return img;
}

// A fully opaque solid rectangle, no margin.
inline insdet::Image solid_view(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  insdet::Image img(w, h, 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
      img.at(x, y, 3) = 255;
    }
  }
  return img;
}

inline std::vector<insdet::ForegroundAsset> ellipse_assets(int instances, int views) {
  std::vector<insdet::ForegroundAsset> out;
  for (int i = 0; i < instances; ++i) {
    for (int v = 0; v < views; ++v) {
      const int w = 40 + 7 * ((i + v) % 5), h = 30 + 9 * ((i * 3 + v) % 4);
      out.push_back(insdet::make_asset(i + 1, "obj" + std::to_string(i + 1), v,
                                       ellipse_view(w, h, i * 5 + v)));
    }
  }
  return out;
}

inline insdet::Image noise_background(int w, int h, std::uint64_t seed) {
  insdet::Image img(w, h, 3);
  insdet::Rng rng(seed);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

inline insdet::Image flat_background(int w, int h, std::uint8_t v) {
  insdet::Image img(w, h, 3);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

inline std::vector<insdet::Background> backgrounds(int n, int w, int h) {
  std::vector<insdet::Background> out;
  for (int i = 0; i < n; ++i) out.push_back({"bg" + std::to_string(i), noise_background(w, h, 100 + i)});
  return out;
}

// Writes a dataset tree in the default layout: objects/<instance>/<view>.png
// and backgrounds/<n>.png.
inline void write_dataset(const std::filesystem::path& root, int instances, int views,
                          int backgrounds_n = 2) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "backgrounds");
  for (int i = 0; i < instances; ++i) {
    char dir[32];
    std::snprintf(dir, sizeof dir, "%03d_obj%d", i + 1, i + 1);
    fs::create_directories(root / "objects" / dir);
    for (int v = 0; v < views; ++v) {
      char name[32];
      std::snprintf(name, sizeof name, "%02d.png", v);
      insdet::write_png(root / "objects" / dir / name, ellipse_view(30 + v % 4, 24 + i % 3, i + v));
    }
  }
  for (int b = 0; b < backgrounds_n; ++b) {
    insdet::write_png(root / "backgrounds" / ("bg" + std::to_string(b) + ".png"),
                      noise_background(160, 120, 7 + b));
  }
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("insdet_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
