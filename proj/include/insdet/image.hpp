#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "insdet/error.hpp"

namespace insdet {

// 8-bit interleaved image. `channels` is 1 (gray), 3 (RGB) or 4 (RGBA).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3 && c != 4)) {
      fail(ErrorCode::kInvalidArgument, "invalid image shape");
    }
  }

  bool empty() const { return pixels.empty(); }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

struct ImageInfo {
  int width = 0;
  int height = 0;
  int channels = 0;
};

namespace detail {

inline png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
  }
  fail(ErrorCode::kInvalidArgument, "unsupported channel count");
}

inline int channels_of(png_uint_32 format) {
  return static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(format));
}

}  // namespace detail

// Header-only probe; does not decode pixel data.
inline ImageInfo probe_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::kDecode, "unreadable image " + path.string() + ": " + msg);
  }
  ImageInfo info{static_cast<int>(img.width), static_cast<int>(img.height),
                 detail::channels_of(img.format)};
  png_image_free(&img);
  return info;
}

// Decodes a PNG. `channels` = 0 keeps the file's layout (gray, gray+alpha is
// promoted to RGBA); otherwise converts to 1, 3 or 4 channels.
inline Image read_png(const std::filesystem::path& path, int channels = 0) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::kDecode, "unreadable image " + path.string() + ": " + msg);
  }
  if (channels == 0) {
    channels = detail::channels_of(img.format);
    if (channels == 2) channels = 4;
  }
  img.format = detail::png_format_for(channels);
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::kDecode, "corrupt image " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = detail::png_format_for(image.channels);
  if (!png_image_write_to_file(&img, path.string().c_str(), 0,
                               image.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::kIo, "cannot write " + path.string() + ": " + msg);
  }
}

// Area-averaging resize. Each destination pixel averages the source pixels
// it covers, weighted by overlap. Suitable for both up- and down-scaling.
inline Image resize_area(const Image& src, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) {
    fail(ErrorCode::kDegenerateScale, "degenerate scale");
  }
  if (out_w == src.width && out_h == src.height) return src;
  Image dst(out_w, out_h, src.channels);
  const double sx = double(src.width) / out_w;
  const double sy = double(src.height) / out_h;

  struct Tap {
    int index;
    double weight;
  };
  auto taps_for = [](int out, double scale, int limit) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const double lo = o * scale;
      const double hi = std::min((o + 1) * scale, double(limit));
      int first = static_cast<int>(std::floor(lo));
      int last = std::min(limit - 1, static_cast<int>(std::ceil(hi)) - 1);
      double total = 0.0;
      for (int i = first; i <= last; ++i) {
        const double w = std::min(hi, i + 1.0) - std::max(lo, double(i));
        if (w > 0.0) {
          taps[o].push_back({i, w});
          total += w;
        }
      }
      if (taps[o].empty()) {
        taps[o].push_back({std::clamp(first, 0, limit - 1), 1.0});
        total = 1.0;
      }
      for (auto& t : taps[o]) t.weight /= total;
    }
    return taps;
  };
  const auto xtaps = taps_for(out_w, sx, src.width);
  const auto ytaps = taps_for(out_h, sy, src.height);

  const int c = src.channels;
  const bool has_alpha = c == 4;
  std::vector<double> acc(static_cast<std::size_t>(c));
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& ty : ytaps[y]) {
        for (const auto& tx : xtaps[x]) {
          const double w = ty.weight * tx.weight;
          const double a =
              has_alpha ? src.at(tx.index, ty.index, 3) / 255.0 : 1.0;
          for (int k = 0; k < c; ++k) {
            // Color is alpha-weighted so transparent pixels do not bleed in.
            const double wk = (has_alpha && k < 3) ? w * a : w;
            acc[k] += wk * src.at(tx.index, ty.index, k);
          }
        }
      }
      if (has_alpha) {
        const double alpha = acc[3];
        for (int k = 0; k < 3; ++k) {
          const double v = alpha > 0.0 ? acc[k] / (alpha / 255.0) : 0.0;
          dst.at(x, y, k) = static_cast<std::uint8_t>(
              std::clamp(std::lround(v), 0L, 255L));
        }
        dst.at(x, y, 3) =
            static_cast<std::uint8_t>(std::clamp(std::lround(alpha), 0L, 255L));
      } else {
        for (int k = 0; k < c; ++k) {
          dst.at(x, y, k) = static_cast<std::uint8_t>(
              std::clamp(std::lround(acc[k]), 0L, 255L));
        }
      }
    }
  }
  return dst;
}

}  // namespace insdet
