#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "auverify/colormap_table.hpp"
#include "auverify/geometry.hpp"
#include "auverify/image_io.hpp"

namespace auverify {

/// Divides by the largest magnitude so the extreme pixel maps to +-1. With
/// `percentile` < 100 the scale is that percentile of |v| and values are
/// clipped to [-1, 1].
inline Tensor normalize_symmetric(const Tensor& grid, double percentile = 100.0) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ConfigError("normalization percentile must lie in (0,100]");
  }
  double scale = 0.0;
  if (percentile >= 100.0) {
    for (float v : grid.values()) scale = std::max(scale, std::abs(static_cast<double>(v)));
  } else {
    std::vector<double> mags;
    mags.reserve(grid.size());
    for (float v : grid.values()) mags.push_back(std::abs(static_cast<double>(v)));
    std::sort(mags.begin(), mags.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(mags.size())));
    scale = mags[std::clamp<std::size_t>(rank, 1, mags.size()) - 1];
  }
  Tensor out(grid.shape());
  if (scale == 0.0) return out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = static_cast<double>(grid[i]) / scale;
    out[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

enum class Colormap { diverging_red_blue, grayscale };

inline Rgb colormap_entry(Colormap cmap, std::size_t index) {
  if (cmap == Colormap::grayscale) {
    const auto g = static_cast<std::uint8_t>(index);
    return {g, g, g};
  }
  return kDivergingRedBlue[index];
}

/// [-1,1] -> table index; 0 lands on entry 128, 1 on entry 255.
inline std::size_t colormap_index(double v) {
  return static_cast<std::size_t>(std::clamp(std::floor((v + 1.0) * 127.5 + 0.5), 0.0, 255.0));
}

struct Overlay {
  const Tensor& source;  // CxHxW in [0,1]
  double alpha = 0.5;    // weight of the heatmap
};

/// Colors an HxW grid of values in [-1,1], optionally alpha-blended over the
/// source crop.
inline Image8 render(const Tensor& normalized, Colormap cmap = Colormap::diverging_red_blue,
                     const Overlay* overlay = nullptr) {
  if (normalized.rank() != 2) {
    throw DimensionError("render expects an HxW grid, got " + shape_str(normalized.shape()));
  }
  const std::size_t h = normalized.dim(0), w = normalized.dim(1);
  if (overlay) {
    const Shape& s = overlay->source.shape();
    if (s.size() != 3 || s[1] != h || s[2] != w) {
      throw DimensionError("overlay source " + shape_str(s) + " does not match grid " +
                           shape_str(normalized.shape()));
    }
    if (!(overlay->alpha >= 0.0 && overlay->alpha <= 1.0)) {
      throw ConfigError("overlay alpha must lie in [0,1]");
    }
  }
  Image8 img(w, h, 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = normalized.at(y, x);
      if (!(v >= -1.0 && v <= 1.0)) {
        throw ConfigError("render: grid value " + std::to_string(v) + " at (" +
                          std::to_string(y) + "," + std::to_string(x) + ") outside [-1,1]");
      }
      const Rgb color = colormap_entry(cmap, colormap_index(v));
      std::uint8_t* px = img.at(x, y);
      for (std::size_t c = 0; c < 3; ++c) {
        if (!overlay) {
          px[c] = color[c];
          continue;
        }
        const Tensor& src = overlay->source;
        const double base = std::clamp(
            static_cast<double>(src.at(src.dim(0) == 3 ? c : 0, y, x)), 0.0, 1.0) * 255.0;
        const double mixed = overlay->alpha * color[c] + (1.0 - overlay->alpha) * base;
        px[c] = static_cast<std::uint8_t>(std::lround(mixed));
      }
    }
  }
  return img;
}

/// 1-px outline on the inclusive box coordinates, clipped to the image.
inline Image8 draw_box(Image8 image, const BoundingBox& box, Rgb color) {
  auto paint = [&](long x, long y) {
    if (x < 0 || y < 0 || x >= static_cast<long>(image.width) ||
        y >= static_cast<long>(image.height)) {
      return;
    }
    std::uint8_t* px = image.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    for (std::size_t c = 0; c < image.channels; ++c) px[c] = color[std::min<std::size_t>(c, 2)];
  };
  for (long x = box.x_min; x <= box.x_max; ++x) {
    paint(x, box.y_min);
    paint(x, box.y_max);
  }
  for (long y = box.y_min; y <= box.y_max; ++y) {
    paint(box.x_min, y);
    paint(box.x_max, y);
  }
  return image;
}

inline std::string heatmap_filename(const std::string& image_id, const std::string& au,
                                    const std::string& preset) {
  std::string safe = image_id;
  for (char& ch : safe) {
    if (ch == '/' || ch == '\\' || ch == ':') ch = '_';
  }
  return safe + "_" + au + "_" + preset + ".png";
}

}  // namespace auverify
