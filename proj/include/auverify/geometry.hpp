#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auverify/au.hpp"
#include "auverify/tensor.hpp"

namespace auverify {

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kChinLandmark = 8;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct ImageDims {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// 68 landmarks in the Multi-PIE scheme, in crop pixel coordinates.
struct LandmarkSet {
  std::array<Point, kLandmarkCount> points{};
  /// Indices of points outside the image; boxes clip anyway.
  std::vector<std::size_t> out_of_bounds;
};

/// Checks count, finiteness and that at least one point lies in the image.
inline LandmarkSet validate_landmarks(const std::vector<Point>& points, ImageDims dims) {
  if (points.size() != kLandmarkCount) {
    throw GeometryError("expected 68 landmarks, got " + std::to_string(points.size()));
  }
  LandmarkSet set;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const Point& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw GeometryError("landmark " + std::to_string(i) + " has a non-finite coordinate");
    }
    set.points[i] = p;
    const bool inside = p.x >= 0.0 && p.y >= 0.0 &&
                        p.x <= static_cast<double>(dims.width) - 1.0 &&
                        p.y <= static_cast<double>(dims.height) - 1.0;
    if (!inside) set.out_of_bounds.push_back(i);
  }
  if (set.out_of_bounds.size() == kLandmarkCount) {
    throw GeometryError("all landmarks lie outside the image");
  }
  return set;
}

struct AuRegion {
  std::vector<std::size_t> landmarks;
  double margin = 4.0;
  /// Extends the bottom edge by this fraction of the distance from the
  /// region's lowest landmark down to the chin (landmark 8).
  double extend_down_frac = 0.0;
};

struct AuBoxConfig {
  std::map<std::string, AuRegion> regions;

  void check() const {
    for (const auto& [au, region] : regions) {
      if (region.landmarks.empty()) throw ConfigError(au + ": empty landmark list");
      for (auto idx : region.landmarks) {
        if (idx >= kLandmarkCount) {
          throw ConfigError(au + ": landmark index " + std::to_string(idx) +
                            " outside 0..67");
        }
      }
      if (!(region.margin >= 0.0) || !(region.extend_down_frac >= 0.0)) {
        throw ConfigError(au + ": margin and extend_down_frac must be non-negative");
      }
    }
    for (auto au : kPainAus) {
      if (!regions.contains(std::string(au))) {
        throw ConfigError("box config lacks pain action unit " + std::string(au));
      }
    }
  }
};

namespace detail {
inline std::vector<std::size_t> index_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> out;
  for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}
inline std::vector<std::size_t> concat(std::vector<std::size_t> a,
                                       const std::vector<std::size_t>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
}  // namespace detail

/// FACS muscle regions mapped onto the 68-point scheme.
inline AuBoxConfig default_box_config() {
  using detail::concat;
  using detail::index_range;
  const auto brows = concat(index_range(17, 26), {27});
  const auto eyes = index_range(36, 47);
  const auto mouth = index_range(48, 67);
  AuBoxConfig cfg;
  cfg.regions["AU04"] = {brows, 4.0, 0.0};
  cfg.regions["AU06"] = {eyes, 4.0, 0.3};
  cfg.regions["AU07"] = {eyes, 4.0, 0.0};
  cfg.regions["AU09"] = {index_range(27, 35), 4.0, 0.0};
  cfg.regions["AU10"] = {concat(index_range(48, 54), index_range(60, 64)), 4.0, 0.0};
  cfg.regions["AU25"] = {mouth, 4.0, 0.0};
  cfg.regions["AU26"] = {concat(mouth, {kChinLandmark}), 4.0, 0.0};
  cfg.regions["AU27"] = {concat(mouth, {kChinLandmark}), 4.0, 0.0};
  return cfg;
}

inline AuBoxConfig parse_box_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("box config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("box config must be a JSON object");
  AuBoxConfig cfg;
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.key().starts_with("_")) continue;  // comments
      const auto& entry = it.value();
      AuRegion region;
      for (const auto& idx : entry.at("landmarks")) {
        if (!idx.is_number_integer() || idx.get<long>() < 0) {
          throw ConfigError(it.key() + ": landmark indices must be non-negative integers");
        }
        region.landmarks.push_back(idx.get<std::size_t>());
      }
      region.margin = entry.value("margin", 4.0);
      region.extend_down_frac = entry.value("extend_down_frac", 0.0);
      cfg.regions[canonical_au(it.key())] = std::move(region);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("box config: ") + e.what());
  }
  cfg.check();
  return cfg;
}

inline AuBoxConfig load_box_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open box config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_box_config(buf.str());
}

inline std::string box_config_to_json(const AuBoxConfig& cfg) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [au, region] : cfg.regions) {
    doc[au] = {{"landmarks", region.landmarks},
               {"margin", region.margin},
               {"extend_down_frac", region.extend_down_frac}};
  }
  return doc.dump(2);
}

/// Inclusive pixel rectangle.
struct BoundingBox {
  long x_min = 0;
  long y_min = 0;
  long x_max = 0;
  long y_max = 0;

  long width() const { return x_max - x_min + 1; }
  long height() const { return y_max - y_min + 1; }
  long area() const { return width() * height(); }
  bool contains(long x, long y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Box around the AU's landmarks before clipping: floor/ceil of the
/// landmark extent grown by the margin.
inline BoundingBox raw_au_box(const LandmarkSet& landmarks, const AuRegion& region) {
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  for (auto idx : region.landmarks) {
    const Point& p = landmarks.points.at(idx);
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  if (region.extend_down_frac > 0.0) {
    const double chin = landmarks.points[kChinLandmark].y;
    max_y += region.extend_down_frac * std::max(0.0, chin - max_y);
  }
  return {static_cast<long>(std::floor(min_x - region.margin)),
          static_cast<long>(std::floor(min_y - region.margin)),
          static_cast<long>(std::ceil(max_x + region.margin)),
          static_cast<long>(std::ceil(max_y + region.margin))};
}

inline BoundingBox au_bounding_box(const LandmarkSet& landmarks, const std::string& au,
                                   const AuBoxConfig& config, ImageDims dims) {
  const std::string id = canonical_au(au);
  const auto it = config.regions.find(id);
  if (it == config.regions.end()) throw UnknownAuError(id);
  const BoundingBox raw = raw_au_box(landmarks, it->second);
  const long w = static_cast<long>(dims.width);
  const long h = static_cast<long>(dims.height);
  BoundingBox box{std::max(raw.x_min, 0L), std::max(raw.y_min, 0L), std::min(raw.x_max, w - 1),
                  std::min(raw.y_max, h - 1)};
  if (box.x_min > box.x_max || box.y_min > box.y_max) {
    std::ostringstream os;
    os << id << ": bounding box (" << raw.x_min << "," << raw.y_min << "," << raw.x_max << ","
       << raw.y_max << ") has no area inside the " << dims.height << "x" << dims.width
       << " image; landmarks";
    for (auto idx : it->second.landmarks) {
      os << ' ' << idx << "=(" << landmarks.points[idx].x << "," << landmarks.points[idx].y
         << ")";
    }
    throw GeometryError(os.str());
  }
  return box;
}

/// 1 inside the inclusive box, 0 elsewhere.
inline Tensor box_mask(const BoundingBox& box, ImageDims dims) {
  Tensor mask({dims.height, dims.width});
  for (long y = std::max(box.y_min, 0L); y <= std::min<long>(box.y_max, dims.height - 1); ++y) {
    for (long x = std::max(box.x_min, 0L); x <= std::min<long>(box.x_max, dims.width - 1); ++x) {
      mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1.0f;
    }
  }
  return mask;
}

inline double box_area_fraction(const BoundingBox& box, ImageDims dims) {
  return static_cast<double>(box.area()) / static_cast<double>(dims.height * dims.width);
}

}  // namespace auverify
