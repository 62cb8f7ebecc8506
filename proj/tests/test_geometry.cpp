#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "auverify/auverify.hpp"
#include "support/faces.hpp"
#include "support/fixtures.hpp"
#include "support/random_models.hpp"

using namespace auverify;
namespace t = auverify::support;

namespace {

constexpr ImageDims kDims{112, 112};

LandmarkSet two_point_face(Point a, Point b, ImageDims dims = kDims) {
  std::vector<Point> pts(kLandmarkCount, Point{50, 50});
  pts[0] = a;
  pts[1] = b;
  return validate_landmarks(pts, dims);
}

AuBoxConfig single_region(double margin) {
  AuBoxConfig cfg = default_box_config();
  cfg.regions["AU04"] = {{0, 1}, margin, 0.0};
  return cfg;
}

// Coordinates on a 1/8 grid offset by 1/16 are exact in binary and never
// integral, so floor/ceil see the same fractional part after a shift.
std::vector<Point> snapped_face(std::size_t size, double dx, double dy) {
  auto pts = t::centered_face(size);
  for (auto& p : pts) {
    p.x = std::floor(p.x * 8) / 8 + 1.0 / 16 + dx;
    p.y = std::floor(p.y * 8) / 8 + 1.0 / 16 + dy;
  }
  return pts;
}

}  // namespace

TEST(Landmarks, Validation) {
  EXPECT_NO_THROW(validate_landmarks(t::centered_face(112), kDims));
  EXPECT_TRUE(validate_landmarks(t::centered_face(112), kDims).out_of_bounds.empty());
  auto pts = t::centered_face(112);
  pts.pop_back();
  EXPECT_THROW(validate_landmarks(pts, kDims), GeometryError);
  pts = t::centered_face(112);
  pts[42].y = std::numeric_limits<double>::quiet_NaN();
  try {
    validate_landmarks(pts, kDims);
    FAIL();
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
  pts = t::centered_face(112);
  pts[3] = {-4, 200};
  EXPECT_EQ(validate_landmarks(pts, kDims).out_of_bounds, std::vector<std::size_t>{3});
}

TEST(Boxes, HandExamples) {
  const LandmarkSet face = two_point_face({10, 10}, {20, 30});
  EXPECT_EQ(au_bounding_box(face, "AU04", single_region(0), kDims), (BoundingBox{10, 10, 20, 30}));
  EXPECT_EQ(au_bounding_box(face, "AU4", single_region(5), kDims), (BoundingBox{5, 5, 25, 35}));
}

TEST(Boxes, FractionalCoordinatesRoundOutward) {
  const LandmarkSet face = two_point_face({10.4, 10.6}, {19.2, 29.9});
  EXPECT_EQ(au_bounding_box(face, "AU04", single_region(0), kDims), (BoundingBox{10, 10, 20, 30}));
}

TEST(Boxes, CornerClipping) {
  const LandmarkSet face = two_point_face({1, 2}, {108, 110});
  EXPECT_EQ(au_bounding_box(face, "AU04", single_region(4), kDims), (BoundingBox{0, 0, 111, 111}));
}

TEST(Boxes, DegenerateBoxIsAnError) {
  const LandmarkSet face = two_point_face({130, 130}, {140, 150});
  try {
    au_bounding_box(face, "AU04", single_region(2), kDims);
    FAIL();
  } catch (const GeometryError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("AU04"), std::string::npos);
    EXPECT_NE(what.find("0=(130,130)"), std::string::npos);
  }
  EXPECT_THROW(au_bounding_box(face, "AU12", default_box_config(), kDims), UnknownAuError);
}

TEST(Boxes, ExtensionTowardChin) {
  std::vector<Point> pts(kLandmarkCount, Point{50, 50});
  pts[kChinLandmark] = {50, 100};
  pts[0] = {40, 40};
  pts[1] = {60, 60};
  const LandmarkSet face = validate_landmarks(pts, kDims);
  AuBoxConfig cfg = default_box_config();
  cfg.regions["AU06"] = {{0, 1}, 0.0, 0.5};
  EXPECT_EQ(au_bounding_box(face, "AU06", cfg, kDims), (BoundingBox{40, 40, 60, 80}));
}

TEST(Masks, HandExamples) {
  const Tensor full = box_mask({0, 0, 111, 111}, kDims);
  EXPECT_EQ(full.sum(), 112.0 * 112.0);
  const Tensor one = box_mask({7, 3, 7, 3}, kDims);
  EXPECT_EQ(one.sum(), 1.0);
  EXPECT_EQ(one.at(3, 7), 1.0f);
  const Tensor corner = box_mask({0, 0, 1, 1}, {4, 4});
  EXPECT_EQ(corner, Tensor({4, 4}, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(box_area_fraction({0, 0, 1, 1}, {4, 4}), 0.25);
}

TEST(BoxProperties, RandomFaces) {
  t::ModelGenerator gen(31);
  const AuBoxConfig cfg = default_box_config();
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t size = std::size_t(gen.uniform_int(64, 160));
    const ImageDims dims{size, size};
    const double dx = gen.uniform_int(-8, 8), dy = gen.uniform_int(-8, 8);
    const LandmarkSet face = validate_landmarks(snapped_face(size, 0, 0), dims);
    const LandmarkSet moved = validate_landmarks(snapped_face(size, dx, dy), dims);
    for (const auto& [au, region] : cfg.regions) {
      const BoundingBox raw = raw_au_box(face, region);
      const BoundingBox box = au_bounding_box(face, au, cfg, dims);
      EXPECT_EQ(box_mask(box, dims).sum(), double(box.area()));

      // integer shifts move an unclipped box by exactly the shift
      const BoundingBox shifted = raw_au_box(moved, region);
      EXPECT_EQ(shifted.x_min - raw.x_min, long(dx)) << au;
      EXPECT_EQ(shifted.y_min - raw.y_min, long(dy)) << au;
      EXPECT_EQ(shifted.x_max - raw.x_max, long(dx)) << au;
      if (region.extend_down_frac == 0.0) {
        EXPECT_EQ(shifted.y_max - raw.y_max, long(dy)) << au;
      }

      AuRegion wider = region;
      wider.margin += gen.uniform(0, 6);
      const BoundingBox grown = raw_au_box(face, wider);
      EXPECT_LE(grown.x_min, raw.x_min);
      EXPECT_LE(grown.y_min, raw.y_min);
      EXPECT_GE(grown.x_max, raw.x_max);
      EXPECT_GE(grown.y_max, raw.y_max);
    }
  }
}

TEST(BoxConfig, DefaultsCoverPainAus) {
  const AuBoxConfig cfg = default_box_config();
  EXPECT_NO_THROW(cfg.check());
  for (auto au : kPainAus) EXPECT_TRUE(cfg.regions.contains(std::string(au))) << au;
  EXPECT_DOUBLE_EQ(cfg.regions.at("AU06").extend_down_frac, 0.3);
  EXPECT_EQ(cfg.regions.at("AU04").landmarks.size(), 11u);
  for (const auto& [au, region] : cfg.regions) EXPECT_DOUBLE_EQ(region.margin, 4.0) << au;
}

TEST(BoxConfig, ShippedFileMatchesDefaults) {
  const AuBoxConfig shipped = load_box_config(std::filesystem::path(AUVERIFY_DATA) /
                                              "au_boxes_default.json");
  EXPECT_EQ(box_config_to_json(shipped), box_config_to_json(default_box_config()));
  EXPECT_EQ(box_config_to_json(parse_box_config(box_config_to_json(shipped))),
            box_config_to_json(shipped));
}

TEST(BoxConfig, Errors) {
  nlohmann::json doc = nlohmann::json::parse(box_config_to_json(default_box_config()));
  doc["AU09"]["landmarks"].push_back(68);
  EXPECT_THROW(parse_box_config(doc.dump()), ConfigError);
  doc = nlohmann::json::parse(box_config_to_json(default_box_config()));
  doc.erase("AU27");
  EXPECT_THROW(parse_box_config(doc.dump()), ConfigError);
  doc = nlohmann::json::parse(box_config_to_json(default_box_config()));
  doc["AU04"]["margin"] = -1;
  EXPECT_THROW(parse_box_config(doc.dump()), ConfigError);
  EXPECT_THROW(parse_box_config("[1,2"), ParseError);
  EXPECT_THROW(load_box_config("/nonexistent/boxes.json"), IoError);
}
