#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "auverify/auverify.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/random_models.hpp"

using namespace auverify;
namespace t = auverify::support;

namespace {

Tensor grid(std::size_t h, std::size_t w, std::vector<float> v) { return Tensor({h, w}, std::move(v)); }

MuRecord record(std::string image, std::string au, std::optional<double> mu_value,
                double fraction = 0.5, std::string dataset = "ds") {
  MuResult r;
  r.mu = mu_value;
  return make_record(std::move(image), std::move(dataset), std::move(au), MuVariant::standard(),
                     r, fraction);
}

Prediction pred(std::string id, std::set<std::string> predicted, std::set<std::string> truth,
                std::string dataset = "ds") {
  return {std::move(id), std::move(dataset), std::move(predicted), std::move(truth)};
}

}  // namespace

TEST(Mu, HandExamples) {
  const Tensor mask = grid(2, 2, {1, 1, 0, 0});
  EXPECT_EQ(mu(grid(2, 2, {2, 5, 0, -1}), mask).mu, 1.0);
  EXPECT_EQ(mu(grid(2, 2, {0, -3, 4, 1}), mask).mu, 0.0);
  const MuResult quarter = mu(grid(2, 2, {3, 0, 4, 5}), mask);
  EXPECT_DOUBLE_EQ(quarter.inside, 3.0);
  EXPECT_DOUBLE_EQ(quarter.total, 12.0);
  EXPECT_DOUBLE_EQ(*quarter.mu, 0.25);
}

TEST(Mu, NegativesInsideAreIgnored) {
  const Tensor mask = grid(2, 2, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(*mu(grid(2, 2, {3, -50, 4, 5}), mask).mu, 0.25);
}

TEST(Mu, UndefinedWithoutPositiveRelevance) {
  const Tensor mask = grid(2, 2, {1, 0, 0, 0});
  EXPECT_FALSE(mu(grid(2, 2, {0, 0, 0, 0}), mask).mu.has_value());
  EXPECT_FALSE(mu(grid(2, 2, {-1, -2, 0, -3}), mask).mu.has_value());
  EXPECT_THROW(mu(grid(2, 2, {1, 1, 1, 1}), Tensor({2, 3})), DimensionError);
}

TEST(Mu, MatchesPixelLoopOracleAndProperties) {
  t::ModelGenerator gen(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = std::size_t(gen.uniform_int(1, 112)), w = std::size_t(gen.uniform_int(1, 112));
    const Tensor values = gen.normal({h, w}, 1);
    long x0 = gen.uniform_int(0, long(w) - 1), x1 = gen.uniform_int(0, long(w) - 1);
    long y0 = gen.uniform_int(0, long(h) - 1), y1 = gen.uniform_int(0, long(h) - 1);
    const BoundingBox box{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    const ImageDims dims{h, w};
    const MuResult got = mu(values, box_mask(box, dims));
    const MuResult want = t::naive_mu(values, box);
    ASSERT_EQ(got.mu.has_value(), want.mu.has_value());
    if (!got.mu) continue;
    EXPECT_NEAR(*got.mu, *want.mu, 1e-6);
    EXPECT_GE(*got.mu, 0.0);
    EXPECT_LE(*got.mu, 1.0);

    Tensor scaled = values;
    const double c = gen.uniform(0.01, 100);
    for (auto& v : scaled.values()) v = float(v * c);
    EXPECT_NEAR(*mu(scaled, box_mask(box, dims)).mu, *got.mu, 1e-5);

    const BoundingBox bigger{std::max(0L, box.x_min - 2), box.y_min, box.x_max,
                             std::min(long(h) - 1, box.y_max + 3)};
    EXPECT_GE(*mu(values, box_mask(bigger, dims)).mu, *got.mu - 1e-12);
    EXPECT_DOUBLE_EQ(*mu(values, box_mask({0, 0, long(w) - 1, long(h) - 1}, dims)).mu, 1.0);
  }
}

TEST(MuWeighted, Examples) {
  EXPECT_DOUBLE_EQ(mu_weighted(0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(mu_weighted(1.0, 1.0), 1.0);
  EXPECT_NEAR(mu_weighted(0.504, 0.52), 0.969, 1e-3);
  EXPECT_NEAR(mu_weighted(0.504, 0.504 / 0.969), 0.969, 1e-12);
  EXPECT_THROW(mu_weighted(0.5, 0.0), ConfigError);
  EXPECT_THROW(mu_weighted(0.5, 1.5), ConfigError);
}

TEST(TopK, Examples) {
  EXPECT_EQ(top_k_filter(Tensor::vector({4, 3, 2, 1}), 0.5), Tensor::vector({4, 3, 0, 0}));
  EXPECT_EQ(top_k_filter(Tensor::vector({-1, 2, 0, 5}), 1.0), Tensor::vector({0, 2, 0, 5}));
  const Tensor uniform({10, 10}, 0.3f);
  const Tensor kept = top_k_filter(uniform, 0.25);
  EXPECT_EQ(std::count(kept.values().begin(), kept.values().end(), 0.3f), 25);
  const Tensor odd({1, 7}, 1.0f);
  const Tensor kept_odd = top_k_filter(odd, 0.25);
  EXPECT_EQ(kept_odd, grid(1, 7, {1, 1, 0, 0, 0, 0, 0}));
  EXPECT_THROW(top_k_filter(uniform, 0.0), ConfigError);
}

TEST(TopK, FilterIsIdempotentAndSelectsLargest) {
  t::ModelGenerator gen(42);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor v = gen.normal({12, 9}, 1);
    const double frac = gen.uniform(0.05, 1.0);
    const Tensor a = top_k_filter(v, frac);
    std::size_t positive = 0, kept = 0;
    float smallest_kept = INFINITY, largest_dropped = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] <= 0) continue;
      ++positive;
      if (a[i] != 0) {
        ++kept;
        smallest_kept = std::min(smallest_kept, a[i]);
      } else {
        largest_dropped = std::max(largest_dropped, v[i]);
      }
    }
    EXPECT_EQ(kept, std::size_t(std::ceil(frac * double(positive) - 1e-9)));
    if (kept && kept < positive) {
      EXPECT_GE(smallest_kept, largest_dropped);
    }
  }
}

TEST(MuVariant, Names) {
  EXPECT_EQ(MuVariant::parse("standard"), MuVariant::standard());
  EXPECT_EQ(MuVariant::parse("top25").fraction, 0.25);
  EXPECT_EQ(MuVariant::topk(0.25).name(), "top25");
  EXPECT_THROW(MuVariant::parse("best"), ConfigError);
  EXPECT_THROW(MuVariant::parse("top0"), ConfigError);
}

TEST(FilterCorrect, KeepsTruePositivesOnly) {
  EXPECT_EQ(filter_correct({pred("a", {"AU04"}, {"AU04"})}),
            (std::vector<TruePositive>{{"a", "AU04"}}));
  EXPECT_TRUE(filter_correct({pred("a", {"AU04"}, {})}).empty());
  EXPECT_TRUE(filter_correct({pred("a", {}, {"AU04"})}).empty());
  EXPECT_EQ(filter_correct({pred("a", {"AU04", "AU25"}, {"AU25", "AU06"})}),
            (std::vector<TruePositive>{{"a", "AU25"}}));
}

TEST(Aggregate, Means) {
  auto one = aggregate({record("a", "AU04", 0.7)}, "ds");
  ASSERT_EQ(one.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(one.rows[0].mean_mu, 0.7);
  EXPECT_DOUBLE_EQ(one.rows[0].mean_mu_w, 1.4);
  EXPECT_EQ(one.rows[0].n, 1u);

  auto two = aggregate({record("a", "AU04", 0.2), record("b", "AU04", 0.4)}, "ds");
  ASSERT_EQ(two.rows.size(), 1u);
  EXPECT_NEAR(two.rows[0].mean_mu, 0.3, 1e-15);
  EXPECT_EQ(two.rows[0].n, 2u);
}

TEST(Aggregate, UndefinedCountedNotAveraged) {
  auto res = aggregate({record("a", "AU04", 0.6), record("b", "AU04", std::nullopt),
                        record("c", "AU27", std::nullopt)});
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(res.rows[0].mean_mu, 0.6);
  EXPECT_EQ(res.rows[0].n, 1u);
  EXPECT_EQ(res.rows[0].n_undefined, 1u);
  ASSERT_EQ(res.notices.size(), 1u);
  EXPECT_NE(res.notices[0].find("AU27"), std::string::npos);
}

TEST(Aggregate, PermutationInvariant) {
  t::ModelGenerator gen(43);
  std::vector<MuRecord> records;
  for (int i = 0; i < 500; ++i) {
    records.push_back(record("img" + std::to_string(i), i % 3 ? "AU04" : "AU25",
                             gen.uniform(0, 1), gen.uniform(0.05, 1)));
  }
  const auto base = aggregate(records, "ds").rows;
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(aggregate(records, "ds").rows, base);
  }
}

TEST(F1, Examples) {
  std::vector<Prediction> p = {pred("1", {"AU04"}, {"AU04"}), pred("2", {"AU04"}, {"AU04"}),
                               pred("3", {"AU04"}, {}), pred("4", {}, {"AU04"}),
                               pred("5", {}, {})};
  EXPECT_NEAR(f1_score(p, "AU04"), 0.667, 1e-3);
  EXPECT_DOUBLE_EQ(f1_score(p, "AU04"), 2.0 / 3.0);
  EXPECT_EQ(confusion(p, "AU4").tn, 1u);
  EXPECT_DOUBLE_EQ(f1_score({pred("1", {"AU06"}, {"AU06"}), pred("2", {}, {})}, "AU06"), 1.0);
  EXPECT_DOUBLE_EQ(f1_score({pred("1", {}, {"AU06"})}, "AU06"), 0.0);
  EXPECT_DOUBLE_EQ(f1_score({pred("1", {}, {})}, "AU06"), 0.0);
}

TEST(F1, TablePerDataset) {
  const auto rows = f1_table({pred("1", {"AU04"}, {"AU04"}, "B"), pred("2", {}, {"AU04"}, "A")},
                             {"AU04", "AU25"});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].dataset, "A");
  EXPECT_DOUBLE_EQ(rows[0].f1, 0.0);
  EXPECT_EQ(rows[2].dataset, "B");
  EXPECT_DOUBLE_EQ(rows[2].f1, 1.0);
  EXPECT_EQ(rows[3].counts.tn, 1u);
}

TEST(Report, CsvRoundTripAndJsonMirror) {
  Report report;
  report.rows = {{"Actor Study", "AU04", "standard", 0.5, 0.961538, 11249, 3},
                 {"CK+", "AU25", "top25", 0.35, 1.25, 5358, 0}};
  report.f1 = f1_table({pred("1", {"AU04"}, {"AU04"}, "CK+")}, {"AU04"});
  const std::string csv = report_csv(report.rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kReportCsvHeader);
  EXPECT_EQ(parse_report_csv(csv), report.rows);
  const auto json = report_json(report);
  ASSERT_EQ(json["rows"].size(), 2u);
  EXPECT_EQ(json["rows"][0]["dataset"], "Actor Study");
  EXPECT_DOUBLE_EQ(json["rows"][0]["mean_mu_w"].get<double>(), 0.961538);
  EXPECT_EQ(json["rows"][1]["n"], 5358);
  EXPECT_EQ(json["f1"][0]["f1"], 1.0);
  EXPECT_EQ(report_csv({}), std::string(kReportCsvHeader) + "\n");
  EXPECT_THROW(parse_report_csv("a,b\n"), ParseError);
}

TEST(Report, TableReplayReadsBack) {
  // Actor Study column of the published averages, fed through aggregation.
  const std::vector<std::pair<std::string, std::pair<double, std::size_t>>> actor = {
      {"AU04", {0.50, 11249}}, {"AU06", {0.42, 6887}}, {"AU25", {0.47, 13497}}};
  std::vector<MuRecord> records;
  for (const auto& [au, row] : actor) {
    for (std::size_t i = 0; i < row.second; ++i) {
      records.push_back(record(std::to_string(i), au, row.first, 0.5, "Actor Study"));
    }
  }
  Report report;
  report.rows = aggregate(records, "Actor Study").rows;
  const auto dir = t::scratch_dir("replay");
  emit_report(report, dir);
  const auto rows = read_report_csv(dir / "report.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].au, "AU04");
  EXPECT_EQ(rows[0].mean_mu, 0.50);
  EXPECT_EQ(rows[0].n, 11249u);
  EXPECT_EQ(rows[2].au, "AU25");
  EXPECT_EQ(rows[2].mean_mu, 0.47);
  EXPECT_EQ(rows[2].n, 13497u);
  std::filesystem::remove_all(dir);
}
