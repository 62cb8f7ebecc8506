#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "auverify/auverify.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace auverify;
using nlohmann::json;
namespace fs = std::filesystem;
namespace t = auverify::support;

namespace {

constexpr ImageDims kToyDims{32, 32};

std::vector<json> fixture_lines() {
  std::vector<json> out;
  std::ifstream in(t::fixture("manifest10.jsonl"));
  for (std::string line; std::getline(in, line);) {
    json doc = json::parse(line);
    doc["path"] = (t::fixture("") / doc["path"].get<std::string>()).string();
    out.push_back(std::move(doc));
  }
  return out;
}

fs::path write_manifest(const fs::path& dir, const std::vector<std::string>& lines) {
  const fs::path path = dir / "manifest.jsonl";
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
  return path;
}

std::vector<std::string> dumped(const std::vector<json>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.dump());
  return out;
}

RunConfig toy_config(const fs::path& manifest, const fs::path& out_dir) {
  RunConfig config;
  config.model_path = t::fixture("toy_model.json");
  config.manifest_path = manifest;
  config.out_dir = out_dir;
  config.variants = {MuVariant::standard(), MuVariant::topk(0.25)};
  config.records = true;
  return config;
}

std::map<std::string, std::string> output_files(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name != "run_summary.json") files[name] = t::slurp(e.path());
  }
  return files;
}

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = t::scratch_dir("pipeline"); }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(Pipeline, IngestsManifest) {
  auto lines = fixture_lines();
  lines.resize(3);
  const auto res = ingest_manifest(write_manifest(dir_, dumped(lines)), kToyDims);
  ASSERT_EQ(res.entries.size(), 3u);
  EXPECT_EQ(res.lines, 3u);
  EXPECT_EQ(res.skipped, 0u);
  EXPECT_EQ(res.entries[0].image_id, "face_00");
  EXPECT_EQ(res.entries[0].ground_truth_aus, (std::set<std::string>{"AU04", "AU25"}));
  EXPECT_EQ(res.entries[2].dataset, "synthetic-a");
  EXPECT_EQ(res.entries[1].line, 2u);
}

TEST_F(Pipeline, MalformedLinesAreSkipped) {
  auto lines = fixture_lines();
  lines.resize(3);
  lines[1]["landmarks"].erase(67);
  auto text = dumped(lines);
  text.push_back("{\"image_id\": ");
  text.push_back("");
  const auto res = ingest_manifest(write_manifest(dir_, text), kToyDims);
  EXPECT_EQ(res.entries.size(), 2u);
  EXPECT_EQ(res.lines, 4u);
  EXPECT_EQ(res.skipped, 2u);
  ASSERT_EQ(res.messages.size(), 2u);
  EXPECT_NE(res.messages[0].find("line 2"), std::string::npos);
  EXPECT_NE(res.messages[0].find("67"), std::string::npos);
  EXPECT_THROW(ingest_manifest(dir_ / "missing.jsonl", kToyDims), IoError);
}

TEST_F(Pipeline, PixelScaling) {
  Image8 img(2, 1, 1);
  img.pixels = {255, 0};
  write_png(dir_ / "px.png", img);
  ManifestEntry entry;
  entry.path = dir_ / "px.png";
  const Tensor x = load_entry_image(entry, {1, 1, 2});
  EXPECT_EQ(x, Tensor({1, 1, 2}, {1.0f, 0.0f}));
  EXPECT_EQ(load_entry_image(entry, {3, 1, 2}).at(2, 0, 0), 1.0f);
  EXPECT_THROW(load_entry_image(entry, {1, 2, 2}), DimensionError);
  entry.path = dir_ / "nope.png";
  EXPECT_THROW(load_entry_image(entry, {1, 1, 2}), IoError);
}

TEST_F(Pipeline, MatchesStepByStepComposition) {
  auto lines = fixture_lines();
  lines = {lines[0], lines[4]};
  RunConfig config = toy_config(write_manifest(dir_, dumped(lines)), dir_ / "out");
  const RunResult run = run_verification(config);

  const ModelSpec model = load_model(config.model_path);
  const auto entries = ingest_manifest(config.manifest_path, kToyDims).entries;
  std::vector<MuRecord> want;
  for (const auto& entry : entries) {
    const Tensor x = image_to_tensor(read_png(entry.path), 1);
    const auto trace = forward(model, x);
    const auto predicted = classify(trace, 0.5);
    for (const auto& au : model.output_labels) {
      if (!predicted.contains(au) || !entry.ground_truth_aus.contains(au)) continue;
      const RelevanceMap map = explain(model, trace, au, RulePreset::composite());
      const BoundingBox box = au_bounding_box(entry.landmarks, au, default_box_config(), kToyDims);
      MuResult standard = t::naive_mu(map.pixel_values, box);
      MuResult top = t::naive_mu(top_k_filter(map.pixel_values, 0.25), box);
      const double fraction = double(box.area()) / (32.0 * 32.0);
      want.push_back(make_record(entry.image_id, entry.dataset, au, MuVariant::standard(),
                                 standard, fraction));
      want.push_back(make_record(entry.image_id, entry.dataset, au, MuVariant::topk(0.25), top,
                                 fraction));
    }
  }
  ASSERT_FALSE(want.empty());
  ASSERT_EQ(run.report.records.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& got = run.report.records[i];
    EXPECT_EQ(got.image_id, want[i].image_id);
    EXPECT_EQ(got.au, want[i].au);
    EXPECT_EQ(got.variant, want[i].variant);
    ASSERT_EQ(got.mu.has_value(), want[i].mu.has_value());
    if (got.mu) {
      EXPECT_NEAR(*got.mu, *want[i].mu, 1e-9);
      EXPECT_NEAR(*got.mu_w, *want[i].mu_w, 1e-9);
    }
    EXPECT_DOUBLE_EQ(got.box_area_fraction, want[i].box_area_fraction);
  }
}

TEST_F(Pipeline, NoTruePositivesKeepsF1Rows) {
  auto lines = fixture_lines();
  for (auto& l : lines) l["aus"] = json::array();
  RunConfig config = toy_config(write_manifest(dir_, dumped(lines)), dir_ / "out");
  const RunResult run = run_verification(config);
  EXPECT_TRUE(run.report.records.empty());
  EXPECT_TRUE(run.report.rows.empty());
  EXPECT_EQ(run.report.f1.size(), 2u * 2u);  // two datasets, two labels
  emit_run(run, config);
  EXPECT_EQ(t::slurp(config.out_dir / "report.csv"), std::string(kReportCsvHeader) + "\n");
}

TEST_F(Pipeline, DeterministicAcrossThreadCounts) {
  const fs::path manifest = write_manifest(dir_, dumped(fixture_lines()));
  std::map<std::string, std::string> reference;
  for (std::size_t jobs : {1, 8, 3, 1}) {
    RunConfig config = toy_config(manifest, dir_ / ("jobs" + std::to_string(jobs) + "_" +
                                                    std::to_string(reference.size())));
    config.jobs = jobs;
    config.batch_size = 4;
    emit_run(run_verification(config), config);
    const auto files = output_files(config.out_dir);
    if (reference.empty()) {
      reference = files;
      EXPECT_TRUE(reference.contains("records_top25.csv"));
    } else {
      EXPECT_EQ(files, reference) << "jobs=" << jobs;
    }
  }
}

TEST_F(Pipeline, EveryLineIsAccountedFor) {
  auto lines = fixture_lines();
  lines.resize(6);
  lines[1]["landmarks"].erase(0);              // parse skip
  lines[2]["path"] = (dir_ / "missing.png").string();  // decode failure
  Image8 small(16, 16, 1, 100);
  write_png(dir_ / "small.png", small);
  lines[3]["path"] = (dir_ / "small.png").string();  // size skip
  auto text = dumped(lines);
  text.push_back("not json at all");
  RunConfig config = toy_config(write_manifest(dir_, text), dir_ / "out");
  config.jobs = 4;
  std::ostringstream log;
  const RunResult run = run_verification(config, &log);
  const auto& c = run.report.counts;
  EXPECT_EQ(c.lines, 7u);
  EXPECT_EQ(c.processed, 3u);
  EXPECT_EQ(c.skipped, 3u);
  EXPECT_EQ(c.failed, 1u);
  EXPECT_EQ(c.processed + c.skipped + c.failed, c.lines);
  EXPECT_NE(log.str().find("16x16"), std::string::npos);
}

TEST_F(Pipeline, JsonMirrorsCsv) {
  RunConfig config = toy_config(write_manifest(dir_, dumped(fixture_lines())), dir_ / "out");
  const RunResult run = run_verification(config);
  emit_run(run, config);
  const auto csv_rows = read_report_csv(config.out_dir / "report.csv");
  const json doc = json::parse(t::slurp(config.out_dir / "report.json"));
  ASSERT_FALSE(csv_rows.empty());
  ASSERT_EQ(doc["rows"].size(), csv_rows.size());
  for (std::size_t i = 0; i < csv_rows.size(); ++i) {
    const auto& j = doc["rows"][i];
    EXPECT_EQ(j["dataset"], csv_rows[i].dataset);
    EXPECT_EQ(j["au"], csv_rows[i].au);
    EXPECT_EQ(j["variant"], csv_rows[i].variant);
    EXPECT_EQ(j["mean_mu"].get<double>(), csv_rows[i].mean_mu);
    EXPECT_EQ(j["mean_mu_w"].get<double>(), csv_rows[i].mean_mu_w);
    EXPECT_EQ(j["n"].get<std::size_t>(), csv_rows[i].n);
    EXPECT_EQ(j["n_undefined"].get<std::size_t>(), csv_rows[i].n_undefined);
  }
}

TEST_F(Pipeline, RunSummaryAndHeatmaps) {
  auto lines = fixture_lines();
  lines.resize(2);
  RunConfig config = toy_config(write_manifest(dir_, dumped(lines)), dir_ / "out");
  config.heatmaps = true;
  const RunResult run = run_verification(config);
  emit_run(run, config);
  const json summary = json::parse(t::slurp(config.out_dir / "run_summary.json"));
  EXPECT_EQ(summary["config"]["preset"], "composite");
  EXPECT_EQ(summary["config"]["relevance_source"], "logit");
  EXPECT_EQ(summary["counts"]["processed"], 2);
  EXPECT_EQ(summary["counts"]["records"], run.report.records.size());
  EXPECT_GE(summary["wall_seconds"].get<double>(), 0.0);
  std::set<std::string> expected;
  for (const auto& r : run.report.records) {
    expected.insert(heatmap_filename(r.image_id, r.au, "composite"));
  }
  std::set<std::string> found;
  for (const auto& e : fs::directory_iterator(config.out_dir / "heatmaps")) {
    found.insert(e.path().filename().string());
    const Image8 img = read_png(e.path());
    EXPECT_EQ(img.width, 32u);
    EXPECT_EQ(img.channels, 3u);
  }
  EXPECT_EQ(found, expected);
}

TEST_F(Pipeline, ConfigErrors) {
  RunConfig config = toy_config(write_manifest(dir_, dumped(fixture_lines())), dir_ / "out");
  config.threshold = 1.0;
  EXPECT_THROW(run_verification(config), ConfigError);
  config.threshold = 0.5;
  config.model_path = dir_ / "missing.json";
  EXPECT_THROW(run_verification(config), IoError);
  config = toy_config(write_manifest(dir_, {"{}", "[]"}), dir_ / "out");
  EXPECT_THROW(run_verification(config), ConfigError);
}
