#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "auverify/geometry.hpp"
#include "auverify/heatmap.hpp"
#include "auverify/image_io.hpp"
#include "auverify/lrp.hpp"
#include "auverify/metrics.hpp"
#include "auverify/model_io.hpp"
#include "auverify/report.hpp"

namespace auverify {

struct ManifestEntry {
  std::size_t line = 0;
  std::string image_id;
  std::filesystem::path path;
  LandmarkSet landmarks;
  std::set<std::string> ground_truth_aus;
  std::string dataset;
};

/// Parses one JSONL manifest line. Relative image paths resolve against
/// `base_dir`.
inline ManifestEntry parse_manifest_line(const std::string& line, std::size_t line_no,
                                         const std::filesystem::path& base_dir, ImageDims dims) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
  }
  ManifestEntry entry;
  entry.line = line_no;
  try {
    if (!doc.is_object()) throw ParseError("entry must be a JSON object");
    entry.image_id = doc.at("image_id").get<std::string>();
    entry.path = doc.at("path").get<std::string>();
    if (entry.path.is_relative()) entry.path = base_dir / entry.path;
    entry.dataset = doc.value("dataset", std::string{});
    for (const auto& au : doc.at("aus")) entry.ground_truth_aus.insert(canonical_au(au.get<std::string>()));
    std::vector<Point> points;
    for (const auto& p : doc.at("landmarks")) {
      if (!p.is_array() || p.size() != 2) throw ParseError("landmarks must be [x,y] pairs");
      const auto coord = [](const nlohmann::json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      };
      points.push_back({coord(p[0]), coord(p[1])});
    }
    entry.landmarks = validate_landmarks(points, dims);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return entry;
}

/// Streams manifest entries; malformed lines are skipped and counted.
class ManifestReader {
 public:
  ManifestReader(const std::filesystem::path& path, ImageDims dims)
      : in_(path), base_dir_(path.parent_path()), dims_(dims) {
    if (!in_) throw IoError("cannot open manifest " + path.string());
  }

  /// Next well-formed entry, or nullopt at end of file.
  std::optional<ManifestEntry> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      ++lines_;
      try {
        return parse_manifest_line(line, line_no_, base_dir_, dims_);
      } catch (const Error& e) {
        ++skipped_;
        messages_.push_back(std::string("skipped ") + e.what());
      }
    }
    return std::nullopt;
  }

  std::size_t lines() const noexcept { return lines_; }
  std::size_t skipped() const noexcept { return skipped_; }
  std::vector<std::string> take_messages() { return std::exchange(messages_, {}); }

 private:
  std::ifstream in_;
  std::filesystem::path base_dir_;
  ImageDims dims_;
  std::size_t line_no_ = 0;
  std::size_t lines_ = 0;
  std::size_t skipped_ = 0;
  std::vector<std::string> messages_;
};

struct IngestResult {
  std::vector<ManifestEntry> entries;
  std::size_t lines = 0;
  std::size_t skipped = 0;
  std::vector<std::string> messages;
};

inline IngestResult ingest_manifest(const std::filesystem::path& path, ImageDims dims) {
  ManifestReader reader(path, dims);
  IngestResult out;
  while (auto e = reader.next()) out.entries.push_back(std::move(*e));
  out.lines = reader.lines();
  out.skipped = reader.skipped();
  out.messages = reader.take_messages();
  return out;
}

/// Loads an entry's image as a model input tensor. Throws DimensionError on
/// size mismatch and IoError when the file cannot be decoded.
inline Tensor load_entry_image(const ManifestEntry& entry, const Shape& input_shape) {
  const Image8 img = read_png(entry.path);
  if (img.height != input_shape[1] || img.width != input_shape[2]) {
    throw DimensionError("image " + entry.path.string() + " is " + std::to_string(img.height) +
                         "x" + std::to_string(img.width) + ", model expects " +
                         std::to_string(input_shape[1]) + "x" + std::to_string(input_shape[2]));
  }
  return image_to_tensor(img, input_shape[0]);
}

struct RunConfig {
  std::filesystem::path model_path;
  std::filesystem::path manifest_path;
  std::filesystem::path boxes_path;  // empty: built-in defaults
  RulePreset preset = RulePreset::composite();
  std::vector<MuVariant> variants = {MuVariant::standard()};
  std::filesystem::path out_dir;
  bool heatmaps = false;
  double threshold = 0.5;
  std::size_t jobs = 1;
  bool all_positives = false;
  bool records = false;
  std::size_t batch_size = 256;

  void check() const {
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw ConfigError("threshold must lie in (0,1)");
    }
    if (variants.empty()) throw ConfigError("at least one mu variant is required");
    if (jobs == 0 || batch_size == 0) throw ConfigError("jobs and batch size must be positive");
    for (const auto* p : {&model_path, &manifest_path}) {
      if (!std::filesystem::exists(*p)) throw IoError("no such file: " + p->string());
    }
    if (!boxes_path.empty() && !std::filesystem::exists(boxes_path)) {
      throw IoError("no such file: " + boxes_path.string());
    }
  }
};

/// Heatmap of a relevance map over its source crop, with the AU box drawn.
inline Image8 render_explanation(const RelevanceMap& map, const Tensor& source,
                                 const BoundingBox* box = nullptr) {
  const Overlay overlay{source, 0.6};
  Image8 img = render(normalize_symmetric(map.pixel_values), Colormap::diverging_red_blue,
                      &overlay);
  if (box) img = draw_box(std::move(img), *box, Rgb{0, 200, 0});
  return img;
}

namespace detail {

struct EntryOutcome {
  enum class Status { processed, skipped, failed };
  Status status = Status::processed;
  Prediction prediction;
  std::vector<MuRecord> records;
  std::vector<std::string> messages;
  std::size_t au_failures = 0;
};

struct RunContext {
  const ModelSpec& model;
  const Explainer& explainer;
  const AuBoxConfig& boxes;
  const RunConfig& config;
};

inline EntryOutcome process_entry(const ManifestEntry& entry, const RunContext& ctx) {
  EntryOutcome out;
  const std::string where = "line " + std::to_string(entry.line) + " (" + entry.image_id + "): ";
  Tensor input;
  try {
    input = load_entry_image(entry, ctx.model.input_shape);
  } catch (const DimensionError& e) {
    out.status = EntryOutcome::Status::skipped;
    out.messages.push_back("skipped " + where + e.what());
    return out;
  } catch (const Error& e) {
    out.status = EntryOutcome::Status::failed;
    out.messages.push_back("failed " + where + e.what());
    return out;
  }

  try {
    const ActivationTrace trace = forward(ctx.model, input);
    for (const auto& w : trace.warnings) out.messages.push_back("warning " + where + w);
    out.prediction = {entry.image_id, entry.dataset, classify(trace, ctx.config.threshold),
                      entry.ground_truth_aus};

    std::vector<std::string> targets;
    for (const auto& au : ctx.model.output_labels) {
      const bool truth = entry.ground_truth_aus.contains(au);
      const bool predicted = out.prediction.predicted.contains(au);
      if (truth && (predicted || ctx.config.all_positives)) targets.push_back(au);
    }

    const ImageDims dims{ctx.model.input_shape[1], ctx.model.input_shape[2]};
    for (const auto& au : targets) {
      try {
        const BoundingBox box = au_bounding_box(entry.landmarks, au, ctx.boxes, dims);
        const Tensor mask = box_mask(box, dims);
        const double fraction = box_area_fraction(box, dims);
        const RelevanceMap map = ctx.explainer.explain(trace, au, ctx.config.preset);
        for (const auto& variant : ctx.config.variants) {
          const MuResult r = variant.kind == MuVariant::Kind::standard
                                 ? mu(map.pixel_values, mask)
                                 : mu(top_k_filter(map.pixel_values, variant.fraction), mask);
          out.records.push_back(
              make_record(entry.image_id, entry.dataset, au, variant, r, fraction));
        }
        if (ctx.config.heatmaps) {
          const auto dir = ctx.config.out_dir / "heatmaps";
          write_png(dir / heatmap_filename(entry.image_id, au, ctx.config.preset.name),
                    render_explanation(map, input, &box));
        }
      } catch (const Error& e) {
        ++out.au_failures;
        out.messages.push_back("failed " + where + au + ": " + e.what());
      }
    }
  } catch (const Error& e) {
    out = EntryOutcome{};
    out.status = EntryOutcome::Status::failed;
    out.messages.push_back("failed " + where + e.what());
  }
  return out;
}

}  // namespace detail

struct RunResult {
  Report report;
  std::size_t au_failures = 0;
  double wall_seconds = 0.0;
};

/// Forward, classify, explain every detected ground-truth AU, measure mu
/// against its landmark box, then aggregate. Output is independent of
/// `config.jobs`.
inline RunResult run_verification(const RunConfig& config, std::ostream* log = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  config.check();
  const ModelSpec model = load_model(config.model_path);
  const AuBoxConfig boxes =
      config.boxes_path.empty() ? default_box_config() : load_box_config(config.boxes_path);
  const Explainer explainer(model);
  const detail::RunContext ctx{model, explainer, boxes, config};
  if (config.heatmaps) std::filesystem::create_directories(config.out_dir / "heatmaps");

  ManifestReader reader(config.manifest_path, {model.input_shape[1], model.input_shape[2]});
  RunResult result;
  Report& report = result.report;
  std::vector<Prediction> predictions;
  auto emit = [&](const std::vector<std::string>& messages) {
    if (!log) return;
    for (const auto& m : messages) *log << m << '\n';
  };

  std::vector<ManifestEntry> batch;
  std::vector<detail::EntryOutcome> outcomes;
  bool done = false;
  while (!done) {
    batch.clear();
    while (batch.size() < config.batch_size) {
      auto entry = reader.next();
      if (!entry) {
        done = true;
        break;
      }
      batch.push_back(std::move(*entry));
    }
    emit(reader.take_messages());
    outcomes.assign(batch.size(), {});
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
      for (std::size_t i = cursor++; i < batch.size(); i = cursor++) {
        outcomes[i] = detail::process_entry(batch[i], ctx);
      }
    };
    const std::size_t threads = std::min(config.jobs, batch.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& o : outcomes) {
      emit(o.messages);
      result.au_failures += o.au_failures;
      switch (o.status) {
        case detail::EntryOutcome::Status::processed:
          ++report.counts.processed;
          predictions.push_back(std::move(o.prediction));
          for (auto& r : o.records) report.records.push_back(std::move(r));
          break;
        case detail::EntryOutcome::Status::skipped: ++report.counts.skipped; break;
        case detail::EntryOutcome::Status::failed: ++report.counts.failed; break;
      }
    }
  }
  report.counts.lines = reader.lines();
  report.counts.skipped += reader.skipped();
  if (report.counts.processed == 0) {
    throw ConfigError("manifest " + config.manifest_path.string() +
                      " has no usable entries after skips");
  }

  report.f1 = f1_table(predictions, model.output_labels);
  auto agg = aggregate(report.records);
  report.rows = std::move(agg.rows);
  report.notices = std::move(agg.notices);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

/// Report files plus run_summary.json (config echo, counts, wall time).
inline std::vector<std::filesystem::path> emit_run(const RunResult& result,
                                                   const RunConfig& config) {
  auto written = emit_report(result.report, config.out_dir,
                             ReportFormats{true, true, config.records});
  std::vector<std::string> variants;
  for (const auto& v : config.variants) variants.push_back(v.name());
  const auto& c = result.report.counts;
  nlohmann::json summary{
      {"config",
       {{"model", config.model_path.string()},
        {"manifest", config.manifest_path.string()},
        {"boxes", config.boxes_path.empty() ? "default" : config.boxes_path.string()},
        {"preset", config.preset.name},
        {"rules",
         {{"input_layer", config.preset.input_layer.describe()},
          {"conv", config.preset.conv.describe()},
          {"dense", config.preset.dense.describe()}}},
        {"relevance_source", "logit"},
        {"variants", variants},
        {"threshold", config.threshold},
        {"jobs", config.jobs},
        {"heatmaps", config.heatmaps},
        {"all_positives", config.all_positives}}},
      {"counts",
       {{"lines", c.lines},
        {"processed", c.processed},
        {"skipped", c.skipped},
        {"failed", c.failed},
        {"au_failures", result.au_failures},
        {"records", result.report.records.size()}}},
      {"notices", result.report.notices},
      {"wall_seconds", result.wall_seconds}};
  detail::write_file(config.out_dir / "run_summary.json", summary.dump(2) + "\n");
  written.push_back(config.out_dir / "run_summary.json");
  return written;
}

}  // namespace auverify
