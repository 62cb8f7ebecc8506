// Command-line front end: verify, explain, inspect-model, f1.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "auverify/auverify.hpp"

namespace fs = std::filesystem;
using namespace auverify;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitSkips = 2;

std::vector<MuVariant> parse_variants(const std::vector<std::string>& names) {
  std::vector<MuVariant> out;
  for (const auto& n : names) out.push_back(MuVariant::parse(n));
  return out;
}

int run_verify(const RunConfig& config) {
  const RunResult result = run_verification(config, &std::cerr);
  emit_run(result, config);
  const auto& c = result.report.counts;
  std::cout << "processed " << c.processed << " of " << c.lines << " entries (" << c.skipped
            << " skipped, " << c.failed << " failed), " << result.report.records.size()
            << " mu records -> " << (config.out_dir / "report.csv").string() << '\n';
  for (const auto& n : result.report.notices) std::cerr << "notice: " << n << '\n';
  return c.skipped + c.failed > 0 ? kExitSkips : kExitOk;
}

std::vector<Point> read_landmarks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmarks " + path.string());
  nlohmann::json doc = nlohmann::json::parse(in);
  if (doc.is_object()) doc = doc.at("landmarks");
  std::vector<Point> points;
  for (const auto& p : doc) points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return points;
}

struct ExplainArgs {
  fs::path model, image, landmarks, boxes, out = ".";
  std::vector<std::string> aus;
  std::string preset = "composite";
  std::string image_id;
};

int run_explain(const ExplainArgs& args) {
  const ModelSpec model = load_model(args.model);
  const Explainer explainer(model);
  const ImageDims dims{model.input_shape[1], model.input_shape[2]};
  ManifestEntry entry;
  entry.path = args.image;
  entry.image_id = args.image_id.empty() ? args.image.stem().string() : args.image_id;
  const Tensor input = load_entry_image(entry, model.input_shape);
  const ActivationTrace trace = forward(model, input);
  for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
  const RulePreset preset = RulePreset::from_name(args.preset);

  std::vector<std::string> targets;
  if (args.aus.empty()) {
    const auto detected = classify(trace);
    targets.assign(detected.begin(), detected.end());
  } else {
    for (const auto& a : args.aus) targets.push_back(canonical_au(a));
  }
  std::optional<LandmarkSet> landmarks;
  if (!args.landmarks.empty()) landmarks = validate_landmarks(read_landmarks(args.landmarks), dims);
  const AuBoxConfig boxes = args.boxes.empty() ? default_box_config() : load_box_config(args.boxes);

  fs::create_directories(args.out);
  for (std::size_t k = 0; k < model.output_labels.size(); ++k) {
    std::cout << model.output_labels[k] << " p=" << trace.probabilities[k]
              << " logit=" << trace.logits[k] << '\n';
  }
  for (const auto& au : targets) {
    const RelevanceMap map = explainer.explain(trace, au, preset);
    std::optional<BoundingBox> box;
    if (landmarks) box = au_bounding_box(*landmarks, au, boxes, dims);
    const fs::path png = args.out / heatmap_filename(entry.image_id, au, preset.name);
    write_png(png, render_explanation(map, input, box ? &*box : nullptr));
    const fs::path stem = args.out / (png.stem().string() + "_relevance");
    write_relevance_sidecar(map, stem, args.image.string());
    std::cout << au << ": heatmap " << png.string();
    if (box) {
      const MuResult r = mu(map.pixel_values, box_mask(*box, dims));
      if (r.mu) {
        std::cout << " mu=" << *r.mu
                  << " mu_w=" << mu_weighted(*r.mu, box_area_fraction(*box, dims));
      } else {
        std::cout << " mu=undefined (no positive relevance)";
      }
    }
    std::cout << '\n';
  }
  return kExitOk;
}

int run_inspect(const fs::path& path) {
  const ModelSpec model = load_model(path);
  std::cout << "model " << (model.name.empty() ? "(unnamed)" : model.name) << "\n"
            << "input " << shape_str(model.input_shape) << "\n";
  std::size_t params = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& layer = model.layers[i];
    std::visit(
        [&](const auto& op) {
          using L = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<L, layers::Conv2d>) {
            params += op.kernels.size() + op.bias.size();
          } else if constexpr (std::is_same_v<L, layers::Dense>) {
            params += op.weights.size() + op.bias.size();
          } else if constexpr (std::is_same_v<L, layers::BatchNorm>) {
            params += 4 * op.gamma.size();
          } else if constexpr (std::is_same_v<L, layers::ResidualAdd>) {
            if (op.projection) params += op.projection->kernels.size() + op.projection->bias.size();
          }
        },
        layer.op);
    std::printf("%3zu  %-15s %-12s -> %s", i, std::string(kind_name(layer.op)).c_str(),
                layer.name.c_str(), shape_str(model.output_shapes[i]).c_str());
    if (auto* add = std::get_if<layers::ResidualAdd>(&layer.op)) {
      std::printf("  (skip from %ld%s)", add->skip_source, add->projection ? ", projected" : "");
    }
    std::printf("\n");
  }
  std::cout << "labels";
  for (const auto& l : model.output_labels) std::cout << ' ' << l;
  std::cout << "\nparameters " << params << "\n";
  if (model.golden) std::cout << "golden self-check passed\n";
  return kExitOk;
}

int run_f1(const fs::path& model_path, const fs::path& manifest, double threshold,
           const fs::path& out) {
  const ModelSpec model = load_model(model_path);
  const auto ingest = ingest_manifest(manifest, {model.input_shape[1], model.input_shape[2]});
  for (const auto& m : ingest.messages) std::cerr << m << '\n';
  std::vector<Prediction> predictions;
  std::size_t failed = 0, skipped = ingest.skipped;
  for (const auto& entry : ingest.entries) {
    try {
      const auto trace = forward(model, load_entry_image(entry, model.input_shape));
      predictions.push_back(
          {entry.image_id, entry.dataset, classify(trace, threshold), entry.ground_truth_aus});
    } catch (const DimensionError& e) {
      ++skipped;
      std::cerr << "skipped line " << entry.line << ": " << e.what() << '\n';
    } catch (const Error& e) {
      ++failed;
      std::cerr << "failed line " << entry.line << ": " << e.what() << '\n';
    }
  }
  const std::string csv = f1_csv(f1_table(predictions, model.output_labels));
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(out) << csv;
  }
  return skipped + failed > 0 ? kExitSkips : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verify facial Action Unit classifiers with layer-wise relevance propagation"};
  app.require_subcommand(1);

  RunConfig config;
  std::string preset_name = "composite";
  std::vector<std::string> variant_names = {"standard"};
  auto* verify = app.add_subcommand("verify", "Run the verification pipeline over a manifest");
  verify->add_option("--model", config.model_path, "Model file (format version 1)")->required();
  verify->add_option("--manifest", config.manifest_path, "JSONL manifest")->required();
  verify->add_option("--boxes", config.boxes_path, "AU box config JSON (default: built-in)");
  verify->add_option("--preset", preset_name, "Rule preset")->capture_default_str();
  verify->add_option("--threshold", config.threshold, "Detection threshold")->capture_default_str();
  verify->add_option("--variant", variant_names, "standard and/or top25 (repeatable)")
      ->capture_default_str();
  verify->add_option("--out", config.out_dir, "Output directory")->required();
  verify->add_flag("--heatmaps", config.heatmaps, "Write heatmap PNGs");
  verify->add_option("--jobs", config.jobs, "Worker threads")->capture_default_str();
  verify->add_flag("--all-positives", config.all_positives,
                   "Measure every ground-truth AU, not only true positives");
  verify->add_flag("--records", config.records, "Write per-record CSVs");

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Explain a single image");
  explain_cmd->add_option("--model", explain_args.model)->required();
  explain_cmd->add_option("--image", explain_args.image, "PNG crop")->required();
  explain_cmd->add_option("--au", explain_args.aus, "Target AU (repeatable; default: detected)");
  explain_cmd->add_option("--landmarks", explain_args.landmarks, "JSON array of 68 [x,y]");
  explain_cmd->add_option("--boxes", explain_args.boxes);
  explain_cmd->add_option("--preset", explain_args.preset)->capture_default_str();
  explain_cmd->add_option("--id", explain_args.image_id, "Image id used in file names");
  explain_cmd->add_option("--out", explain_args.out)->capture_default_str();

  fs::path inspect_path;
  auto* inspect = app.add_subcommand("inspect-model", "Print the validated topology");
  inspect->add_option("--model", inspect_path)->required();

  fs::path f1_model, f1_manifest, f1_out;
  double f1_threshold = 0.5;
  auto* f1 = app.add_subcommand("f1", "Classification F1 per AU");
  f1->add_option("--model", f1_model)->required();
  f1->add_option("--manifest", f1_manifest)->required();
  f1->add_option("--threshold", f1_threshold)->capture_default_str();
  f1->add_option("--out", f1_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*verify) {
      config.preset = RulePreset::from_name(preset_name);
      config.variants = parse_variants(variant_names);
      return run_verify(config);
    }
    if (*explain_cmd) return run_explain(explain_args);
    if (*inspect) return run_inspect(inspect_path);
    if (*f1) return run_f1(f1_model, f1_manifest, f1_threshold, f1_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitFatal;
}
