#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auverify/forward.hpp"
#include "auverify/lrp_rules.hpp"

namespace auverify {

/// Rule assignment per layer category.
struct RulePreset {
  std::string name;
  Rule input_layer = Rule::basic();
  Rule conv = Rule::basic();
  Rule dense = Rule::basic();

  static RulePreset basic() { return {"basic", Rule::basic(), Rule::basic(), Rule::basic()}; }

  /// zB([0,1]) on pixels, alpha1-beta0 on convolutions, epsilon 0.25 on dense.
  static RulePreset composite(double eps = 0.25, double low = 0.0, double high = 1.0) {
    return {"composite", Rule::z_b(low, high), Rule::alpha_beta(1.0, 0.0),
            Rule::epsilon(eps)};
  }

  static RulePreset epsilon(double eps = 0.25) {
    return {"epsilon", Rule::epsilon(eps), Rule::epsilon(eps), Rule::epsilon(eps)};
  }

  static RulePreset alpha_beta(double alpha, double beta) {
    const Rule r = Rule::alpha_beta(alpha, beta);
    return {alpha == 1.0 ? "alpha1beta0" : "alpha2beta1", r, r, r};
  }

  static RulePreset from_name(const std::string& name) {
    if (name == "basic") return basic();
    if (name == "composite") return composite();
    if (name == "epsilon") return epsilon();
    if (name == "alpha1beta0") return alpha_beta(1.0, 0.0);
    if (name == "alpha2beta1") return alpha_beta(2.0, 1.0);
    if (name == "flat") return {"flat", Rule::flat(), Rule::flat(), Rule::flat()};
    throw ConfigError("unknown rule preset '" + name +
                      "' (basic, composite, epsilon, alpha1beta0, alpha2beta1, flat)");
  }
};

/// Signed per-pixel relevance for one (image, target AU) pair.
struct RelevanceMap {
  std::string target_au;
  Tensor values;        // C x H x W
  Tensor pixel_values;  // H x W, channel sum
  double output_relevance = 0.0;
  std::string preset;
};

/// Relevance totals entering and leaving one layer during explain().
struct LayerTransition {
  std::size_t layer;
  double upper_total;
  double lower_total;
};

struct Explanation {
  RelevanceMap map;
  std::vector<LayerTransition> transitions;
};

/// Logit of the target unit at its index, zeros elsewhere.
inline RelTensor init_relevance(const ActivationTrace& trace, const std::string& target_au) {
  const std::string id = canonical_au(target_au);
  for (std::size_t k = 0; k < trace.labels.size(); ++k) {
    if (trace.labels[k] == id) {
      RelTensor r(trace.logits.shape());
      r[k] = trace.logits[k];
      return r;
    }
  }
  throw UnknownAuError(id);
}

inline RelevanceMap make_relevance_map(const RelTensor& input_relevance, std::string target_au,
                                       double output_relevance, std::string preset) {
  const Shape& s = input_relevance.shape();
  if (s.size() != 3) {
    throw DimensionError("relevance map needs CxHxW relevance, got " + shape_str(s));
  }
  RelevanceMap map;
  map.target_au = std::move(target_au);
  map.output_relevance = output_relevance;
  map.preset = std::move(preset);
  map.values = Tensor::cast(input_relevance);
  map.pixel_values = Tensor({s[1], s[2]});
  const std::size_t plane = s[1] * s[2];
  for (std::size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < s[0]; ++c) acc += input_relevance[c * plane + i];
    map.pixel_values[i] = static_cast<float>(acc);
  }
  return map;
}

/// Reusable relevance back-propagation for one model. Batchnorm layers are
/// folded into the preceding linear layer once, at construction.
class Explainer {
 public:
  explicit Explainer(const ModelSpec& model) : source_layers_(model.layers.size()) {
    folded_ = fold_batchnorm(model);
    const auto& layers = folded_.model.layers;
    input_fed_.assign(layers.size(), false);
    for (std::size_t j = 0; j < layers.size(); ++j) {
      input_fed_[j] = true;
      if (!std::holds_alternative<layers::Flatten>(layers[j].op)) break;
    }
  }

  const FoldedModel& folded() const noexcept { return folded_; }

  Explanation explain_detailed(const ActivationTrace& trace, const std::string& target_au,
                               const RulePreset& preset) const {
    using namespace layers;
    const ModelSpec& model = folded_.model;
    if (trace.layers.size() != source_layers_ || trace.labels != model.output_labels ||
        trace.layers.empty() || trace.layers.front().input.shape() != model.input_shape) {
      throw ValidationError("activation trace was not produced by this model");
    }
    RelTensor injected = init_relevance(trace, target_au);
    const double output_relevance = injected.sum();

    const std::size_t n = model.layers.size();
    std::vector<std::optional<RelTensor>> rel(n);
    std::optional<RelTensor> rel_input;
    auto slot = [&](long index) -> std::optional<RelTensor>& {
      return index < 0 ? rel_input : rel[static_cast<std::size_t>(index)];
    };
    auto accumulate = [&](long index, const RelTensor& r) {
      auto& target = slot(index);
      if (!target) {
        target = r;
      } else {
        for (std::size_t i = 0; i < r.size(); ++i) (*target)[i] += r[i];
      }
    };
    auto input_of = [&](std::size_t j) -> const Tensor& {
      return trace.layers[folded_.first[j]].input;
    };
    auto output_of = [&](long index) -> const Tensor& {
      return index < 0 ? trace.layers.front().input
                       : trace.layers[folded_.last[static_cast<std::size_t>(index)]].output;
    };

    Explanation result;
    accumulate(static_cast<long>(n) - 2, injected);
    for (long j = static_cast<long>(n) - 2; j >= 0; --j) {
      const std::size_t ju = static_cast<std::size_t>(j);
      auto& upper = rel[ju];
      if (!upper) upper = RelTensor(model.output_shapes[ju]);
      const RelTensor& r_up = *upper;
      const Tensor& x = input_of(ju);
      const bool first = input_fed_[ju];
      const LayerRecord& record = trace.layers[folded_.first[ju]];
      double lower_total = 0.0;
      auto send = [&](long index, RelTensor r) {
        lower_total += r.sum();
        accumulate(index, r);
      };

      std::visit(
          [&](const auto& op) {
            using L = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<L, Conv2d>) {
              send(j - 1, lrp_conv(x, {op.kernels, &op.bias, op.stride, op.padding}, r_up,
                                   first ? preset.input_layer : preset.conv));
            } else if constexpr (std::is_same_v<L, Dense>) {
              send(j - 1, lrp_dense(x, op.weights, &op.bias, r_up,
                                    first ? preset.input_layer : preset.dense));
            } else if constexpr (std::is_same_v<L, Relu> || std::is_same_v<L, Sigmoid>) {
              send(j - 1, lrp_relu(r_up));
            } else if constexpr (std::is_same_v<L, Flatten>) {
              send(j - 1, lrp_flatten(r_up, x.shape()));
            } else if constexpr (std::is_same_v<L, MaxPool>) {
              send(j - 1, lrp_maxpool(r_up, record.argmax, x.shape()));
            } else if constexpr (std::is_same_v<L, GlobalAvgPool>) {
              send(j - 1, lrp_global_avgpool(x, r_up));
            } else if constexpr (std::is_same_v<L, BatchNorm>) {
              const Rule& rule =
                  first ? preset.input_layer : (x.rank() == 3 ? preset.conv : preset.dense);
              send(j - 1, lrp_channel_affine(x, op.scale(), op.shift(), r_up, rule));
            } else {
              auto [r_main, r_skip] = lrp_residual_add(x, *record.skip, r_up);
              send(j - 1, std::move(r_main));
              if (op.projection) {
                const Rule& rule = op.skip_source < 0 ? preset.input_layer : preset.conv;
                r_skip = lrp_conv(output_of(op.skip_source),
                                  {op.projection->kernels, &op.projection->bias,
                                   op.projection->stride, op.projection->padding},
                                  r_skip, rule);
              }
              send(op.skip_source, std::move(r_skip));
            }
          },
          model.layers[ju].op);
      result.transitions.push_back({folded_.first[ju], r_up.sum(), lower_total});
      upper.reset();
    }

    if (!rel_input) rel_input = RelTensor(model.input_shape);
    result.map = make_relevance_map(*rel_input, canonical_au(target_au), output_relevance,
                                    preset.name);
    return result;
  }

  RelevanceMap explain(const ActivationTrace& trace, const std::string& target_au,
                       const RulePreset& preset) const {
    return explain_detailed(trace, target_au, preset).map;
  }

 private:
  FoldedModel folded_;
  std::size_t source_layers_;
  std::vector<bool> input_fed_;
};

/// Decomposes the target AU's logit back to input pixels.
inline RelevanceMap explain(const ModelSpec& model, const ActivationTrace& trace,
                            const std::string& target_au, const RulePreset& preset) {
  return Explainer(model).explain(trace, target_au, preset);
}

/// Writes `<stem>.bin` (uint32 H, uint32 W, then H*W float32 pixel values,
/// all little-endian) and `<stem>.json` describing the map.
inline void write_relevance_sidecar(const RelevanceMap& map, const std::filesystem::path& stem,
                                    const std::string& source_image = {}) {
  const auto bin_path = std::filesystem::path(stem.string() + ".bin");
  const auto json_path = std::filesystem::path(stem.string() + ".json");
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot write " + bin_path.string());
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(map.pixel_values.dim(0)),
                                   static_cast<std::uint32_t>(map.pixel_values.dim(1))};
  bin.write(reinterpret_cast<const char*>(header), sizeof header);
  bin.write(reinterpret_cast<const char*>(map.pixel_values.data().data()),
            static_cast<std::streamsize>(map.pixel_values.size() * sizeof(float)));
  if (!bin) throw IoError("failed writing " + bin_path.string());

  nlohmann::json desc{{"target_au", map.target_au},
                      {"preset", map.preset},
                      {"output_relevance", map.output_relevance},
                      {"relevance_source", "logit"},
                      {"height", header[0]},
                      {"width", header[1]},
                      {"source_image", source_image}};
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << desc.dump(2) << '\n';
}

/// Reads back the pixel grid of a `.bin` sidecar.
inline Tensor read_relevance_sidecar(const std::filesystem::path& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin_path.string());
  std::uint32_t header[2] = {0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] == 0 || header[1] == 0) {
    throw ParseError("bad relevance sidecar header in " + bin_path.string());
  }
  Tensor grid({header[0], header[1]});
  in.read(reinterpret_cast<char*>(grid.data().data()),
          static_cast<std::streamsize>(grid.size() * sizeof(float)));
  if (!in) throw ParseError("truncated relevance sidecar " + bin_path.string());
  return grid;
}

}  // namespace auverify
