#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <boost/beast/core/detail/base64.hpp>
#include <nlohmann/json.hpp>

#include "auverify/forward.hpp"

namespace auverify {

static_assert(std::endian::native == std::endian::little,
              "weight decoding assumes a little-endian host");

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kGoldenTolerance = 1e-4;

namespace detail {

namespace b64 = boost::beast::detail::base64;
using nlohmann::json;

inline std::string encode_floats(std::span<const float> values) {
  std::string out(b64::encoded_size(values.size_bytes()), '\0');
  out.resize(b64::encode(out.data(), values.data(), values.size_bytes()));
  return out;
}

inline std::vector<float> decode_floats(const std::string& text) {
  std::string bytes(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(bytes.data(), text.data(), text.size());
  std::size_t padding = 0;
  for (std::size_t i = read; i < text.size(); ++i) {
    if (text[i] != '=') throw ParseError("invalid base64 character in data_b64");
    ++padding;
  }
  if (padding > 2 || text.size() % 4 != 0) {
    throw ParseError("data_b64 is not well-formed base64");
  }
  if (written % sizeof(float) != 0) {
    throw ParseError("data_b64 length " + std::to_string(written) +
                     " bytes is not a multiple of 4");
  }
  std::vector<float> values(written / sizeof(float));
  std::memcpy(values.data(), bytes.data(), written);
  return values;
}

inline json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data_b64", encode_floats(t.values())}};
}

inline Tensor tensor_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data_b64")) {
    throw ParseError("weight tensor '" + field + "' must have shape and data_b64");
  }
  Shape shape;
  for (const auto& d : j.at("shape")) {
    if (!d.is_number_integer() || d.get<long long>() <= 0) {
      throw ParseError("weight tensor '" + field + "' has a non-positive dimension");
    }
    shape.push_back(d.get<std::size_t>());
  }
  check_shape(shape);
  auto data = decode_floats(j.at("data_b64").get<std::string>());
  if (data.size() != shape_numel(shape)) {
    throw DimensionError("weight tensor '" + field + "' holds " +
                         std::to_string(data.size()) + " floats, shape " +
                         shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)));
  }
  return Tensor(std::move(shape), std::move(data));
}

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                        std::string_view kind) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = it.key() == "kind" || it.key() == "name";
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      throw ParseError("unexpected field '" + it.key() + "' for " +
                       std::string(kind) + " layer");
    }
  }
}

inline std::size_t get_size(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ParseError(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline layers::Conv2d conv_from_json(const json& j) {
  layers::Conv2d conv;
  conv.kernels = tensor_from_json(j.at("weights"), "weights");
  conv.bias = tensor_from_json(j.at("bias"), "bias");
  conv.stride = get_size(j, "stride", 1);
  conv.padding = get_size(j, "padding", 0);
  return conv;
}

inline json conv_to_json(const layers::Conv2d& conv) {
  return json{{"weights", tensor_to_json(conv.kernels)},
              {"bias", tensor_to_json(conv.bias)},
              {"stride", conv.stride},
              {"padding", conv.padding}};
}

inline LayerSpec layer_from_json(const json& j) {
  using namespace layers;
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw ParseError("layer object needs a string 'kind'");
  }
  const std::string kind = j.at("kind").get<std::string>();
  LayerSpec layer;
  if (j.contains("name")) layer.name = j.at("name").get<std::string>();
  if (kind == "conv2d") {
    expect_keys(j, {"weights", "bias", "stride", "padding"}, kind);
    layer.op = conv_from_json(j);
  } else if (kind == "dense") {
    expect_keys(j, {"weights", "bias"}, kind);
    layer.op = Dense{tensor_from_json(j.at("weights"), "weights"),
                     tensor_from_json(j.at("bias"), "bias")};
  } else if (kind == "relu") {
    expect_keys(j, {}, kind);
    layer.op = Relu{};
  } else if (kind == "sigmoid") {
    expect_keys(j, {}, kind);
    layer.op = Sigmoid{};
  } else if (kind == "flatten") {
    expect_keys(j, {}, kind);
    layer.op = Flatten{};
  } else if (kind == "global_avgpool") {
    expect_keys(j, {}, kind);
    layer.op = GlobalAvgPool{};
  } else if (kind == "maxpool") {
    expect_keys(j, {"window", "stride"}, kind);
    const std::size_t window = get_size(j, "window", 0);
    layer.op = MaxPool{window, get_size(j, "stride", window)};
  } else if (kind == "batchnorm") {
    expect_keys(j, {"gamma", "beta", "running_mean", "running_var", "epsilon"}, kind);
    BatchNorm bn;
    bn.gamma = tensor_from_json(j.at("gamma"), "gamma");
    bn.beta = tensor_from_json(j.at("beta"), "beta");
    bn.running_mean = tensor_from_json(j.at("running_mean"), "running_mean");
    bn.running_var = tensor_from_json(j.at("running_var"), "running_var");
    if (j.contains("epsilon")) bn.epsilon = j.at("epsilon").get<double>();
    layer.op = std::move(bn);
  } else if (kind == "residual_add") {
    expect_keys(j, {"skip_source", "projection"}, kind);
    ResidualAdd add;
    add.skip_source = j.at("skip_source").get<long>();
    if (j.contains("projection") && !j.at("projection").is_null()) {
      expect_keys(j.at("projection"), {"weights", "bias", "stride", "padding"},
                  "projection");
      add.projection = conv_from_json(j.at("projection"));
    }
    layer.op = std::move(add);
  } else {
    throw ParseError("unknown layer kind '" + kind + "'");
  }
  return layer;
}

inline json layer_to_json(const LayerSpec& layer) {
  using namespace layers;
  json j = std::visit(
      [](const auto& op) -> json {
        using L = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<L, Conv2d>) {
          return conv_to_json(op);
        } else if constexpr (std::is_same_v<L, Dense>) {
          return json{{"weights", tensor_to_json(op.weights)},
                      {"bias", tensor_to_json(op.bias)}};
        } else if constexpr (std::is_same_v<L, MaxPool>) {
          return json{{"window", op.window}, {"stride", op.stride}};
        } else if constexpr (std::is_same_v<L, BatchNorm>) {
          return json{{"gamma", tensor_to_json(op.gamma)},
                      {"beta", tensor_to_json(op.beta)},
                      {"running_mean", tensor_to_json(op.running_mean)},
                      {"running_var", tensor_to_json(op.running_var)},
                      {"epsilon", op.epsilon}};
        } else if constexpr (std::is_same_v<L, ResidualAdd>) {
          json r{{"skip_source", op.skip_source}};
          if (op.projection) r["projection"] = conv_to_json(*op.projection);
          return r;
        } else {
          return json::object();
        }
      },
      layer.op);
  j["kind"] = std::string(kind_name(layer.op));
  if (!layer.name.empty()) j["name"] = layer.name;
  return j;
}

}  // namespace detail

/// Probability mismatch between the engine and a model's embedded golden pair.
class GoldenMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Re-runs the embedded golden input and compares probabilities.
/// Returns the largest absolute deviation.
inline double check_golden(const ModelSpec& model, double tolerance = kGoldenTolerance) {
  if (!model.golden) return 0.0;
  const auto& golden = *model.golden;
  if (golden.probabilities.size() != model.output_labels.size()) {
    throw ValidationError("golden probabilities have " +
                          std::to_string(golden.probabilities.size()) +
                          " entries, model has " +
                          std::to_string(model.output_labels.size()) + " labels");
  }
  const auto trace = forward(model, golden.input);
  double worst = 0.0;
  for (std::size_t k = 0; k < golden.probabilities.size(); ++k) {
    worst = std::max(worst, std::abs(static_cast<double>(trace.probabilities[k]) -
                                     golden.probabilities[k]));
  }
  if (worst > tolerance) {
    throw GoldenMismatchError("golden self-check failed: max deviation " +
                              std::to_string(worst));
  }
  return worst;
}

/// Parses and fully validates a model document (format version 1).
inline ModelSpec parse_model(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  ModelSpec model;
  try {
    if (!doc.is_object()) throw ParseError("model document must be a JSON object");
    if (!doc.contains("format_version") || !doc.at("format_version").is_number_integer()) {
      throw ParseError("missing integer format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported format_version " + std::to_string(version));
    }
    model.name = doc.value("name", std::string{});
    model.input_shape = doc.at("input_shape").get<Shape>();
    model.output_labels = doc.at("output_labels").get<std::vector<std::string>>();
    const auto& layer_docs = doc.at("layers");
    if (!layer_docs.is_array()) throw ParseError("'layers' must be an array");
    for (std::size_t i = 0; i < layer_docs.size(); ++i) {
      try {
        model.layers.push_back(detail::layer_from_json(layer_docs[i]));
      } catch (const json::exception& e) {
        throw ValidationError(e.what(), static_cast<long>(i));
      } catch (const Error& e) {
        throw ValidationError(e.what(), static_cast<long>(i));
      }
    }
    if (doc.contains("golden") && !doc.at("golden").is_null()) {
      const auto& g = doc.at("golden");
      model.golden = Golden{detail::tensor_from_json(g.at("input"), "golden.input"),
                            g.at("probabilities").get<std::vector<float>>()};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model document: ") + e.what());
  }
  validate(model);
  check_golden(model);
  return model;
}

inline ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

inline std::string model_to_json(const ModelSpec& model) {
  using detail::json;
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["name"] = model.name;
  doc["input_shape"] = model.input_shape;
  doc["output_labels"] = model.output_labels;
  doc["layers"] = json::array();
  for (const auto& layer : model.layers) {
    doc["layers"].push_back(detail::layer_to_json(layer));
  }
  if (model.golden) {
    doc["golden"] = json{{"input", detail::tensor_to_json(model.golden->input)},
                         {"probabilities", model.golden->probabilities}};
  }
  return doc.dump(1);
}

inline void save_model(const ModelSpec& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  out << model_to_json(model) << '\n';
}

}  // namespace auverify
