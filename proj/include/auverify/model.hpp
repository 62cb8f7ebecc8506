#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "auverify/au.hpp"
#include "auverify/kernels.hpp"

namespace auverify {

namespace layers {

struct Conv2d {
  Tensor kernels;  // OIHW
  Tensor bias;     // O
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct Dense {
  Tensor weights;  // (in, out)
  Tensor bias;     // out
};

struct Relu {};
struct Sigmoid {};
struct Flatten {};
struct GlobalAvgPool {};

struct MaxPool {
  std::size_t window = 2;
  std::size_t stride = 2;
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;

  std::vector<double> scale() const {
    std::vector<double> s(gamma.size());
    for (std::size_t c = 0; c < s.size(); ++c) {
      s[c] = gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + epsilon);
    }
    return s;
  }
  std::vector<double> shift() const {
    const auto s = scale();
    std::vector<double> b(beta.size());
    for (std::size_t c = 0; c < b.size(); ++c) {
      b[c] = beta[c] - static_cast<double>(running_mean[c]) * s[c];
    }
    return b;
  }
};

/// Sums the previous layer's output with the output of `skip_source`
/// (-1 is the model input), optionally passed through a projection conv.
struct ResidualAdd {
  long skip_source = -1;
  std::optional<Conv2d> projection;
};

}  // namespace layers

using LayerOp = std::variant<layers::Conv2d, layers::Dense, layers::Relu,
                             layers::Sigmoid, layers::MaxPool,
                             layers::GlobalAvgPool, layers::BatchNorm,
                             layers::ResidualAdd, layers::Flatten>;

struct LayerSpec {
  LayerOp op;
  std::string name;
};

inline std::string_view kind_name(const LayerOp& op) {
  return std::visit(
      [](const auto& l) -> std::string_view {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, layers::Conv2d>) return "conv2d";
        else if constexpr (std::is_same_v<L, layers::Dense>) return "dense";
        else if constexpr (std::is_same_v<L, layers::Relu>) return "relu";
        else if constexpr (std::is_same_v<L, layers::Sigmoid>) return "sigmoid";
        else if constexpr (std::is_same_v<L, layers::MaxPool>) return "maxpool";
        else if constexpr (std::is_same_v<L, layers::GlobalAvgPool>) return "global_avgpool";
        else if constexpr (std::is_same_v<L, layers::BatchNorm>) return "batchnorm";
        else if constexpr (std::is_same_v<L, layers::ResidualAdd>) return "residual_add";
        else return "flatten";
      },
      op);
}

/// Test input and expected probabilities embedded in a model file.
struct Golden {
  Tensor input;
  std::vector<float> probabilities;
};

struct ModelSpec {
  std::string name;
  Shape input_shape;  // C, H, W
  std::vector<LayerSpec> layers;
  std::vector<std::string> output_labels;
  std::optional<Golden> golden;

  /// Output shape of every layer; filled in by validate().
  std::vector<Shape> output_shapes;

  const Shape& shape_at(long output_index) const {
    return output_index < 0 ? input_shape
                            : output_shapes.at(static_cast<std::size_t>(output_index));
  }

  long label_index(std::string_view au) const {
    const std::string id = canonical_au(au);
    for (std::size_t i = 0; i < output_labels.size(); ++i) {
      if (output_labels[i] == id) return static_cast<long>(i);
    }
    return -1;
  }
};

namespace detail {

inline Shape conv_shape_checked(const layers::Conv2d& conv, const Shape& in) {
  const Shape out = conv2d_output_shape(in, conv.kernels.shape(), conv.stride,
                                        conv.padding);
  if (conv.bias.shape() != Shape{conv.kernels.dim(0)}) {
    throw DimensionError("conv2d bias " + shape_str(conv.bias.shape()) +
                         " does not match " + std::to_string(conv.kernels.dim(0)) +
                         " kernels");
  }
  return out;
}

inline Shape infer_layer_shape(const ModelSpec& model, std::size_t index,
                               const Shape& in) {
  using namespace layers;
  const LayerOp& op = model.layers[index].op;
  if (auto* conv = std::get_if<Conv2d>(&op)) return conv_shape_checked(*conv, in);
  if (auto* dense = std::get_if<Dense>(&op)) {
    Shape out = dense_output_shape(in, dense->weights.shape());
    if (dense->bias.shape() != out) {
      throw DimensionError("dense bias " + shape_str(dense->bias.shape()) +
                           " does not match output " + shape_str(out));
    }
    return out;
  }
  if (std::holds_alternative<Relu>(op) || std::holds_alternative<Sigmoid>(op)) {
    return in;
  }
  if (auto* pool = std::get_if<MaxPool>(&op)) {
    return maxpool2d_output_shape(in, pool->window, pool->stride);
  }
  if (std::holds_alternative<GlobalAvgPool>(op)) {
    return global_avgpool_output_shape(in);
  }
  if (std::holds_alternative<Flatten>(op)) return {shape_numel(in)};
  if (auto* bn = std::get_if<BatchNorm>(&op)) {
    const Shape channels{in[0]};
    for (const Tensor* t : {&bn->gamma, &bn->beta, &bn->running_mean,
                            &bn->running_var}) {
      if (t->shape() != channels) {
        throw DimensionError("batchnorm parameter " + shape_str(t->shape()) +
                             " does not match channel count " +
                             std::to_string(in[0]));
      }
    }
    if (in.size() != 1 && in.size() != 3) {
      throw DimensionError("batchnorm expects rank-1 or CxHxW input, got " +
                           shape_str(in));
    }
    for (std::size_t c = 0; c < in[0]; ++c) {
      if (!(static_cast<double>(bn->running_var[c]) + bn->epsilon > 0.0)) {
        throw ConfigError("batchnorm running_var + epsilon must be positive");
      }
    }
    return in;
  }
  const auto& add = std::get<ResidualAdd>(op);
  if (add.skip_source < -1 || add.skip_source >= static_cast<long>(index)) {
    throw ConfigError("residual_add skip_source " +
                      std::to_string(add.skip_source) +
                      " must reference an earlier layer or -1 (model input)");
  }
  Shape skip = model.shape_at(add.skip_source);
  if (add.projection) {
    if (add.projection->kernels.rank() != 4 ||
        add.projection->kernels.dim(2) != 1 || add.projection->kernels.dim(3) != 1) {
      throw ConfigError("residual projection must be a 1x1 convolution");
    }
    skip = conv_shape_checked(*add.projection, skip);
  }
  if (skip != in) {
    throw DimensionError("residual_add skip shape " + shape_str(skip) +
                         " differs from main branch " + shape_str(in));
  }
  return in;
}

}  // namespace detail

/// Checks every structural invariant and records per-layer output shapes.
/// Errors carry the offending layer index.
inline void validate(ModelSpec& model) {
  if (model.input_shape.size() != 3) {
    throw ValidationError("input_shape must be [C,H,W], got " +
                          shape_str(model.input_shape));
  }
  try {
    check_shape(model.input_shape);
  } catch (const Error& e) {
    throw ValidationError(std::string("input_shape: ") + e.what());
  }
  if (model.output_labels.empty()) {
    throw ValidationError("output_labels must not be empty");
  }
  std::set<std::string> seen;
  for (auto& label : model.output_labels) {
    try {
      label = canonical_au(label);
    } catch (const Error& e) {
      throw ValidationError(std::string("output_labels: ") + e.what());
    }
    if (!seen.insert(label).second) {
      throw ValidationError("duplicate output label " + label);
    }
  }
  if (model.layers.empty()) throw ValidationError("model has no layers");

  model.output_shapes.clear();
  Shape current = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const bool is_sigmoid = std::holds_alternative<layers::Sigmoid>(model.layers[i].op);
    const bool is_last = i + 1 == model.layers.size();
    if (is_sigmoid && !is_last) {
      throw ValidationError("sigmoid is only supported as the output layer",
                            static_cast<long>(i));
    }
    try {
      current = detail::infer_layer_shape(model, i, current);
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ValidationError(e.what(), static_cast<long>(i));
    }
    model.output_shapes.push_back(current);
  }
  const long last = static_cast<long>(model.layers.size()) - 1;
  if (!std::holds_alternative<layers::Sigmoid>(model.layers.back().op)) {
    throw ValidationError("final layer must be sigmoid", last);
  }
  if (current.size() != 1 || current[0] != model.output_labels.size()) {
    throw ValidationError("sigmoid output " + shape_str(current) + " does not match " +
                              std::to_string(model.output_labels.size()) +
                              " output labels",
                          last);
  }
}

// ---------------------------------------------------------------------------
// Batchnorm folding

/// A model with batchnorm merged into the preceding linear layer where
/// possible. Canonical layer j replaces original layers first[j]..last[j].
struct FoldedModel {
  ModelSpec model;
  std::vector<std::size_t> first;
  std::vector<std::size_t> last;
};

inline FoldedModel fold_batchnorm(const ModelSpec& source) {
  using namespace layers;
  const std::size_t n = source.layers.size();
  std::vector<bool> is_skip_source(n, false);
  for (const auto& layer : source.layers) {
    if (auto* add = std::get_if<ResidualAdd>(&layer.op); add && add->skip_source >= 0) {
      is_skip_source[static_cast<std::size_t>(add->skip_source)] = true;
    }
  }

  FoldedModel folded;
  folded.model.name = source.name;
  folded.model.input_shape = source.input_shape;
  folded.model.output_labels = source.output_labels;
  folded.model.golden = source.golden;
  std::vector<long> canonical_of_output(n, -1);

  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& layer = source.layers[i];
    const bool next_is_bn = i + 1 < n &&
                            std::holds_alternative<BatchNorm>(source.layers[i + 1].op) &&
                            !is_skip_source[i];
    const bool linear = std::holds_alternative<Conv2d>(layer.op) ||
                        std::holds_alternative<Dense>(layer.op);
    LayerSpec out = layer;
    if (auto* add = std::get_if<ResidualAdd>(&out.op); add && add->skip_source >= 0) {
      add->skip_source = canonical_of_output[static_cast<std::size_t>(add->skip_source)];
    }
    const std::size_t j = folded.model.layers.size();
    if (linear && next_is_bn) {
      const auto& bn = std::get<BatchNorm>(source.layers[i + 1].op);
      const auto scale = bn.scale();
      const auto shift = bn.shift();
      if (auto* conv = std::get_if<Conv2d>(&out.op)) {
        const std::size_t per_kernel = conv->kernels.size() / conv->kernels.dim(0);
        for (std::size_t o = 0; o < conv->kernels.dim(0); ++o) {
          for (std::size_t q = 0; q < per_kernel; ++q) {
            auto& w = conv->kernels[o * per_kernel + q];
            w = static_cast<float>(w * scale[o]);
          }
          conv->bias[o] = static_cast<float>(conv->bias[o] * scale[o] + shift[o]);
        }
      } else {
        auto& dense = std::get<Dense>(out.op);
        const std::size_t m = dense.weights.dim(1);
        for (std::size_t r = 0; r < dense.weights.dim(0); ++r) {
          for (std::size_t k = 0; k < m; ++k) {
            auto& w = dense.weights[r * m + k];
            w = static_cast<float>(w * scale[k]);
          }
        }
        for (std::size_t k = 0; k < m; ++k) {
          dense.bias[k] = static_cast<float>(dense.bias[k] * scale[k] + shift[k]);
        }
      }
      folded.model.layers.push_back(std::move(out));
      folded.first.push_back(i);
      folded.last.push_back(i + 1);
      canonical_of_output[i + 1] = static_cast<long>(j);
      ++i;
    } else {
      folded.model.layers.push_back(std::move(out));
      folded.first.push_back(i);
      folded.last.push_back(i);
      canonical_of_output[i] = static_cast<long>(j);
    }
  }
  validate(folded.model);
  return folded;
}

}  // namespace auverify
