#pragma once

#include <set>
#include <string>
#include <vector>

#include "auverify/model.hpp"

namespace auverify {

/// Inputs and outputs recorded for one layer during a forward pass.
struct LayerRecord {
  Tensor input;
  Tensor output;
  ArgmaxIndices argmax;       // maxpool only
  std::optional<Tensor> skip;  // residual_add only: value added to the main branch
};

struct ActivationTrace {
  std::vector<LayerRecord> layers;
  Tensor logits;
  Tensor probabilities;
  std::vector<std::string> labels;
  std::vector<std::string> warnings;
};

namespace detail {

inline const Tensor& output_at(const ActivationTrace& trace, const Tensor& input,
                               long index) {
  return index < 0 ? input : trace.layers[static_cast<std::size_t>(index)].output;
}

}  // namespace detail

/// Runs the model on a CxHxW input and records every layer. Inputs outside
/// [0,1] are accepted; the trace carries a warning.
inline ActivationTrace forward(const ModelSpec& model, const Tensor& input) {
  using namespace layers;
  if (input.shape() != model.input_shape) {
    throw DimensionError("input " + shape_str(input.shape()) +
                         " does not match model input " +
                         shape_str(model.input_shape));
  }
  ActivationTrace trace;
  trace.labels = model.output_labels;
  std::size_t out_of_range = 0;
  for (float v : input.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) ++out_of_range;
  }
  if (out_of_range) {
    trace.warnings.push_back(std::to_string(out_of_range) +
                             " input values outside [0,1]");
  }

  trace.layers.reserve(model.layers.size());
  const Tensor* current = &input;
  for (const auto& layer : model.layers) {
    LayerRecord rec;
    rec.input = *current;
    std::visit(
        [&](const auto& op) {
          using L = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<L, Conv2d>) {
            rec.output = conv2d_forward(rec.input, op.kernels, op.bias, op.stride,
                                        op.padding);
          } else if constexpr (std::is_same_v<L, Dense>) {
            rec.output = dense_forward(rec.input, op.weights, op.bias);
          } else if constexpr (std::is_same_v<L, Relu>) {
            rec.output = relu(rec.input);
          } else if constexpr (std::is_same_v<L, Sigmoid>) {
            rec.output = sigmoid(rec.input);
          } else if constexpr (std::is_same_v<L, MaxPool>) {
            auto pooled = maxpool2d(rec.input, op.window, op.stride);
            rec.output = std::move(pooled.output);
            rec.argmax = std::move(pooled.argmax);
          } else if constexpr (std::is_same_v<L, GlobalAvgPool>) {
            rec.output = global_avgpool(rec.input);
          } else if constexpr (std::is_same_v<L, Flatten>) {
            rec.output = rec.input.reshaped({rec.input.size()});
          } else if constexpr (std::is_same_v<L, BatchNorm>) {
            rec.output = channel_affine(rec.input, op.scale(), op.shift());
          } else {
            const Tensor& source = detail::output_at(trace, input, op.skip_source);
            Tensor skip = op.projection
                              ? conv2d_forward(source, op.projection->kernels,
                                               op.projection->bias,
                                               op.projection->stride,
                                               op.projection->padding)
                              : source;
            if (skip.shape() != rec.input.shape()) {
              throw DimensionError("residual_add: skip " + shape_str(skip.shape()) +
                                   " vs main " + shape_str(rec.input.shape()));
            }
            rec.output = rec.input;
            for (std::size_t i = 0; i < skip.size(); ++i) rec.output[i] += skip[i];
            rec.skip = std::move(skip);
          }
        },
        layer.op);
    trace.layers.push_back(std::move(rec));
    current = &trace.layers.back().output;
  }
  trace.logits = trace.layers.back().input;
  trace.probabilities = trace.layers.back().output;
  return trace;
}

/// AU k is detected iff probability[k] >= threshold (inclusive).
inline std::set<std::string> classify(const ActivationTrace& trace,
                                      double threshold = 0.5) {
  std::set<std::string> detected;
  for (std::size_t k = 0; k < trace.labels.size(); ++k) {
    if (static_cast<double>(trace.probabilities[k]) >= threshold) {
      detected.insert(trace.labels[k]);
    }
  }
  return detected;
}

}  // namespace auverify
