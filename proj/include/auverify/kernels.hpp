#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "auverify/tensor.hpp"

namespace auverify {

// Shape inference. Each kernel below produces exactly these shapes; the
// model validator chains them without executing anything. Strided windows
// use floor division, so trailing rows/columns a window cannot reach are
// ignored (the usual framework convention).

/// Dense layers read their input in row-major order, so a CxHxW input is
/// accepted as if flattened.
inline Shape dense_output_shape(const Shape& input, const Shape& weights) {
  if (weights.size() != 2 || input.empty() || shape_numel(input) != weights[0]) {
    throw DimensionError("dense: input " + shape_str(input) +
                         " does not match weights " + shape_str(weights));
  }
  return {weights[1]};
}

inline Shape conv2d_output_shape(const Shape& input, const Shape& kernels,
                                 std::size_t stride, std::size_t padding) {
  if (input.size() != 3 || kernels.size() != 4 || input[0] != kernels[1]) {
    throw DimensionError("conv2d: input " + shape_str(input) +
                         " does not match kernels " + shape_str(kernels));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t padded_h = input[1] + 2 * padding;
  const std::size_t padded_w = input[2] + 2 * padding;
  if (padded_h < kernels[2] || padded_w < kernels[3]) {
    throw ConfigError("conv2d: kernel " + shape_str(kernels) +
                      " larger than padded input " + shape_str(input));
  }
  return {kernels[0], (padded_h - kernels[2]) / stride + 1,
          (padded_w - kernels[3]) / stride + 1};
}

inline Shape maxpool2d_output_shape(const Shape& input, std::size_t window,
                                    std::size_t stride) {
  if (input.size() != 3) {
    throw DimensionError("maxpool: expected CxHxW input, got " +
                         shape_str(input));
  }
  if (window == 0 || stride == 0) {
    throw ConfigError("maxpool: window and stride must be positive");
  }
  if (input[1] < window || input[2] < window) {
    throw ConfigError("maxpool: window " + std::to_string(window) +
                      " larger than input " + shape_str(input));
  }
  return {input[0], (input[1] - window) / stride + 1,
          (input[2] - window) / stride + 1};
}

inline Shape global_avgpool_output_shape(const Shape& input) {
  if (input.size() != 3) {
    throw DimensionError("global_avgpool: expected CxHxW input, got " +
                         shape_str(input));
  }
  return {input[0]};
}

/// out[k] = sum_j input[j] * weights[j,k] + bias[k], accumulated in double.
inline Tensor dense_forward(const Tensor& input, const Tensor& weights,
                            const Tensor& bias) {
  const Shape out_shape = dense_output_shape(input.shape(), weights.shape());
  if (bias.shape() != out_shape) {
    throw DimensionError("dense: bias " + shape_str(bias.shape()) +
                         " does not match output " + shape_str(out_shape));
  }
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  std::vector<double> acc(m);
  for (std::size_t k = 0; k < m; ++k) acc[k] = bias[k];
  for (std::size_t j = 0; j < n; ++j) {
    const double x = input[j];
    if (x == 0.0) continue;
    const float* row = weights.data().data() + j * m;
    for (std::size_t k = 0; k < m; ++k) acc[k] += x * row[k];
  }
  Tensor out(out_shape);
  for (std::size_t k = 0; k < m; ++k) out[k] = static_cast<float>(acc[k]);
  return out;
}

/// Zero-padded cross-correlation over a CxHxW input with OIHW kernels.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels,
                             const Tensor& bias, std::size_t stride,
                             std::size_t padding) {
  const Shape out_shape =
      conv2d_output_shape(input.shape(), kernels.shape(), stride, padding);
  if (bias.shape() != Shape{kernels.dim(0)}) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) +
                         " does not match kernel count " +
                         std::to_string(kernels.dim(0)));
  }
  const std::size_t channels = input.dim(0);
  const long in_h = static_cast<long>(input.dim(1));
  const long in_w = static_cast<long>(input.dim(2));
  const std::size_t kh = kernels.dim(2);
  const std::size_t kw = kernels.dim(3);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < out_shape[0]; ++o) {
    for (std::size_t oy = 0; oy < out_shape[1]; ++oy) {
      for (std::size_t ox = 0; ox < out_shape[2]; ++ox) {
        double acc = bias[o];
        const long y0 = static_cast<long>(oy * stride) - static_cast<long>(padding);
        const long x0 = static_cast<long>(ox * stride) - static_cast<long>(padding);
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t dy = 0; dy < kh; ++dy) {
            const long iy = y0 + static_cast<long>(dy);
            if (iy < 0 || iy >= in_h) continue;
            for (std::size_t dx = 0; dx < kw; ++dx) {
              const long ix = x0 + static_cast<long>(dx);
              if (ix < 0 || ix >= in_w) continue;
              acc += static_cast<double>(input.at(c, iy, ix)) *
                     kernels[((o * channels + c) * kh + dy) * kw + dx];
            }
          }
        }
        out.at(o, oy, ox) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

inline Tensor sigmoid(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.values()) {
    v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  }
  return out;
}

/// Flat input index of the winner of each pooling window.
using ArgmaxIndices = std::vector<std::uint32_t>;

struct MaxPoolResult {
  Tensor output;
  ArgmaxIndices argmax;
};

/// Ties resolve to the lowest flat input index.
inline MaxPoolResult maxpool2d(const Tensor& input, std::size_t window,
                               std::size_t stride) {
  const Shape out_shape = maxpool2d_output_shape(input.shape(), window, stride);
  const std::size_t in_h = input.dim(1);
  const std::size_t in_w = input.dim(2);
  MaxPoolResult result{Tensor(out_shape), ArgmaxIndices(shape_numel(out_shape))};
  std::size_t k = 0;
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    for (std::size_t oy = 0; oy < out_shape[1]; ++oy) {
      for (std::size_t ox = 0; ox < out_shape[2]; ++ox, ++k) {
        std::size_t best = (c * in_h + oy * stride) * in_w + ox * stride;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx =
                (c * in_h + oy * stride + dy) * in_w + ox * stride + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        result.output[k] = input[best];
        result.argmax[k] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return result;
}

inline Tensor global_avgpool(const Tensor& input) {
  const Shape out_shape = global_avgpool_output_shape(input.shape());
  const std::size_t plane = input.dim(1) * input.dim(2);
  Tensor out(out_shape);
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += input[c * plane + i];
    out[c] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return out;
}

/// Per-channel affine map y = scale[c] * x + shift[c] over rank-1 or CxHxW.
inline Tensor channel_affine(const Tensor& input, const std::vector<double>& scale,
                             const std::vector<double>& shift) {
  const std::size_t channels = input.dim(0);
  if (scale.size() != channels || shift.size() != channels) {
    throw DimensionError("channel affine: " + std::to_string(scale.size()) +
                         " parameters for input " + shape_str(input.shape()));
  }
  const std::size_t plane = input.size() / channels;
  Tensor out(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out[c * plane + i] = static_cast<float>(
          scale[c] * static_cast<double>(input[c * plane + i]) + shift[c]);
    }
  }
  return out;
}

}  // namespace auverify
