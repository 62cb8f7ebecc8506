#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "auverify/kernels.hpp"

namespace auverify {

/// Stabilizer added to every basic-rule denominator so that z = 0 never
/// divides by zero. Independent of the user-facing epsilon rule.
inline constexpr double kImplicitEpsilon = 1e-9;

/// One relevance decomposition rule with its parameters.
class Rule {
 public:
  enum class Kind { basic, epsilon, alpha_beta, z_b, flat };

  static Rule basic() { return Rule(Kind::basic); }

  static Rule epsilon(double eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw ConfigError("epsilon rule needs eps >= 0, got " + std::to_string(eps));
    }
    Rule r(Kind::epsilon);
    r.epsilon_ = eps;
    return r;
  }

  static Rule alpha_beta(double alpha, double beta) {
    if (!(alpha >= 1.0) || !(beta >= 0.0) || std::abs(alpha - beta - 1.0) > 1e-9) {
      throw ConfigError("alpha-beta rule needs alpha - beta = 1 and alpha >= 1, got alpha=" +
                        std::to_string(alpha) + " beta=" + std::to_string(beta));
    }
    Rule r(Kind::alpha_beta);
    r.alpha_ = alpha;
    r.beta_ = beta;
    return r;
  }

  static Rule z_b(double low, double high) {
    if (!(low <= 0.0 && 0.0 <= high)) {
      throw ConfigError("zB rule needs low <= 0 <= high, got [" + std::to_string(low) +
                        ", " + std::to_string(high) + "]");
    }
    Rule r(Kind::z_b);
    r.low_ = low;
    r.high_ = high;
    return r;
  }

  static Rule flat() { return Rule(Kind::flat); }

  Kind kind() const noexcept { return kind_; }
  double eps() const noexcept { return epsilon_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }

  /// Denominator stabilizer for basic/epsilon; eps = 0 falls back to the
  /// implicit one so epsilon(0) behaves exactly like basic().
  double stabilizer() const noexcept {
    return kind_ == Kind::epsilon && epsilon_ > 0.0 ? epsilon_ : kImplicitEpsilon;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::basic: os << "basic"; break;
      case Kind::epsilon: os << "epsilon(" << epsilon_ << ")"; break;
      case Kind::alpha_beta: os << "alphabeta(" << alpha_ << "," << beta_ << ")"; break;
      case Kind::z_b: os << "zB(" << low_ << "," << high_ << ")"; break;
      case Kind::flat: os << "flat"; break;
    }
    return os.str();
  }

  friend bool operator==(const Rule&, const Rule&) = default;

 private:
  explicit Rule(Kind kind) : kind_(kind) {}

  Kind kind_;
  double epsilon_ = 0.0;
  double alpha_ = 1.0;
  double beta_ = 0.0;
  double low_ = 0.0;
  double high_ = 1.0;
};

namespace detail {

inline double signed_stab(double z, double stab) {
  return z >= 0.0 ? z + stab : z - stab;
}

inline double safe_ratio(double num, double den) {
  return den == 0.0 ? 0.0 : num / den;
}

// Connectivity views. Each describes z_k = sum_j x_j w_jk + b_k by visiting
// the (j, w_jk) pairs feeding output k.

struct DenseTopology {
  const Tensor& weights;
  const Tensor* bias;
  std::size_t outputs() const { return weights.dim(1); }
  double bias_at(std::size_t k) const { return bias ? (*bias)[k] : 0.0; }
  template <typename F>
  void for_each(std::size_t k, F&& f) const {
    const std::size_t n = weights.dim(0), m = weights.dim(1);
    for (std::size_t j = 0; j < n; ++j) f(j, static_cast<double>(weights[j * m + k]));
  }
};

struct ConvTopology {
  const Tensor& kernels;
  const Tensor* bias;
  std::size_t stride;
  std::size_t padding;
  Shape in_shape;
  Shape out_shape;

  std::size_t outputs() const { return shape_numel(out_shape); }
  double bias_at(std::size_t k) const {
    return bias ? (*bias)[k / (out_shape[1] * out_shape[2])] : 0.0;
  }
  template <typename F>
  void for_each(std::size_t k, F&& f) const {
    const std::size_t plane = out_shape[1] * out_shape[2];
    const std::size_t o = k / plane;
    const std::size_t oy = (k % plane) / out_shape[2];
    const std::size_t ox = k % out_shape[2];
    const std::size_t channels = in_shape[0];
    const long in_h = static_cast<long>(in_shape[1]);
    const long in_w = static_cast<long>(in_shape[2]);
    const std::size_t kh = kernels.dim(2), kw = kernels.dim(3);
    const long y0 = static_cast<long>(oy * stride) - static_cast<long>(padding);
    const long x0 = static_cast<long>(ox * stride) - static_cast<long>(padding);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t dy = 0; dy < kh; ++dy) {
        const long iy = y0 + static_cast<long>(dy);
        if (iy < 0 || iy >= in_h) continue;
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const long ix = x0 + static_cast<long>(dx);
          if (ix < 0 || ix >= in_w) continue;
          f((c * in_shape[1] + static_cast<std::size_t>(iy)) * in_shape[2] +
                static_cast<std::size_t>(ix),
            static_cast<double>(kernels[((o * channels + c) * kh + dy) * kw + dx]));
        }
      }
    }
  }
};

/// Per-channel scale, as in an unfolded batchnorm.
struct DiagonalTopology {
  const std::vector<double>& scale;
  const std::vector<double>& shift;
  std::size_t plane;
  std::size_t count;
  std::size_t outputs() const { return count; }
  double bias_at(std::size_t k) const { return shift[k / plane]; }
  template <typename F>
  void for_each(std::size_t k, F&& f) const {
    f(k, scale[k / plane]);
  }
};

struct AvgPoolTopology {
  std::size_t channels;
  std::size_t plane;
  std::size_t outputs() const { return channels; }
  double bias_at(std::size_t) const { return 0.0; }
  template <typename F>
  void for_each(std::size_t k, F&& f) const {
    const double w = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) f(k * plane + i, w);
  }
};

/// Two unit-weight inputs per output: x = [main; skip].
struct SumTopology {
  std::size_t count;
  std::size_t outputs() const { return count; }
  double bias_at(std::size_t) const { return 0.0; }
  template <typename F>
  void for_each(std::size_t k, F&& f) const {
    f(k, 1.0);
    f(count + k, 1.0);
  }
};

/// Applies `rule` to one linear layer. x has the layer's input size,
/// r_upper its output size; the result has x's size.
template <typename Topology, typename X>
std::vector<double> apply_rule(const Topology& topo, std::span<const X> x,
                               std::span<const double> r_upper, const Rule& rule) {
  using Kind = Rule::Kind;
  std::vector<double> r_lower(x.size(), 0.0);
  const std::size_t m = topo.outputs();
  for (std::size_t k = 0; k < m; ++k) {
    const double rk = r_upper[k];
    if (rk == 0.0) continue;
    switch (rule.kind()) {
      case Kind::basic:
      case Kind::epsilon: {
        double z = topo.bias_at(k);
        topo.for_each(k, [&](std::size_t j, double w) { z += static_cast<double>(x[j]) * w; });
        const double s = safe_ratio(rk, signed_stab(z, rule.stabilizer()));
        if (s == 0.0) break;
        topo.for_each(k, [&](std::size_t j, double w) {
          r_lower[j] += static_cast<double>(x[j]) * w * s;
        });
        break;
      }
      case Kind::alpha_beta: {
        const double b = topo.bias_at(k);
        double zp = std::max(b, 0.0);
        double zn = std::min(b, 0.0);
        topo.for_each(k, [&](std::size_t j, double w) {
          const double c = static_cast<double>(x[j]) * w;
          if (c > 0.0) zp += c;
          else zn += c;
        });
        const double sp = zp > 0.0 ? rule.alpha() * rk / zp : 0.0;
        const double sn = zn < 0.0 ? rule.beta() * rk / zn : 0.0;
        topo.for_each(k, [&](std::size_t j, double w) {
          const double c = static_cast<double>(x[j]) * w;
          if (c > 0.0) r_lower[j] += c * sp;
          else r_lower[j] -= c * sn;
        });
        break;
      }
      case Kind::z_b: {
        const auto term = [&](std::size_t j, double w) {
          return static_cast<double>(x[j]) * w - rule.low() * std::max(w, 0.0) -
                 rule.high() * std::min(w, 0.0);
        };
        double d = 0.0;
        topo.for_each(k, [&](std::size_t j, double w) { d += term(j, w); });
        const double s = safe_ratio(rk, signed_stab(d, kImplicitEpsilon));
        if (s == 0.0) break;
        topo.for_each(k, [&](std::size_t j, double w) { r_lower[j] += term(j, w) * s; });
        break;
      }
      case Kind::flat: {
        std::size_t fan_in = 0;
        topo.for_each(k, [&](std::size_t, double) { ++fan_in; });
        if (fan_in == 0) break;
        const double s = rk / static_cast<double>(fan_in);
        topo.for_each(k, [&](std::size_t j, double) { r_lower[j] += s; });
        break;
      }
    }
  }
  return r_lower;
}

inline void check_relevance_size(std::size_t got, std::size_t want, const char* op) {
  if (got != want) {
    throw DimensionError(std::string(op) + ": upper relevance has " + std::to_string(got) +
                         " entries, layer output has " + std::to_string(want));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear layers

/// Relevance through a dense layer z = x W + b under any rule. Bias
/// participates in denominators and receives no relevance.
inline RelTensor lrp_dense(const Tensor& x, const Tensor& weights, const Tensor* bias,
                           const RelTensor& r_upper, const Rule& rule) {
  dense_output_shape(x.shape(), weights.shape());
  detail::check_relevance_size(r_upper.size(), weights.dim(1), "lrp_dense");
  detail::DenseTopology topo{weights, bias};
  return RelTensor(x.shape(), detail::apply_rule(topo, x.values(), r_upper.values(), rule));
}

inline RelTensor lrp_linear_basic(const Tensor& x, const Tensor& w, const RelTensor& r_upper) {
  return lrp_dense(x, w, nullptr, r_upper, Rule::basic());
}

inline RelTensor lrp_linear_epsilon(const Tensor& x, const Tensor& w,
                                    const RelTensor& r_upper, double eps) {
  return lrp_dense(x, w, nullptr, r_upper, Rule::epsilon(eps));
}

inline RelTensor lrp_linear_alphabeta(const Tensor& x, const Tensor& w,
                                      const RelTensor& r_upper, double alpha, double beta) {
  return lrp_dense(x, w, nullptr, r_upper, Rule::alpha_beta(alpha, beta));
}

inline RelTensor lrp_input_zB(const Tensor& x, const Tensor& w, const RelTensor& r_upper,
                              double low = 0.0, double high = 1.0) {
  return lrp_dense(x, w, nullptr, r_upper, Rule::z_b(low, high));
}

struct ConvParams {
  const Tensor& kernels;
  const Tensor* bias = nullptr;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Each output position is treated as a linear unit over its receptive
/// field; zero padding contributes no connections.
inline RelTensor lrp_conv(const Tensor& x, const ConvParams& conv, const RelTensor& r_upper,
                          const Rule& rule) {
  const Shape out = conv2d_output_shape(x.shape(), conv.kernels.shape(), conv.stride,
                                        conv.padding);
  detail::check_relevance_size(r_upper.size(), shape_numel(out), "lrp_conv");
  detail::ConvTopology topo{conv.kernels, conv.bias, conv.stride, conv.padding,
                            x.shape(), out};
  return RelTensor(x.shape(), detail::apply_rule(topo, x.values(), r_upper.values(), rule));
}

/// Batchnorm kept as a standalone per-channel affine layer.
inline RelTensor lrp_channel_affine(const Tensor& x, const std::vector<double>& scale,
                                    const std::vector<double>& shift,
                                    const RelTensor& r_upper, const Rule& rule) {
  detail::check_relevance_size(r_upper.size(), x.size(), "lrp_channel_affine");
  detail::DiagonalTopology topo{scale, shift, x.size() / x.dim(0), x.size()};
  return RelTensor(x.shape(), detail::apply_rule(topo, x.values(), r_upper.values(), rule));
}

// ---------------------------------------------------------------------------
// Structural layers

/// ReLU passes relevance through unchanged.
inline RelTensor lrp_relu(const RelTensor& r_upper) { return r_upper; }

inline RelTensor lrp_flatten(const RelTensor& r_upper, const Shape& input_shape) {
  return r_upper.reshaped(input_shape);
}

/// Winner takes all: each window's relevance goes to its recorded argmax.
inline RelTensor lrp_maxpool(const RelTensor& r_upper, const ArgmaxIndices& argmax,
                             const Shape& input_shape) {
  detail::check_relevance_size(r_upper.size(), argmax.size(), "lrp_maxpool");
  RelTensor r_lower(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) r_lower[argmax[k]] += r_upper[k];
  return r_lower;
}

/// Each channel's relevance split in proportion to its activations.
inline RelTensor lrp_global_avgpool(const Tensor& x, const RelTensor& r_upper,
                                    const Rule& rule = Rule::basic()) {
  global_avgpool_output_shape(x.shape());
  detail::check_relevance_size(r_upper.size(), x.dim(0), "lrp_global_avgpool");
  detail::AvgPoolTopology topo{x.dim(0), x.dim(1) * x.dim(2)};
  return RelTensor(x.shape(), detail::apply_rule(topo, x.values(), r_upper.values(), rule));
}

/// Splits relevance at a sum junction in proportion to each branch's value.
inline std::pair<RelTensor, RelTensor> lrp_residual_add(const Tensor& x_main,
                                                        const Tensor& x_skip,
                                                        const RelTensor& r_upper,
                                                        const Rule& rule = Rule::basic()) {
  if (x_main.shape() != x_skip.shape()) {
    throw DimensionError("lrp_residual_add: branch shapes " + shape_str(x_main.shape()) +
                         " and " + shape_str(x_skip.shape()) + " differ");
  }
  const std::size_t n = x_main.size();
  detail::check_relevance_size(r_upper.size(), n, "lrp_residual_add");
  std::vector<float> joined(x_main.values().begin(), x_main.values().end());
  joined.insert(joined.end(), x_skip.values().begin(), x_skip.values().end());
  detail::SumTopology topo{n};
  auto r = detail::apply_rule(topo, std::span<const float>(joined), r_upper.values(), rule);
  std::vector<double> skip(r.begin() + static_cast<long>(n), r.end());
  r.resize(n);
  return {RelTensor(x_main.shape(), std::move(r)), RelTensor(x_skip.shape(), std::move(skip))};
}

}  // namespace auverify
