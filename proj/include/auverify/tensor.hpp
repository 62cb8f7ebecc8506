#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "auverify/errors.hpp"

namespace auverify {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw DimensionError("tensor rank must be 1..4, got shape " +
                         shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           shape_str(shape));
    }
  }
}

/// Dense row-major tensor of rank 1 to 4.
///
/// `Tensor` (float) carries activations and weights; `RelTensor` (double) is
/// used for relevance while it is being propagated.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : shape_{1}, data_(1, T{}) {}

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
  }

  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor(Shape{values.size()}, std::vector<T>(values));
  }

  template <typename U>
  static BasicTensor cast(const BasicTensor<U>& other) {
    std::vector<T> data(other.data().begin(), other.data().end());
    return BasicTensor(other.shape(), std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  T& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  BasicTensor reshaped(Shape shape) const {
    return BasicTensor(std::move(shape), data_);
  }

  double sum() const {
    double acc = 0.0;
    for (const auto& v : data_) acc += static_cast<double>(v);
    return acc;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using RelTensor = BasicTensor<double>;

}  // namespace auverify
