#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nutricast/core/error.hpp"

namespace nutricast {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) oss << (i ? "x" : "") << shape[i];
  oss << ']';
  return oss.str();
}

/// Dense row-major array. Rank 1 tensors of length n behave as 1 x n
/// matrices wherever a matrix view is needed.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_dims();
    values_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_dims();
    if (values_.size() != shape_size(shape_)) {
      throw DimensionError("tensor of shape " + shape_string(shape_) + " given " +
                           std::to_string(values_.size()) + " values");
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T{}) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : (shape_.empty() ? 0 : 1); }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 0;
    return shape_.size() >= 2 ? values_.size() / shape_[0] : shape_[0];
  }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }
  T& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols() + c]; }

  std::span<T> row(std::size_t r) noexcept { return {values_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const noexcept { return {values_.data() + r * cols(), cols()}; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

 private:
  void check_dims() const {
    for (auto d : shape_) {
      if (d == 0) throw DimensionError("tensor dims must be positive, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> values_;
};

}  // namespace nutricast
