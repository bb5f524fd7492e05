#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lamd/error.hpp"

namespace lamd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major array of doubles.
///
/// A rank-0 tensor (empty shape) holds one element and is used for scalar
/// losses. Tensors are plain values; gradient tracking lives on the Tape.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const {
    if (i >= shape_.size()) throw ShapeError("dimension index out of range");
    return shape_[i];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::vector<double>& vec() noexcept { return data_; }
  const std::vector<double>& vec() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  /// Same data viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Row `i` of a batch tensor (leading dimension), keeping the trailing shape
/// with a leading extent of 1.
inline Tensor batch_item(const Tensor& batch, std::size_t i) {
  if (batch.rank() == 0 || i >= batch.dim(0)) throw ShapeError("batch index out of range");
  Shape item_shape = batch.shape();
  item_shape[0] = 1;
  const std::size_t stride = batch.size() / batch.dim(0);
  std::vector<double> out(batch.data().begin() + static_cast<std::ptrdiff_t>(i * stride),
                          batch.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  return Tensor(std::move(item_shape), std::move(out));
}

/// Gathers the listed rows of a batch tensor into a new batch.
inline Tensor gather_rows(const Tensor& batch, std::span<const std::size_t> rows) {
  if (batch.rank() == 0) throw ShapeError("gather_rows on scalar");
  Shape out_shape = batch.shape();
  out_shape[0] = rows.size();
  const std::size_t stride = batch.size() / batch.dim(0);
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= batch.dim(0)) throw ShapeError("gather_rows index out of range");
    std::copy_n(batch.ptr() + rows[r] * stride, stride, out.ptr() + r * stride);
  }
  return out;
}

/// Stacks equally shaped tensors whose leading extent is 1 into one batch.
inline Tensor stack_rows(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack_rows of empty list");
  Shape out_shape = items.front().shape();
  if (out_shape.empty() || out_shape[0] != 1) throw ShapeError("stack_rows expects leading extent 1");
  out_shape[0] = items.size();
  Tensor out(out_shape);
  const std::size_t stride = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != items.front().shape()) throw ShapeError("stack_rows shape mismatch");
    std::copy_n(items[i].ptr(), stride, out.ptr() + i * stride);
  }
  return out;
}

inline double mean_squared_difference(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("mean_squared_difference size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace lamd
