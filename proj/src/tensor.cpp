#include "terradeep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "terradeep/error.hpp"

namespace terradeep {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " holds " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::stride0() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return values_.size() / shape_[0];
}

std::span<const double> Tensor::slice0(std::size_t i) const {
  const std::size_t s = stride0();
  return {values_.data() + i * s, s};
}

std::span<double> Tensor::slice0(std::size_t i) {
  const std::size_t s = stride0();
  return {values_.data() + i * s, s};
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> rows) {
  if (source.rank() == 0) throw ShapeError("gather_rows on a rank-0 tensor");
  Shape shape = source.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  const std::size_t stride = source.stride0();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= source.dim(0)) throw ShapeError("gather_rows index out of range");
    std::memcpy(out.data() + r * stride, source.data() + rows[r] * stride, stride * sizeof(double));
  }
  return out;
}

}  // namespace terradeep
