#include "lungnet/nn/Tensor.h"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::nn {

std::size_t shapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

std::string shapeToString(const Shape& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    ss << (i ? "," : "") << shape[i];
  }
  ss << ']';
  return ss.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shapeNumel(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) {
      throw DimensionError("tensor dims must be positive: " + shapeToString(shape_));
    }
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (shapeNumel(shape_) != data_.size()) {
    throw DimensionError(
        "shape " + shapeToString(shape_) + " does not match " +
        std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError(
        "axis " + std::to_string(axis) + " out of range for " + shapeToString(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw DimensionError("index rank mismatch for " + shapeToString(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) {
      throw DimensionError("index out of range for " + shapeToString(shape_));
    }
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shapeNumel(shape) != data_.size()) {
    throw DimensionError("reshape to " + shapeToString(shape) + " needs " +
                         std::to_string(shapeNumel(shape)) + " values, tensor has " +
                         std::to_string(data_.size()));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

std::span<double> Tensor::grad() {
  if (!grad_) {
    throw StateError("tensor has no gradient");
  }
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) {
    throw StateError("tensor has no gradient");
  }
  return *grad_;
}

void Tensor::zeroGrad() {
  if (!grad_) {
    grad_.emplace(data_.size(), 0.0);
  } else {
    std::fill(grad_->begin(), grad_->end(), 0.0);
  }
}

bool Tensor::sameValues(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
      (data_.empty() ||
       std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

} // namespace lungnet::nn
