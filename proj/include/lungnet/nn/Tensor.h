#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lungnet::nn {

using Shape = std::vector<std::size_t>;

/// Allocates on 64-byte boundaries. Vectorized Eigen reductions peel an
/// unaligned head whose length depends on the address, so results would
/// otherwise vary in the last bits from one allocation to the next.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) {
    ::operator delete(p, kAlign);
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shapeNumel(const Shape& shape);
std::string shapeToString(const Shape& shape);

/**
 * Dense row-major n-dimensional array of doubles with an optional gradient
 * buffer of identical shape.
 *
 * Invariant: numel(shape) == data().size(), and when a gradient is present
 * it has the same number of elements.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const {
    return shape_;
  }
  std::size_t rank() const {
    return shape_.size();
  }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const {
    return data_.size();
  }
  bool empty() const {
    return data_.empty();
  }

  std::span<double> data() {
    return data_;
  }
  std::span<const double> data() const {
    return data_;
  }
  const Buffer& values() const {
    return data_;
  }

  double& operator[](std::size_t i) {
    return data_[i];
  }
  double operator[](std::size_t i) const {
    return data_[i];
  }

  /// Multi-index access with bounds checking on every axis.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  /// Same data viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  void fill(double value);

  bool hasGrad() const {
    return grad_.has_value();
  }
  /// Gradient buffer; throws StateError when absent.
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Ensures a gradient buffer exists and resets it to zero.
  void zeroGrad();
  void clearGrad() {
    grad_.reset();
  }

  /// True when shapes and values are bit-identical (gradients ignored).
  bool sameValues(const Tensor& other) const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  Buffer data_;
  std::optional<Buffer> grad_;
};

} // namespace lungnet::nn
