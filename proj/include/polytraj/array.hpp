#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace polytraj::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 is a scalar holding one value.
/// Operations in this library accept rank <= 2; rank-1 arrays behave as a
/// single row and scalars as 1x1 when broadcasting.
class Array {
 public:
  Array() : values_(1, 0.0) {}
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> values);

  static Array scalar(double v) { return Array(Shape{}, std::vector<double>{v}); }
  static Array vector(std::vector<double> v);
  static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Array matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Array zeros_like(const Array& other) { return Array(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }

  /// Extents of the 2-D view used by broadcasting: rank 1 [n] -> 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double item() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool all_finite() const;
  void fill(double v);
  Array& operator+=(const Array& other);

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace polytraj::ad
