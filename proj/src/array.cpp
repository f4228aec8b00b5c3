#include "polytraj/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "polytraj/errors.hpp"

namespace polytraj::ad {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
std::size_t extent_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), values_(extent_product(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (extent_product(shape_) != values_.size()) {
    throw ShapeError("array shape " + to_string(shape_) + " does not hold " + std::to_string(values_.size()) +
                     " values");
  }
}

Array Array::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Array(Shape{n}, std::move(v));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Array(Shape{rows, cols}, std::move(v));
}

Array Array::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Array(Shape{r, c}, std::move(v));
}

std::size_t Array::rows() const {
  if (shape_.size() > 2) throw ShapeError("rank > 2 array " + to_string(shape_) + " has no 2-D view");
  return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Array::cols() const {
  if (shape_.size() > 2) throw ShapeError("rank > 2 array " + to_string(shape_) + " has no 2-D view");
  return shape_.empty() ? 1 : shape_.back();
}

double Array::item() const {
  if (values_.size() != 1) throw ShapeError("item() on array of shape " + to_string(shape_));
  return values_[0];
}

bool Array::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Array& Array::operator+=(const Array& other) {
  if (other.values_.size() != values_.size()) {
    throw ShapeError("cannot accumulate " + to_string(other.shape_) + " into " + to_string(shape_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

}  // namespace polytraj::ad
