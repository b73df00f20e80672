// SPDX-License-Identifier: Apache-2.0
#include "tkan/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "tkan/core/errors.hpp"

namespace tkan {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_finite(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw std::domain_error("tensor value at flat index " + std::to_string(i) +
                              " is not finite");
    }
  }
}

}  // namespace

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_size(shape_) != values.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(values.size()));
  }
  check_finite(values);
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor::Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::adopt(Shape shape, std::shared_ptr<const std::vector<double>> values) {
  if (shape_size(shape) != values->size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values->size()));
  }
  return Tensor(std::move(shape), std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return (*data_)[row * shape_.at(1) + col];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return (*data_)[(i * shape_.at(1) + j) * shape_.at(2) + k];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::detached() const { return Tensor(shape_, data_); }

bool Tensor::same_values(const Tensor& other) const {
  return shape_ == other.shape_ && size() == other.size() &&
         std::memcmp(data(), other.data(), size() * sizeof(double)) == 0;
}

}  // namespace tkan
