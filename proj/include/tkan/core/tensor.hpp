// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tkan {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

/**
 * Dense row-major array of doubles.
 *
 * The buffer is immutable and shared between copies, so copying a Tensor is
 * cheap. A tensor produced while any operand was attached to a Tape is itself
 * attached: it remembers the tape and the node that produced it. The tape
 * must outlive every tensor attached to it.
 */
class Tensor {
 public:
  /// Rank-0 tensor holding 0.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  /// Shares an existing buffer; the caller guarantees finite values.
  static Tensor adopt(Shape shape, std::shared_ptr<const std::vector<double>> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_->size(); }

  std::span<const double> values() const& noexcept { return *data_; }
  /// Owning copy, so `for (double v : f().values())` stays valid.
  std::vector<double> values() const&& { return *data_; }
  const double* data() const noexcept { return data_->data(); }
  double operator[](std::size_t flat) const { return (*data_)[flat]; }
  /// Element of a rank-2 tensor.
  double at(std::size_t row, std::size_t col) const;
  /// Element of a rank-3 tensor.
  double at(std::size_t i, std::size_t j, std::size_t k) const;
  /// Value of a single-element tensor.
  double item() const;

  bool attached() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  std::size_t node() const noexcept { return node_; }
  /// Same values, no tape link.
  Tensor detached() const;

  const std::shared_ptr<const std::vector<double>>& buffer() const noexcept {
    return data_;
  }

  bool same_values(const Tensor& other) const;

 private:
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;

  friend class Tape;
};

}  // namespace tkan
