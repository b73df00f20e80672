// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tkan {

/// Operand extents do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A moving-median window evaluated to a nonpositive value.
class DegenerateWindowError : public std::domain_error {
 public:
  DegenerateWindowError(const std::string& what, std::size_t index)
      : std::domain_error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A metric is undefined for the given data (e.g. R² on constant truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Checkpoint or tensor-bundle file is missing, corrupt, or incompatible.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Market-data download failed after all retries.
class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tkan
