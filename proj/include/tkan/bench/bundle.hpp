// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tkan/core/tensor.hpp"

namespace tkan {

/**
 * Self-describing tensor file.
 *
 *   bytes 0..7   magic "TKANBNDL"
 *   bytes 8..11  format version (uint32, little endian), currently 1
 *   bytes 12..19 manifest length L (uint64, little endian)
 *   next L bytes UTF-8 JSON manifest:
 *                {"meta": {...}, "tensors": [{"name", "shape", "offset"}, ...]}
 *   remainder    float64 little-endian payload; `offset` counts doubles
 */
struct TensorBundle {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& at(const std::string& name) const;
  /// Extra per-tensor manifest fields, keyed by tensor name.
  nlohmann::json tensor_meta = nlohmann::json::object();
};

void save_bundle(const TensorBundle& bundle, const std::filesystem::path& path);
TensorBundle load_bundle(const std::filesystem::path& path);

}  // namespace tkan
