// SPDX-License-Identifier: Apache-2.0
#include "tkan/bench/bundle.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "tkan/core/errors.hpp"

namespace tkan {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'K', 'A', 'N', 'B', 'N', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "bundle I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw CheckpointError(what + ": truncated header");
  }
  return value;
}

}  // namespace

const Tensor& TensorBundle::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw CheckpointError("bundle has no tensor named '" + name + "'");
}

void save_bundle(const TensorBundle& bundle, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["meta"] = bundle.meta;
  manifest["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : bundle.tensors) {
    nlohmann::json entry{{"name", name}, {"shape", t.shape()}, {"offset", offset}};
    if (bundle.tensor_meta.contains(name)) entry["meta"] = bundle.tensor_meta.at(name);
    manifest["tensors"].push_back(std::move(entry));
    offset += t.size();
  }
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : bundle.tensors) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

TensorBundle load_bundle(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(where + ": cannot open file");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError(where + ": not a tensor bundle (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, where);
  if (version != kVersion) {
    throw CheckpointError(where + ": unsupported bundle version " + std::to_string(version));
  }
  const auto length = read_pod<std::uint64_t>(in, where);
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw CheckpointError(where + ": truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": corrupt manifest: " + e.what());
  }

  const auto payload_begin = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<std::size_t>(in.tellg() - payload_begin);
  in.seekg(payload_begin);
  std::vector<double> payload(payload_bytes / sizeof(double));
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));

  TensorBundle bundle;
  try {
    bundle.meta = manifest.at("meta");
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = shape_size(shape);
      if (offset + count > payload.size()) {
        throw CheckpointError(where + ": tensor '" + name + "' extends past the end of the file");
      }
      bundle.tensors.emplace_back(
          name, Tensor(shape, std::vector<double>(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                                                  payload.begin() + static_cast<std::ptrdiff_t>(offset + count))));
      if (entry.contains("meta")) bundle.tensor_meta[name] = entry["meta"];
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": malformed manifest: " + e.what());
  } catch (const std::domain_error& e) {
    throw CheckpointError(where + ": " + e.what());
  }
  return bundle;
}

}  // namespace tkan
