#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "hsd/tensor.hpp"

namespace hsd {

// On-disk layout: a directory holding manifest.json and tensors.bin.
//
//   manifest.json = {
//     "format": "hsd-tensor-archive", "version": 1,
//     "data_file": "tensors.bin",
//     "meta": { ... caller metadata ... },
//     "tensors": { name: {"shape": [...], "dtype": "float32"|"float64", "offset": bytes} }
//   }
//
// Values are little-endian IEEE floats stored back to back at their offsets.
inline constexpr int kArchiveVersion = 1;
inline constexpr const char* kArchiveFormat = "hsd-tensor-archive";

enum class StorageType { kFloat32, kFloat64 };

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  ParameterSet tensors;
};

void write_archive(const std::filesystem::path& dir, const Archive& archive,
                   StorageType dtype = StorageType::kFloat64);

// Throws IoFailure when unreadable, VersionMismatch on a foreign format version,
// MissingTensor when a tensor's bytes are not fully present in the data file.
Archive read_archive(const std::filesystem::path& dir);

// Fetches a tensor and checks its shape.
const Tensor& require_tensor(const ParameterSet& tensors, const std::string& name,
                             const std::vector<std::size_t>& shape);

}  // namespace hsd
