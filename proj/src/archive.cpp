#include "hsd/archive.hpp"

#include <fstream>

#include "hsd/error.hpp"

namespace hsd {

namespace fs = std::filesystem;
using nlohmann::json;

void write_archive(const fs::path& dir, const Archive& archive, StorageType dtype) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::ofstream data(dir / "tensors.bin", std::ios::binary | std::ios::trunc);
  if (!data) throw Error(ErrorCode::kIoFailure, "cannot write " + (dir / "tensors.bin").string());

  json tensors = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    json entry;
    entry["shape"] = t.shape;
    entry["offset"] = offset;
    if (dtype == StorageType::kFloat32) {
      entry["dtype"] = "float32";
      std::vector<float> buf(t.data.begin(), t.data.end());
      data.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
      offset += buf.size() * sizeof(float);
    } else {
      entry["dtype"] = "float64";
      data.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
      offset += t.data.size() * sizeof(double);
    }
    tensors[name] = std::move(entry);
  }
  if (!data) throw Error(ErrorCode::kIoFailure, "short write to " + (dir / "tensors.bin").string());

  json manifest;
  manifest["format"] = kArchiveFormat;
  manifest["version"] = kArchiveVersion;
  manifest["data_file"] = "tensors.bin";
  manifest["meta"] = archive.meta;
  manifest["tensors"] = std::move(tensors);

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Archive read_archive(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read " + (dir / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoFailure, "corrupt manifest " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", std::string{}) != kArchiveFormat) {
    throw Error(ErrorCode::kVersionMismatch, "not a tensor archive: " + dir.string());
  }
  const int version = manifest.value("version", -1);
  if (version != kArchiveVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "archive version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kArchiveVersion) + ")");
  }

  const fs::path data_path = dir / manifest.value("data_file", std::string{"tensors.bin"});
  std::ifstream data(data_path, std::ios::binary);
  if (!data) throw Error(ErrorCode::kIoFailure, "cannot read " + data_path.string());
  const auto file_size = static_cast<std::uint64_t>(fs::file_size(data_path));

  Archive archive;
  archive.meta = manifest.value("meta", json::object());
  for (const auto& [name, entry] : manifest.at("tensors").items()) {
    Tensor t(entry.at("shape").get<std::vector<std::size_t>>());
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto dtype = entry.at("dtype").get<std::string>();
    std::size_t width;
    if (dtype == "float32") {
      width = sizeof(float);
    } else if (dtype == "float64") {
      width = sizeof(double);
    } else {
      throw Error(ErrorCode::kShapeMismatch, "tensor " + name + " has unsupported dtype " + dtype);
    }
    const std::uint64_t bytes = t.numel() * width;
    if (offset + bytes > file_size) {
      throw Error(ErrorCode::kMissingTensor, "tensor " + name + " is truncated in " +
                                                 data_path.string());
    }
    data.seekg(static_cast<std::streamoff>(offset));
    if (width == sizeof(float)) {
      std::vector<float> buf(t.numel());
      data.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
      std::copy(buf.begin(), buf.end(), t.data.begin());
    } else {
      data.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(bytes));
    }
    if (!data) throw Error(ErrorCode::kMissingTensor, "cannot read tensor " + name);
    archive.tensors.emplace(name, std::move(t));
  }
  return archive;
}

const Tensor& require_tensor(const ParameterSet& tensors, const std::string& name,
                             const std::vector<std::size_t>& shape) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorCode::kMissingTensor, "missing tensor " + name);
  if (it->second.shape != shape) {
    throw Error(ErrorCode::kShapeMismatch, "tensor " + name + " has shape " +
                                               shape_string(it->second.shape) + ", expected " +
                                               shape_string(shape));
  }
  return it->second;
}

}  // namespace hsd
