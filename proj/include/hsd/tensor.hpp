#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hsd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  // Rank-2 view: first dimension as rows, remaining dimensions flattened.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;
  VectorMap vector() { return {data.data(), static_cast<Eigen::Index>(data.size())}; }
  ConstVectorMap vector() const {
    return {data.data(), static_cast<Eigen::Index>(data.size())};
  }

  void set_zero();
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Named tensors with deterministic (sorted) iteration order.
using ParameterSet = std::map<std::string, Tensor>;

std::size_t parameter_count(const ParameterSet& params);

// Same names and shapes, all zeros.
ParameterSet zeros_like(const ParameterSet& params);

// FNV-1a over names, shapes and raw value bytes.
std::uint64_t checksum(const ParameterSet& params);
std::uint64_t checksum(const std::vector<double>& values);

}  // namespace hsd
