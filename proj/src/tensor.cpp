#include "hsd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace hsd {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims) : shape(std::move(dims)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        std::multiplies<>());
  data.assign(n, 0.0);
}

MatrixMap Tensor::matrix() {
  const auto rows = shape.empty() ? std::size_t{1} : shape[0];
  const auto cols = rows == 0 ? std::size_t{0} : data.size() / rows;
  return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

ConstMatrixMap Tensor::matrix() const {
  const auto rows = shape.empty() ? std::size_t{1} : shape[0];
  const auto cols = rows == 0 ? std::size_t{0} : data.size() / rows;
  return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

void Tensor::set_zero() { std::fill(data.begin(), data.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  for (const auto& [name, t] : params) out.emplace(name, Tensor(t.shape));
  return out;
}

std::uint64_t checksum(const ParameterSet& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : params) {
    fnv_bytes(h, name.data(), name.size());
    for (auto d : t.shape) {
      const auto v = static_cast<std::uint64_t>(d);
      fnv_bytes(h, &v, sizeof v);
    }
    fnv_bytes(h, t.data.data(), t.data.size() * sizeof(double));
  }
  return h;
}

std::uint64_t checksum(const std::vector<double>& values) {
  std::uint64_t h = kFnvOffset;
  fnv_bytes(h, values.data(), values.size() * sizeof(double));
  return h;
}

}  // namespace hsd
