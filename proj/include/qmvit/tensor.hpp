#pragma once

#include <string>
#include <vector>

namespace qmvit {

// Dense row-major real tensor. data.size() always equals the product of the
// extents in shape; a rank-0 tensor holds one scalar.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_in);
  Tensor(std::vector<int> shape_in, std::vector<double> data_in);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t);

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int numel() const { return static_cast<int>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;

  double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

  // unchecked row-major accessors for ranks 2..4
  double& at(int i, int j) { return data[static_cast<std::size_t>(i * dim(1) + j)]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i * dim(1) + j)]; }
  double& at(int i, int j, int k) {
    return data[static_cast<std::size_t>((i * dim(1) + j) * dim(2) + k)];
  }
  double at(int i, int j, int k) const {
    return data[static_cast<std::size_t>((i * dim(1) + j) * dim(2) + k)];
  }
  double& at(int i, int j, int k, int l) {
    return data[static_cast<std::size_t>(((i * dim(1) + j) * dim(2) + k) * dim(3) + l)];
  }
  double at(int i, int j, int k, int l) const {
    return data[static_cast<std::size_t>(((i * dim(1) + j) * dim(2) + k) * dim(3) + l)];
  }
};

long long numel_of(const std::vector<int>& shape);

}  // namespace qmvit
