#include "qmvit/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace qmvit {

long long numel_of(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor extent must be non-negative");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape_in) : shape(std::move(shape_in)) {
  data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (numel_of(shape) != static_cast<long long>(data.size()))
    throw std::invalid_argument("tensor data length does not match shape");
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape); }

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

}  // namespace qmvit
