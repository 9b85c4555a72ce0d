#pragma once

#include <string>
#include <vector>

namespace stresskit {

/// Dense row-major tensor with an optional gradient buffer of the same
/// shape. Doubles throughout: training is desk scale and the gradient
/// checks want the precision.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);

  std::size_t size() const { return values.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& at(int i) { return values[static_cast<std::size_t>(i)]; }
  double at(int i) const { return values[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return values[std::size_t(i) * dim(1) + j]; }
  double at(int i, int j) const { return values[std::size_t(i) * dim(1) + j]; }
  double& at(int i, int j, int k) { return values[(std::size_t(i) * dim(1) + j) * dim(2) + k]; }
  double at(int i, int j, int k) const {
    return values[(std::size_t(i) * dim(1) + j) * dim(2) + k];
  }

  void ensure_grad();
  void zero_grad();
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace stresskit
