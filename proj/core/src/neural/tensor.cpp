#include "stresskit/neural/tensor.hpp"

#include <numeric>

#include "stresskit/errors.hpp"

namespace stresskit {

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (const int d : t.shape) {
    if (d < 0) throw ShapeError("negative dimension in tensor shape");
    n *= static_cast<std::size_t>(d);
  }
  t.values.assign(n, 0.0);
  t.requires_grad = requires_grad;
  if (requires_grad) t.grad.assign(n, 0.0);
  return t;
}

void Tensor::ensure_grad() {
  requires_grad = true;
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (requires_grad) grad.assign(values.size(), 0.0);
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace stresskit
