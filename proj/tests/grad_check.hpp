#pragma once

// Central finite-difference gradient oracle shared by the unit and
// acceptance suites. The loss is a fixed random projection of the layer
// output, so every output element exercises the backward path.

#include <cmath>
#include <cstdint>
#include <vector>

#include "stresskit/neural/layers.hpp"
#include "stresskit/rng.hpp"

namespace testutil {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Check d(loss)/d(input) and d(loss)/d(params) of one layer against
/// central differences with the given epsilon.
inline GradCheckReport grad_check_layer(stresskit::Layer& layer, stresskit::Tensor input,
                                        std::uint64_t seed = 12345, double epsilon = 1e-4) {
  using stresskit::Tensor;
  stresskit::Rng rng(seed);

  Tensor out = layer.forward(input);
  std::vector<double> projection(out.size());
  for (auto& v : projection) v = rng.uniform(-1.0, 1.0);

  const auto loss_of = [&](const Tensor& x) {
    const Tensor y = layer.forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.values.size(); ++i) acc += y.values[i] * projection[i];
    return acc;
  };

  std::vector<stresskit::NamedParam> params;
  layer.collect_parameters("p", params);
  for (auto& p : params) {
    p.tensor->ensure_grad();
    p.tensor->zero_grad();
  }

  // analytic pass
  layer.forward(input);
  Tensor grad_seed = Tensor::zeros(out.shape);
  grad_seed.values = projection;
  const Tensor grad_in = layer.backward(grad_seed);

  GradCheckReport report;
  const auto check_value = [&](double analytic, double* slot) {
    const double keep = *slot;
    *slot = keep + epsilon;
    const double up = loss_of(input);
    *slot = keep - epsilon;
    const double down = loss_of(input);
    *slot = keep;
    const double fd = (up - down) / (2.0 * epsilon);
    report.max_rel_error = std::max(report.max_rel_error, rel_err(analytic, fd));
    ++report.checked;
  };

  for (std::size_t i = 0; i < input.values.size(); ++i)
    check_value(grad_in.values[i], &input.values[i]);
  for (auto& p : params)
    for (std::size_t i = 0; i < p.tensor->values.size(); ++i)
      check_value(p.tensor->grad[i], &p.tensor->values[i]);
  return report;
}

inline stresskit::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
  auto t = stresskit::Tensor::zeros(std::move(shape));
  stresskit::Rng rng(seed);
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

inline void randomize_params(stresskit::Layer& layer, std::uint64_t seed) {
  std::vector<stresskit::NamedParam> params;
  layer.collect_parameters("p", params);
  stresskit::Rng rng(seed);
  for (auto& p : params)
    for (auto& v : p.tensor->values) v = rng.uniform(-0.7, 0.7);
}

}  // namespace testutil
