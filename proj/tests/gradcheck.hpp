#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fontparts/deepsets.hpp"

namespace testing {

/// Random unit-norm columns.
inline Eigen::MatrixXd random_descriptors(int n, fontparts::Rng& rng) {
  Eigen::MatrixXd x(fontparts::deepsets::kInputDim, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < x.rows(); ++i) x(i, j) = std::abs(fontparts::standard_normal(rng));
    x.col(j).normalize();
  }
  return x;
}

struct GradCheck {
  int sampled = 0;
  double max_rel_error = 0;
};

/// Central differences (64-bit) on `samples` randomly chosen parameters, compared with backward().
inline GradCheck finite_difference_check(const fontparts::deepsets::MlpParams& params,
                                         std::span<const fontparts::deepsets::BatchItem> batch, int samples,
                                         std::uint64_t seed, double eps = 1e-5) {
  using namespace fontparts;
  const auto analytic = deepsets::backward(params, batch);
  Rng rng(seed);
  GradCheck out;
  std::size_t total = params.parameter_count();
  for (int s = 0; s < samples; ++s) {
    std::size_t pick = uniform_index(rng, total);
    int layer = 0;
    for (; layer < deepsets::kLayerCount; ++layer) {
      const auto& l = params.layer(layer);
      const auto n = static_cast<std::size_t>(l.weight.size() + l.bias.size());
      if (pick < n) break;
      pick -= n;
    }
    auto perturbed = params;
    auto& l = perturbed.layer(layer);
    const auto& g = analytic.gradient.layer(layer);
    double* slot;
    double grad;
    if (pick < static_cast<std::size_t>(l.weight.size())) {
      slot = l.weight.data() + pick;
      grad = g.weight.data()[pick];
    } else {
      slot = l.bias.data() + (pick - l.weight.size());
      grad = g.bias.data()[pick - l.weight.size()];
    }
    const double orig = *slot;
    *slot = orig + eps;
    const double up = deepsets::batch_loss(perturbed, batch);
    *slot = orig - eps;
    const double down = deepsets::batch_loss(perturbed, batch);
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(grad), 1e-7});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - grad) / denom);
    ++out.sampled;
  }
  return out;
}

}  // namespace testing
