// Test-side reference implementations, kept independent of the library code
// paths they are used to check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "esmer/network.hpp"

namespace oracles {

// Plain per-sample loops, no shared matmul kernel.
inline std::vector<std::vector<double>> naive_forward(const esmer::ParamSet& params,
                                                      const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> current = rows;
  const int num_layers = static_cast<int>(params.layers.size());
  for (int l = 0; l < num_layers; ++l) {
    const auto& layer = params.layers[l];
    std::vector<std::vector<double>> next(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) {
      next[i].assign(layer.bias.begin(), layer.bias.end());
      for (int k = 0; k < layer.weights.rows(); ++k) {
        for (int j = 0; j < layer.weights.cols(); ++j) {
          next[i][j] += current[i][k] * layer.weights(k, j);
        }
      }
      if (l + 1 < num_layers) {
        for (double& v : next[i]) {
          if (v < 0.0) v = 0.0;
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

// Cross entropy in extended precision, max-subtracted.
inline double high_precision_ce(const std::vector<double>& logits, int label) {
  long double m = logits[0];
  for (double v : logits) m = std::max<long double>(m, v);
  long double sum = 0.0L;
  for (double v : logits) sum += std::exp(static_cast<long double>(v) - m);
  const long double loss = std::log(sum) - (static_cast<long double>(logits[label]) - m);
  return static_cast<double>(loss);
}

// Central finite differences of an arbitrary scalar loss over every
// parameter; returns the worst relative error against the analytic gradient.
inline double fd_worst_error(esmer::ParamSet& params, const esmer::Gradients& analytic,
                             const std::function<double(const esmer::ParamSet&)>& loss,
                             double eps = 1e-5) {
  double worst = 0.0;
  auto probe = [&](double& p, double g) {
    const double saved = p;
    p = saved + eps;
    const double up = loss(params);
    p = saved - eps;
    const double down = loss(params);
    p = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(g), std::abs(numeric)});
    worst = std::max(worst, std::abs(g - numeric) / denom);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i) {
      probe(params.layers[l].weights.data()[i], analytic.layers[l].weights.data()[i]);
    }
    for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i) {
      probe(params.layers[l].bias[i], analytic.layers[l].bias[i]);
    }
  }
  return worst;
}

}  // namespace oracles
