#pragma once

#include <cstdint>
#include <vector>

#include "esmer/matrix.hpp"

namespace esmer {

// Architecture of a dense rectified-linear network: input -> hidden... -> logits.
// hidden_dims may be empty, which yields a single linear layer.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;

  void validate() const;
  int num_layers() const { return static_cast<int>(hidden_dims.size()) + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;
  std::int64_t param_count() const;
};

// One dense layer: weights are (input_dim x output_dim), bias is (output_dim).
struct LayerParams {
  Matrix weights;
  std::vector<double> bias;
};

// Full parameter set of one network. Two instances of this type carry the
// working and the stable model.
struct ParamSet {
  std::vector<LayerParams> layers;

  bool shape_matches(const ParamSet& other) const;
  bool all_finite() const;
};

// Gradient carrier, shape-congruent with a ParamSet.
struct Gradients {
  std::vector<LayerParams> layers;
};

// A labeled minibatch: features are (batch_size x input_dim).
struct Batch {
  Matrix features;
  std::vector<int> labels;

  int size() const { return features.rows(); }
};

// Cached intermediate values of one forward pass, consumed by the backward
// passes. pre_activations.back() holds the logits (no activation on the
// output layer); activations[0] is the input batch.
struct ForwardTrace {
  std::vector<Matrix> activations;      // num_layers entries: inputs to each layer
  std::vector<Matrix> pre_activations;  // num_layers entries

  const Matrix& logits() const { return pre_activations.back(); }
};

// He-initialized parameters: weights ~ N(0, 2/fan_in), biases zero.
// Deterministic for a given (spec, seed).
ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed);

// Forward pass. Throws InvalidInput on a feature-width mismatch.
ForwardTrace forward(const ParamSet& params, const Batch& batch);

// Per-sample cross-entropy, -log softmax(logits_i)[labels_i], computed with
// max subtraction. Entries are clamped at 0 against rounding.
std::vector<double> per_sample_ce(const Matrix& logits, const std::vector<int>& labels);

// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

// Gradient of (1/batch) * sum_i weights[i] * ce_i with respect to params.
// The weights are treated as constants.
Gradients backward_weighted_ce(const ParamSet& params, const ForwardTrace& trace,
                               const std::vector<int>& labels,
                               const std::vector<double>& weights);

// Gradient of scale * mean((logits - target)^2) over batch x classes.
// Targets are constants.
Gradients backward_mse_logits(const ParamSet& params, const ForwardTrace& trace,
                              const Matrix& target_logits, double scale);

// dst += factor * src, elementwise.
void add_scaled(Gradients& dst, const Gradients& src, double factor);

// params - lr * grads. Throws NumericFault naming the layer on a non-finite
// gradient entry.
ParamSet sgd_step(const ParamSet& params, const Gradients& grads, double lr);

// alpha * stable + (1 - alpha) * working, elementwise. alpha must lie in (0, 1).
ParamSet ema_update(const ParamSet& stable, const ParamSet& working, double alpha);

// Largest absolute elementwise difference between two shape-congruent sets.
double max_abs_gap(const ParamSet& a, const ParamSet& b);

bool bitwise_equal(const ParamSet& a, const ParamSet& b);

// Compares both analytic backward passes against central finite differences
// (eps = 1e-5) over every parameter of a small random instance; returns the
// worst relative error. Deterministic for a given seed.
double grad_check(const NetworkSpec& spec, std::uint64_t seed);

}  // namespace esmer
