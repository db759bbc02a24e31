#include "esmer/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esmer/errors.hpp"
#include "esmer/rng.hpp"

namespace esmer {

void NetworkSpec::validate() const {
  if (input_dim < 1) {
    throw InvalidInput("NetworkSpec: input_dim must be >= 1");
  }
  for (int h : hidden_dims) {
    if (h < 1) {
      throw InvalidInput("NetworkSpec: hidden dimensions must be >= 1");
    }
  }
  if (num_classes < 2) {
    throw InvalidInput("NetworkSpec: num_classes must be >= 2");
  }
}

int NetworkSpec::layer_input_dim(int layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int NetworkSpec::layer_output_dim(int layer) const {
  return layer == static_cast<int>(hidden_dims.size()) ? num_classes : hidden_dims[layer];
}

std::int64_t NetworkSpec::param_count() const {
  std::int64_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<std::int64_t>(layer_input_dim(l)) * layer_output_dim(l) + layer_output_dim(l);
  }
  return n;
}

bool ParamSet::shape_matches(const ParamSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weights.rows() != other.layers[l].weights.rows() ||
        layers[l].weights.cols() != other.layers[l].weights.cols() ||
        layers[l].bias.size() != other.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& layer : layers) {
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      if (!std::isfinite(layer.weights.data()[i])) return false;
    }
    for (double b : layer.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  SplitMix64 rng(seed);
  ParamSet params;
  params.layers.resize(spec.num_layers());
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int in = spec.layer_input_dim(l);
    const int out = spec.layer_output_dim(l);
    const double scale = std::sqrt(2.0 / in);
    LayerParams& layer = params.layers[l];
    layer.weights = Matrix(in, out);
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = scale * rng.next_gaussian();
    }
    layer.bias.assign(out, 0.0);
  }
  return params;
}

ForwardTrace forward(const ParamSet& params, const Batch& batch) {
  if (params.layers.empty()) {
    throw InvalidInput("forward: empty parameter set");
  }
  if (batch.features.cols() != params.layers.front().weights.rows()) {
    throw InvalidInput("forward: feature width " + std::to_string(batch.features.cols()) +
                       " does not match network input dim " +
                       std::to_string(params.layers.front().weights.rows()));
  }
  ForwardTrace trace;
  const int num_layers = static_cast<int>(params.layers.size());
  trace.activations.reserve(num_layers);
  trace.pre_activations.reserve(num_layers);
  Matrix x = batch.features;
  for (int l = 0; l < num_layers; ++l) {
    trace.activations.push_back(x);
    Matrix z = matmul(x, params.layers[l].weights);
    const auto& bias = params.layers[l].bias;
    for (int r = 0; r < z.rows(); ++r) {
      double* row = z.row(r);
      for (int c = 0; c < z.cols(); ++c) {
        row[c] += bias[c];
      }
    }
    if (l + 1 < num_layers) {
      x = z;
      for (std::size_t i = 0; i < x.size(); ++i) {
        x.data()[i] = std::max(0.0, x.data()[i]);
      }
    }
    trace.pre_activations.push_back(std::move(z));
  }
  return trace;
}

std::vector<double> per_sample_ce(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows()) {
    throw InvalidInput("per_sample_ce: labels length does not match logits rows");
  }
  std::vector<double> losses(labels.size());
  for (int i = 0; i < logits.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols()) {
      throw InvalidInput("per_sample_ce: label " + std::to_string(labels[i]) +
                         " out of range [0, " + std::to_string(logits.cols()) + ")");
    }
    const double* row = logits.row(i);
    double m = row[0];
    for (int c = 1; c < logits.cols(); ++c) {
      m = std::max(m, row[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < logits.cols(); ++c) {
      sum += std::exp(row[c] - m);
    }
    losses[i] = std::max(0.0, std::log(sum) - (row[labels[i]] - m));
  }
  return losses;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row(i);
    double* prow = probs.row(i);
    double m = row[0];
    for (int c = 1; c < logits.cols(); ++c) {
      m = std::max(m, row[c]);
    }
    double sum = 0.0;
    for (int c = 0; c < logits.cols(); ++c) {
      prow[c] = std::exp(row[c] - m);
      sum += prow[c];
    }
    for (int c = 0; c < logits.cols(); ++c) {
      prow[c] /= sum;
    }
  }
  return probs;
}

namespace {

// Shared backward walk from d(loss)/d(logits) to parameter gradients.
Gradients backprop_from_dlogits(const ParamSet& params, const ForwardTrace& trace, Matrix dz) {
  const int num_layers = static_cast<int>(params.layers.size());
  Gradients grads;
  grads.layers.resize(num_layers);
  for (int l = num_layers - 1; l >= 0; --l) {
    grads.layers[l].weights = matmul_tn(trace.activations[l], dz);
    grads.layers[l].bias.assign(params.layers[l].bias.size(), 0.0);
    for (int r = 0; r < dz.rows(); ++r) {
      const double* row = dz.row(r);
      for (int c = 0; c < dz.cols(); ++c) {
        grads.layers[l].bias[c] += row[c];
      }
    }
    if (l > 0) {
      Matrix dx = matmul_nt(dz, params.layers[l].weights);
      const Matrix& pre = trace.pre_activations[l - 1];
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (pre.data()[i] <= 0.0) {
          dx.data()[i] = 0.0;
        }
      }
      dz = std::move(dx);
    }
  }
  return grads;
}

}  // namespace

Gradients backward_weighted_ce(const ParamSet& params, const ForwardTrace& trace,
                               const std::vector<int>& labels,
                               const std::vector<double>& weights) {
  const Matrix& logits = trace.logits();
  if (static_cast<int>(weights.size()) != logits.rows()) {
    throw InvalidInput("backward_weighted_ce: weights length does not match batch size");
  }
  for (double w : weights) {
    if (w < 0.0) {
      throw InvalidInput("backward_weighted_ce: negative sample weight");
    }
  }
  if (static_cast<int>(labels.size()) != logits.rows()) {
    throw InvalidInput("backward_weighted_ce: labels length does not match batch size");
  }
  const double inv_batch = 1.0 / logits.rows();
  Matrix dz = softmax_rows(logits);
  for (int i = 0; i < dz.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= dz.cols()) {
      throw InvalidInput("backward_weighted_ce: label out of range");
    }
    double* row = dz.row(i);
    row[labels[i]] -= 1.0;
    const double f = weights[i] * inv_batch;
    for (int c = 0; c < dz.cols(); ++c) {
      row[c] *= f;
    }
  }
  return backprop_from_dlogits(params, trace, std::move(dz));
}

Gradients backward_mse_logits(const ParamSet& params, const ForwardTrace& trace,
                              const Matrix& target_logits, double scale) {
  const Matrix& logits = trace.logits();
  if (target_logits.rows() != logits.rows() || target_logits.cols() != logits.cols()) {
    throw InvalidInput("backward_mse_logits: target shape does not match logits shape");
  }
  if (scale < 0.0) {
    throw InvalidInput("backward_mse_logits: scale must be nonnegative");
  }
  const double f = 2.0 * scale / (static_cast<double>(logits.rows()) * logits.cols());
  Matrix dz(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz.data()[i] = f * (logits.data()[i] - target_logits.data()[i]);
  }
  return backprop_from_dlogits(params, trace, std::move(dz));
}

void add_scaled(Gradients& dst, const Gradients& src, double factor) {
  if (dst.layers.size() != src.layers.size()) {
    throw InvalidInput("add_scaled: layer counts disagree");
  }
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    for (std::size_t i = 0; i < dst.layers[l].weights.size(); ++i) {
      dst.layers[l].weights.data()[i] += factor * src.layers[l].weights.data()[i];
    }
    for (std::size_t i = 0; i < dst.layers[l].bias.size(); ++i) {
      dst.layers[l].bias[i] += factor * src.layers[l].bias[i];
    }
  }
}

ParamSet sgd_step(const ParamSet& params, const Gradients& grads, double lr) {
  if (params.layers.size() != grads.layers.size()) {
    throw InvalidInput("sgd_step: layer counts disagree");
  }
  ParamSet out = params;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    auto check = [&](double g) {
      if (!std::isfinite(g)) {
        throw NumericFault("sgd_step: non-finite gradient in layer " + std::to_string(l));
      }
    };
    if (grads.layers[l].weights.rows() != out.layers[l].weights.rows() ||
        grads.layers[l].weights.cols() != out.layers[l].weights.cols() ||
        grads.layers[l].bias.size() != out.layers[l].bias.size()) {
      throw InvalidInput("sgd_step: gradient shape does not match layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < out.layers[l].weights.size(); ++i) {
      const double g = grads.layers[l].weights.data()[i];
      check(g);
      out.layers[l].weights.data()[i] -= lr * g;
    }
    for (std::size_t i = 0; i < out.layers[l].bias.size(); ++i) {
      const double g = grads.layers[l].bias[i];
      check(g);
      out.layers[l].bias[i] -= lr * g;
    }
  }
  return out;
}

ParamSet ema_update(const ParamSet& stable, const ParamSet& working, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidInput("ema_update: alpha must lie in (0, 1)");
  }
  if (!stable.shape_matches(working)) {
    throw InvalidInput("ema_update: parameter shapes disagree");
  }
  ParamSet out = stable;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    for (std::size_t i = 0; i < out.layers[l].weights.size(); ++i) {
      out.layers[l].weights.data()[i] =
          alpha * stable.layers[l].weights.data()[i] + (1.0 - alpha) * working.layers[l].weights.data()[i];
    }
    for (std::size_t i = 0; i < out.layers[l].bias.size(); ++i) {
      out.layers[l].bias[i] = alpha * stable.layers[l].bias[i] + (1.0 - alpha) * working.layers[l].bias[i];
    }
  }
  return out;
}

double max_abs_gap(const ParamSet& a, const ParamSet& b) {
  if (!a.shape_matches(b)) {
    throw InvalidInput("max_abs_gap: parameter shapes disagree");
  }
  double gap = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) {
      gap = std::max(gap, std::abs(a.layers[l].weights.data()[i] - b.layers[l].weights.data()[i]));
    }
    for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i) {
      gap = std::max(gap, std::abs(a.layers[l].bias[i] - b.layers[l].bias[i]));
    }
  }
  return gap;
}

bool bitwise_equal(const ParamSet& a, const ParamSet& b) {
  if (!a.shape_matches(b)) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (!(a.layers[l].weights == b.layers[l].weights)) return false;
    if (a.layers[l].bias != b.layers[l].bias) return false;
  }
  return true;
}

namespace {

// Walks every parameter through a mutate-evaluate-restore cycle.
template <typename LossFn>
double fd_max_rel_error(ParamSet& params, const Gradients& analytic, LossFn loss) {
  constexpr double kEps = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& p, double g) {
    const double saved = p;
    p = saved + kEps;
    const double up = loss(params);
    p = saved - kEps;
    const double down = loss(params);
    p = saved;
    const double numeric = (up - down) / (2.0 * kEps);
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

}  // namespace

double grad_check(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.param_count() > 10000) {
    throw InvalidInput("grad_check: spec too large (> 1e4 parameters)");
  }
  SplitMix64 rng(derive_seed(seed, 0x6fd1));
  ParamSet params = init_params(spec, derive_seed(seed, 0x11));

  const int batch = 5;
  Batch b;
  b.features = Matrix(batch, spec.input_dim);
  for (std::size_t i = 0; i < b.features.size(); ++i) {
    b.features.data()[i] = rng.next_gaussian();
  }
  b.labels.resize(batch);
  for (int i = 0; i < batch; ++i) {
    b.labels[i] = static_cast<int>(rng.next_below(spec.num_classes));
  }
  // Mixed weights including an exact zero exercise the constant-weight path.
  static const double kWeights[] = {0.0, 0.5, 1.0, 0.25, 1.0};
  std::vector<double> weights(batch);
  for (int i = 0; i < batch; ++i) {
    weights[i] = kWeights[i % 5];
  }
  Matrix targets(batch, spec.num_classes);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    targets.data()[i] = rng.next_gaussian();
  }
  const double mse_scale = 0.7;

  const ForwardTrace trace = forward(params, b);
  const Gradients ce_grads = backward_weighted_ce(params, trace, b.labels, weights);
  const Gradients mse_grads = backward_mse_logits(params, trace, targets, mse_scale);

  auto ce_loss = [&](const ParamSet& p) {
    const ForwardTrace t = forward(p, b);
    const std::vector<double> losses = per_sample_ce(t.logits(), b.labels);
    double sum = 0.0;
    for (int i = 0; i < batch; ++i) {
      sum += weights[i] * losses[i];
    }
    return sum / batch;
  };
  auto mse_loss = [&](const ParamSet& p) {
    const ForwardTrace t = forward(p, b);
    const Matrix& z = t.logits();
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d = z.data()[i] - targets.data()[i];
      sum += d * d;
    }
    return mse_scale * sum / static_cast<double>(z.size());
  };

  const double ce_err = fd_max_rel_error(params, ce_grads, ce_loss);
  const double mse_err = fd_max_rel_error(params, mse_grads, mse_loss);
  return std::max(ce_err, mse_err);
}

}  // namespace esmer
