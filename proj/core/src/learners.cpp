#include "esmer/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esmer/errors.hpp"

namespace esmer {

namespace {

// Per-purpose seed streams. Keeping the draws on separate streams means a
// learner variant that skips one consumer (say, the stable-model trigger)
// still replays every other stream identically.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBufferStream = 2;
constexpr std::uint64_t kMemoryStream = 3;
constexpr std::uint64_t kEmaStream = 4;

std::vector<int> buffer_labels(const std::vector<BufferItem>& items) {
  std::vector<int> labels(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    labels[i] = items[i].sample.label;
  }
  return labels;
}

Batch buffer_batch(const std::vector<BufferItem>& items) {
  std::vector<LabeledSample> samples;
  samples.reserve(items.size());
  for (const BufferItem& item : items) {
    samples.push_back(item.sample);
  }
  return to_batch(samples);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

void check_finite_loss(double loss, const char* what, std::int64_t step) {
  if (!std::isfinite(loss)) {
    throw NumericFault(std::string(what) + " became non-finite at step " + std::to_string(step));
  }
}

}  // namespace

void HyperParams::validate() const {
  if (!(lr > 0.0)) throw InvalidInput("hyperparams: lr must be > 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) {
    throw InvalidInput("hyperparams: ema_decay must lie in (0, 1)");
  }
  if (update_rate < 0.0 || update_rate > 1.0) {
    throw InvalidInput("hyperparams: update_rate must lie in [0, 1]");
  }
  if (consistency_weight < 0.0) throw InvalidInput("hyperparams: consistency_weight must be >= 0");
  if (!(margin > 0.0)) throw InvalidInput("hyperparams: margin must be > 0");
  if (!(error_decay > 0.0 && error_decay < 1.0)) {
    throw InvalidInput("hyperparams: error_decay must lie in (0, 1)");
  }
  if (warmup_epochs < 0) throw InvalidInput("hyperparams: warmup_epochs must be >= 0");
  if (batch_size < 1) throw InvalidInput("hyperparams: batch_size must be >= 1");
  if (memory_batch_size < 1) throw InvalidInput("hyperparams: memory_batch_size must be >= 1");
  if (buffer_capacity < 1) throw InvalidInput("hyperparams: buffer_capacity must be >= 1");
  if (epochs_per_task < 0) throw InvalidInput("hyperparams: epochs_per_task must be >= 0");
  if (logit_mse_weight < 0.0 || logit_ce_weight < 0.0) {
    throw InvalidInput("hyperparams: logit replay weights must be >= 0");
  }
}

HeadMode HeadMode::masked(std::vector<int> classes) {
  if (classes.empty()) {
    throw InvalidInput("head mode: empty class mask");
  }
  HeadMode mode;
  mode.allowed = std::move(classes);
  return mode;
}

int argmax_masked(const double* logits, int num_classes, const HeadMode& mode) {
  int best = -1;
  double best_value = 0.0;
  auto consider = [&](int c) {
    if (c < 0 || c >= num_classes) {
      throw InvalidInput("head mode: class index out of range");
    }
    if (best < 0 || logits[c] > best_value || (logits[c] == best_value && c < best)) {
      best = c;
      best_value = logits[c];
    }
  };
  if (mode.allowed) {
    for (int c : *mode.allowed) consider(c);
  } else {
    for (int c = 0; c < num_classes; ++c) consider(c);
  }
  return best;
}

int predict(const ParamSet& params, const std::vector<double>& features, const HeadMode& mode) {
  Batch b;
  b.features = Matrix(1, static_cast<int>(features.size()));
  std::copy(features.begin(), features.end(), b.features.row(0));
  b.labels = {0};
  const ForwardTrace trace = forward(params, b);
  return argmax_masked(trace.logits().row(0), trace.logits().cols(), mode);
}

// ---------------------------------------------------------------------------
// ESMER

EsmerLearner::EsmerLearner(const NetworkSpec& spec, const HyperParams& hp,
                           const AblationFlags& ablation, std::uint64_t seed)
    : spec_(spec),
      hp_(hp),
      ablation_(ablation),
      working_(init_params(spec, derive_seed(seed, kInitStream))),
      stable_(working_),  // stable model starts as a copy of the working model
      buffer_(hp.buffer_capacity, derive_seed(seed, kBufferStream)),
      memory_rng_(derive_seed(seed, kMemoryStream)),
      ema_rng_(derive_seed(seed, kEmaStream)) {
  hp_.validate();
  error_mem_.decay = hp_.error_decay;
  error_mem_.margin = hp_.margin;
}

const ParamSet& EsmerLearner::inference_params() const {
  return ablation_.stable_model ? stable_ : working_;
}

void EsmerLearner::start_task() {
  error_mem_ = on_task_boundary(error_mem_, hp_.warmup_epochs);
}

void EsmerLearner::end_epoch() {
  error_mem_ = on_epoch_end(error_mem_);
}

StepReport EsmerLearner::step(const std::vector<LabeledSample>& task_batch) {
  const Batch batch = to_batch(task_batch);

  // Assess the incoming samples on the consolidated model (the working model
  // stands in when the stable component is ablated). These losses drive both
  // the sample weighting and the buffer candidate gate; they carry no
  // gradient.
  const ParamSet& assessor = ablation_.stable_model ? stable_ : working_;
  const ForwardTrace assess_trace = forward(assessor, batch);
  const std::vector<double> assess_losses = per_sample_ce(assess_trace.logits(), batch.labels);

  std::vector<double> weights(task_batch.size(), 1.0);
  if (ablation_.error_weighting) {
    weights = compute_weights(assess_losses, error_mem_);
  }

  // Weighted task loss on the working model.
  const ForwardTrace task_trace = forward(working_, batch);
  const std::vector<double> task_losses = per_sample_ce(task_trace.logits(), batch.labels);
  double task_loss = 0.0;
  for (std::size_t i = 0; i < task_losses.size(); ++i) {
    task_loss += weights[i] * task_losses[i];
  }
  task_loss /= static_cast<double>(task_losses.size());
  Gradients grads = backward_weighted_ce(working_, task_trace, batch.labels, weights);

  // Replay: CE on the buffer draw plus consistency against the pre-step
  // stable model's logits.
  double memory_loss = 0.0;
  if (!buffer_.empty()) {
    const std::vector<BufferItem> drawn = buffer_.sample(hp_.memory_batch_size, memory_rng_);
    const Batch mem_batch = buffer_batch(drawn);
    const std::vector<int> mem_labels = buffer_labels(drawn);
    const ForwardTrace mem_trace = forward(working_, mem_batch);
    const std::vector<double> mem_ce = per_sample_ce(mem_trace.logits(), mem_labels);
    memory_loss = mean_of(mem_ce);
    const std::vector<double> ones(mem_labels.size(), 1.0);
    add_scaled(grads, backward_weighted_ce(working_, mem_trace, mem_labels, ones), 1.0);
    if (ablation_.stable_model && hp_.consistency_weight > 0.0) {
      const Matrix stable_logits = forward(stable_, mem_batch).logits();
      const Matrix& working_logits = mem_trace.logits();
      double sq = 0.0;
      for (std::size_t i = 0; i < working_logits.size(); ++i) {
        const double d = working_logits.data()[i] - stable_logits.data()[i];
        sq += d * d;
      }
      memory_loss += hp_.consistency_weight * sq / static_cast<double>(working_logits.size());
      add_scaled(grads, backward_mse_logits(working_, mem_trace, stable_logits, hp_.consistency_weight),
                 1.0);
    }
  }
  check_finite_loss(task_loss, "task loss", step_);
  check_finite_loss(memory_loss, "memory loss", step_);

  working_ = sgd_step(working_, grads, hp_.lr);

  // Stochastic stable-model update, strictly after the working-model step.
  const double u = ema_rng_.next_double();
  if (ablation_.stable_model && hp_.update_rate > u) {
    stable_ = ema_update(stable_, working_, hp_.ema_decay);
  }

  // Candidate gate and reservoir offers, using the assessment losses and the
  // pre-update error memory.
  std::vector<int> candidates;
  if (ablation_.sensitive_sampling) {
    candidates = select_candidates(assess_losses, error_mem_);
  } else {
    candidates.resize(task_batch.size());
    std::iota(candidates.begin(), candidates.end(), 0);
  }
  std::vector<char> is_candidate(task_batch.size(), 0);
  for (int i : candidates) is_candidate[i] = 1;
  int inserted_count = 0;
  for (std::size_t i = 0; i < task_batch.size(); ++i) {
    bool inserted = false;
    if (is_candidate[i]) {
      BufferItem item;
      item.sample = task_batch[i];
      item.insertion_step = step_;
      inserted = buffer_.offer(std::move(item));
      if (inserted) ++inserted_count;
    }
    if (record_offers_) {
      offer_log_.push_back({step_, task_batch[i].id, assess_losses[i], error_mem_.mu,
                            error_mem_.initialized, is_candidate[i] != 0, inserted});
    }
  }

  // Error-memory update from the outlier-filtered batch mean.
  error_mem_ = update(error_mem_, filter_outliers(assess_losses));

  StepReport report;
  report.task_loss = task_loss;
  report.memory_loss = memory_loss;
  report.total_loss = task_loss + memory_loss;
  report.mean_weight = mean_of(weights);
  report.mu = error_mem_.mu;
  report.candidates_inserted = inserted_count;
  ++step_;
  return report;
}

// ---------------------------------------------------------------------------
// ER

ErLearner::ErLearner(const NetworkSpec& spec, const HyperParams& hp, std::uint64_t seed)
    : hp_(hp),
      model_(init_params(spec, derive_seed(seed, kInitStream))),
      buffer_(hp.buffer_capacity, derive_seed(seed, kBufferStream)),
      memory_rng_(derive_seed(seed, kMemoryStream)) {
  hp_.validate();
}

StepReport ErLearner::step(const std::vector<LabeledSample>& task_batch) {
  const Batch batch = to_batch(task_batch);
  const ForwardTrace task_trace = forward(model_, batch);
  const std::vector<double> task_losses = per_sample_ce(task_trace.logits(), batch.labels);
  const double task_loss = mean_of(task_losses);
  const std::vector<double> task_ones(batch.labels.size(), 1.0);
  Gradients grads = backward_weighted_ce(model_, task_trace, batch.labels, task_ones);

  double memory_loss = 0.0;
  if (!buffer_.empty()) {
    const std::vector<BufferItem> drawn = buffer_.sample(hp_.memory_batch_size, memory_rng_);
    const Batch mem_batch = buffer_batch(drawn);
    const std::vector<int> mem_labels = buffer_labels(drawn);
    const ForwardTrace mem_trace = forward(model_, mem_batch);
    memory_loss = mean_of(per_sample_ce(mem_trace.logits(), mem_labels));
    const std::vector<double> ones(mem_labels.size(), 1.0);
    add_scaled(grads, backward_weighted_ce(model_, mem_trace, mem_labels, ones), 1.0);
  }
  check_finite_loss(task_loss, "task loss", step_);
  check_finite_loss(memory_loss, "memory loss", step_);

  model_ = sgd_step(model_, grads, hp_.lr);

  // Plain reservoir: every incoming sample is a candidate.
  int inserted_count = 0;
  for (const LabeledSample& sample : task_batch) {
    BufferItem item;
    item.sample = sample;
    item.insertion_step = step_;
    const bool inserted = buffer_.offer(std::move(item));
    if (inserted) ++inserted_count;
    if (record_offers_) {
      offer_log_.push_back({step_, sample.id, 0.0, 0.0, false, true, inserted});
    }
  }

  StepReport report;
  report.task_loss = task_loss;
  report.memory_loss = memory_loss;
  report.total_loss = task_loss + memory_loss;
  report.candidates_inserted = inserted_count;
  ++step_;
  return report;
}

// ---------------------------------------------------------------------------
// Logit replay

LogitReplayLearner::LogitReplayLearner(const NetworkSpec& spec, const HyperParams& hp,
                                       std::uint64_t seed)
    : hp_(hp),
      model_(init_params(spec, derive_seed(seed, kInitStream))),
      buffer_(hp.buffer_capacity, derive_seed(seed, kBufferStream)),
      memory_rng_(derive_seed(seed, kMemoryStream)) {
  hp_.validate();
}

StepReport LogitReplayLearner::step(const std::vector<LabeledSample>& task_batch) {
  const Batch batch = to_batch(task_batch);
  const ForwardTrace task_trace = forward(model_, batch);
  const std::vector<double> task_losses = per_sample_ce(task_trace.logits(), batch.labels);
  const double task_loss = mean_of(task_losses);
  const std::vector<double> task_ones(batch.labels.size(), 1.0);
  Gradients grads = backward_weighted_ce(model_, task_trace, batch.labels, task_ones);

  double memory_loss = 0.0;
  // Consistency term against the logits frozen at insertion time.
  if (hp_.logit_mse_weight > 0.0 && !buffer_.empty()) {
    const std::vector<BufferItem> drawn = buffer_.sample(hp_.memory_batch_size, memory_rng_);
    const Batch mem_batch = buffer_batch(drawn);
    Matrix targets(static_cast<int>(drawn.size()), task_trace.logits().cols());
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      if (!drawn[i].stored_logits) {
        throw InvalidInput("logit replay: buffer item lacks stored logits");
      }
      std::copy(drawn[i].stored_logits->begin(), drawn[i].stored_logits->end(),
                targets.row(static_cast<int>(i)));
    }
    const ForwardTrace mem_trace = forward(model_, mem_batch);
    double sq = 0.0;
    for (std::size_t i = 0; i < mem_trace.logits().size(); ++i) {
      const double d = mem_trace.logits().data()[i] - targets.data()[i];
      sq += d * d;
    }
    memory_loss += hp_.logit_mse_weight * sq / static_cast<double>(mem_trace.logits().size());
    add_scaled(grads, backward_mse_logits(model_, mem_trace, targets, hp_.logit_mse_weight), 1.0);
  }
  // Replayed CE on a second, independent draw.
  if (hp_.logit_ce_weight > 0.0 && !buffer_.empty()) {
    const std::vector<BufferItem> drawn = buffer_.sample(hp_.memory_batch_size, memory_rng_);
    const Batch mem_batch = buffer_batch(drawn);
    const std::vector<int> mem_labels = buffer_labels(drawn);
    const ForwardTrace mem_trace = forward(model_, mem_batch);
    memory_loss += hp_.logit_ce_weight * mean_of(per_sample_ce(mem_trace.logits(), mem_labels));
    const std::vector<double> ce_weights(mem_labels.size(), hp_.logit_ce_weight);
    add_scaled(grads, backward_weighted_ce(model_, mem_trace, mem_labels, ce_weights), 1.0);
  }
  check_finite_loss(task_loss, "task loss", step_);
  check_finite_loss(memory_loss, "memory loss", step_);

  model_ = sgd_step(model_, grads, hp_.lr);

  // Offer the incoming batch with its pre-update logits attached.
  int inserted_count = 0;
  for (std::size_t i = 0; i < task_batch.size(); ++i) {
    BufferItem item;
    item.sample = task_batch[i];
    item.insertion_step = step_;
    const double* row = task_trace.logits().row(static_cast<int>(i));
    item.stored_logits = std::vector<double>(row, row + task_trace.logits().cols());
    const bool inserted = buffer_.offer(std::move(item));
    if (inserted) ++inserted_count;
    if (record_offers_) {
      offer_log_.push_back({step_, task_batch[i].id, 0.0, 0.0, false, true, inserted});
    }
  }

  StepReport report;
  report.task_loss = task_loss;
  report.memory_loss = memory_loss;
  report.total_loss = task_loss + memory_loss;
  report.candidates_inserted = inserted_count;
  ++step_;
  return report;
}

std::unique_ptr<Learner> make_learner(const std::string& method, const NetworkSpec& spec,
                                      const HyperParams& hp, const AblationFlags& ablation,
                                      std::uint64_t seed) {
  if (method == "esmer") {
    return std::make_unique<EsmerLearner>(spec, hp, ablation, seed);
  }
  if (method == "er") {
    return std::make_unique<ErLearner>(spec, hp, seed);
  }
  if (method == "logit_replay") {
    return std::make_unique<LogitReplayLearner>(spec, hp, seed);
  }
  throw InvalidInput("unknown method: " + method);
}

int count_gate_violations(const std::vector<OfferRecord>& log, double margin) {
  int violations = 0;
  for (const OfferRecord& r : log) {
    if (r.inserted && r.mu_initialized && r.stable_loss > margin * r.mu) {
      ++violations;
    }
  }
  return violations;
}

}  // namespace esmer
