#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "esmer/buffer.hpp"
#include "esmer/error_memory.hpp"
#include "esmer/network.hpp"
#include "esmer/stream.hpp"

namespace esmer {

struct HyperParams {
  double lr = 0.03;
  double ema_decay = 0.9;          // stable-model momentum (per update)
  double update_rate = 0.1;        // probability of a stable-model update per step
  double consistency_weight = 0.15;  // weight of the logit-consistency term
  double margin = 1.0;             // low-loss margin multiplier
  double error_decay = 0.9;        // error-memory momentum
  int warmup_epochs = 1;
  int batch_size = 32;
  int memory_batch_size = 32;
  int buffer_capacity = 100;
  int epochs_per_task = 5;
  double logit_mse_weight = 0.2;   // logit-replay baseline: consistency term
  double logit_ce_weight = 0.5;    // logit-replay baseline: replay CE term

  void validate() const;
};

// Component switches mirroring the ablation grid. With all three off (and
// inference falling back to the working model) the ESMER learner degrades to
// plain experience replay, bitwise.
struct AblationFlags {
  bool error_weighting = true;
  bool stable_model = true;
  bool sensitive_sampling = true;
};

struct StepReport {
  double task_loss = 0.0;
  double memory_loss = 0.0;
  double total_loss = 0.0;
  double mean_weight = 1.0;
  double mu = 0.0;
  int candidates_inserted = 0;
};

// One candidate-gate decision, recorded when offer logging is on. Replaying
// the log verifies that no high-loss sample ever slipped into the buffer at
// its arrival step.
struct OfferRecord {
  std::int64_t step = 0;
  std::uint64_t sample_id = 0;
  double stable_loss = 0.0;
  double mu = 0.0;
  bool mu_initialized = false;
  bool offered = false;
  bool inserted = false;
};

// Evaluation head: all classes, or a task's class subset.
struct HeadMode {
  static HeadMode all() { return HeadMode{}; }
  static HeadMode masked(std::vector<int> classes);

  std::optional<std::vector<int>> allowed;  // nullopt = all classes
};

// Argmax over the unmasked logits; ties break toward the lowest class index.
int predict(const ParamSet& params, const std::vector<double>& features, const HeadMode& mode);
int argmax_masked(const double* logits, int num_classes, const HeadMode& mode);

// Training-step state machine shared by all methods.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual StepReport step(const std::vector<LabeledSample>& task_batch) = 0;
  virtual void start_task() {}
  virtual void end_epoch() {}

  // Parameters used at evaluation time (the consolidated model where one
  // exists, the single trained model otherwise).
  virtual const ParamSet& inference_params() const = 0;
  virtual const ParamSet& working_params() const = 0;

  virtual const EpisodicBuffer& buffer() const = 0;
  virtual std::int64_t step_count() const = 0;
  virtual std::string method_name() const = 0;

  const std::vector<OfferRecord>& offer_log() const { return offer_log_; }
  void set_record_offers(bool on) { record_offers_ = on; }

 protected:
  bool record_offers_ = false;
  std::vector<OfferRecord> offer_log_;
};

// Error-sensitivity-modulated replay with a dual memory: per-step it weighs
// task samples by their consistency with the error memory, replays buffer
// samples with a logit-consistency term against the stable model, updates the
// working model by SGD, stochastically folds it into the stable model, and
// gates buffer candidates on low loss.
class EsmerLearner : public Learner {
 public:
  EsmerLearner(const NetworkSpec& spec, const HyperParams& hp, const AblationFlags& ablation,
               std::uint64_t seed);

  StepReport step(const std::vector<LabeledSample>& task_batch) override;
  void start_task() override;
  void end_epoch() override;

  const ParamSet& inference_params() const override;
  const ParamSet& working_params() const override { return working_; }
  const ParamSet& stable_params() const { return stable_; }
  const ErrorMemory& error_memory() const { return error_mem_; }
  const EpisodicBuffer& buffer() const override { return buffer_; }
  std::int64_t step_count() const override { return step_; }
  std::string method_name() const override { return "esmer"; }
  const HyperParams& hyperparams() const { return hp_; }
  const AblationFlags& ablation() const { return ablation_; }

  // Checkpointing hooks; the JSON layout lives in checkpoint.cpp.
  friend std::string checkpoint_to_json(const EsmerLearner& learner);
  friend void restore_from_json(EsmerLearner& learner, const std::string& json_text);

 private:
  NetworkSpec spec_;
  HyperParams hp_;
  AblationFlags ablation_;
  ParamSet working_;
  ParamSet stable_;
  ErrorMemory error_mem_;
  EpisodicBuffer buffer_;
  SplitMix64 memory_rng_;
  SplitMix64 ema_rng_;
  std::int64_t step_ = 0;
};

// Plain experience replay: interleaved CE on the incoming batch and a buffer
// draw, reservoir over the full incoming stream.
class ErLearner : public Learner {
 public:
  ErLearner(const NetworkSpec& spec, const HyperParams& hp, std::uint64_t seed);

  StepReport step(const std::vector<LabeledSample>& task_batch) override;

  const ParamSet& inference_params() const override { return model_; }
  const ParamSet& working_params() const override { return model_; }
  const EpisodicBuffer& buffer() const override { return buffer_; }
  std::int64_t step_count() const override { return step_; }
  std::string method_name() const override { return "er"; }

 private:
  HyperParams hp_;
  ParamSet model_;
  EpisodicBuffer buffer_;
  SplitMix64 memory_rng_;
  std::int64_t step_ = 0;
};

// Replay baseline that stores the model's output logits with each sample and
// enforces consistency against them, next to a replayed CE term.
class LogitReplayLearner : public Learner {
 public:
  LogitReplayLearner(const NetworkSpec& spec, const HyperParams& hp, std::uint64_t seed);

  StepReport step(const std::vector<LabeledSample>& task_batch) override;

  const ParamSet& inference_params() const override { return model_; }
  const ParamSet& working_params() const override { return model_; }
  const EpisodicBuffer& buffer() const override { return buffer_; }
  std::int64_t step_count() const override { return step_; }
  std::string method_name() const override { return "logit_replay"; }

 private:
  HyperParams hp_;
  ParamSet model_;
  EpisodicBuffer buffer_;
  SplitMix64 memory_rng_;
  std::int64_t step_ = 0;
};

std::unique_ptr<Learner> make_learner(const std::string& method, const NetworkSpec& spec,
                                      const HyperParams& hp, const AblationFlags& ablation,
                                      std::uint64_t seed);

// Replays an offer log against the candidate gate: counts insertions whose
// arrival loss exceeded margin * mu while the error memory was initialized.
int count_gate_violations(const std::vector<OfferRecord>& log, double margin);

}  // namespace esmer
