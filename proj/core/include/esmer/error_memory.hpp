#pragma once

#include <vector>

namespace esmer {

// Running estimate of the typical per-sample loss, maintained as a momentum
// average of outlier-filtered batch means. Until the first post-warm-up
// update lands, the estimate is flagged uninitialized and both the sample
// weighting and the candidate gate are disabled (everything passes); seeding
// the estimate at zero instead would assign weight 0 to every sample and
// freeze learning outright.
struct ErrorMemory {
  double mu = 0.0;
  double decay = 0.99;   // momentum of the running estimate
  double margin = 1.0;   // low-loss margin multiplier
  int warmup_epochs_remaining = 0;
  bool initialized = false;
};

// The one low-loss predicate shared by the sample weighting and the buffer
// candidate gate.
inline bool below_margin(const ErrorMemory& mem, double loss) {
  return !mem.initialized || loss <= mem.margin * mem.mu;
}

// Per-sample weights: 1 below the margin, mu/loss above it. All ones while
// the memory is uninitialized. Throws InvalidInput on a negative loss.
std::vector<double> compute_weights(const std::vector<double>& losses, const ErrorMemory& mem);

// Mean of the losses within one population std above the batch mean. The
// kept set is never empty: the batch minimum always passes the threshold.
double filter_outliers(const std::vector<double>& losses);

// Momentum update, gated by warm-up. The first non-gated update seeds mu
// directly with the filtered mean.
ErrorMemory update(ErrorMemory mem, double filtered_mean);

// Indices of the samples whose loss clears the low-loss gate.
std::vector<int> select_candidates(const std::vector<double>& losses, const ErrorMemory& mem);

// Task boundary: freeze updates for the next warmup_epochs epochs; mu carries
// over unchanged.
ErrorMemory on_task_boundary(ErrorMemory mem, int warmup_epochs);

// Epoch boundary: burn one warm-up epoch if any remain.
ErrorMemory on_epoch_end(ErrorMemory mem);

}  // namespace esmer
