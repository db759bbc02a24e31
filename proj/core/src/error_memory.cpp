#include "esmer/error_memory.hpp"

#include <cmath>

#include "esmer/errors.hpp"

namespace esmer {

std::vector<double> compute_weights(const std::vector<double>& losses, const ErrorMemory& mem) {
  std::vector<double> weights(losses.size(), 1.0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < 0.0) {
      throw InvalidInput("compute_weights: negative loss");
    }
    if (!below_margin(mem, losses[i])) {
      weights[i] = mem.mu / losses[i];  // losses[i] > margin*mu >= 0 here
    }
  }
  return weights;
}

double filter_outliers(const std::vector<double>& losses) {
  if (losses.empty()) {
    throw InvalidInput("filter_outliers: empty loss vector");
  }
  double mean = 0.0;
  for (double l : losses) mean += l;
  mean /= losses.size();
  double var = 0.0;
  for (double l : losses) var += (l - mean) * (l - mean);
  var /= losses.size();  // population variance
  const double threshold = mean + std::sqrt(var);
  double kept_sum = 0.0;
  int kept = 0;
  for (double l : losses) {
    if (l <= threshold) {
      kept_sum += l;
      ++kept;
    }
  }
  return kept_sum / kept;  // the minimum always passes, so kept >= 1
}

ErrorMemory update(ErrorMemory mem, double filtered_mean) {
  if (filtered_mean < 0.0) {
    throw InvalidInput("error memory update: filtered mean must be >= 0");
  }
  if (mem.warmup_epochs_remaining > 0) {
    return mem;
  }
  if (!mem.initialized) {
    mem.mu = filtered_mean;
    mem.initialized = true;
  } else {
    mem.mu = mem.decay * mem.mu + (1.0 - mem.decay) * filtered_mean;
  }
  return mem;
}

std::vector<int> select_candidates(const std::vector<double>& losses, const ErrorMemory& mem) {
  std::vector<int> selected;
  selected.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (below_margin(mem, losses[i])) {
      selected.push_back(static_cast<int>(i));
    }
  }
  return selected;
}

ErrorMemory on_task_boundary(ErrorMemory mem, int warmup_epochs) {
  if (warmup_epochs < 0) {
    throw InvalidInput("on_task_boundary: warmup_epochs must be >= 0");
  }
  mem.warmup_epochs_remaining = warmup_epochs;
  return mem;
}

ErrorMemory on_epoch_end(ErrorMemory mem) {
  if (mem.warmup_epochs_remaining > 0) {
    --mem.warmup_epochs_remaining;
  }
  return mem;
}

}  // namespace esmer
