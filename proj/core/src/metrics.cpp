#include "esmer/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "esmer/errors.hpp"

namespace esmer {

double accuracy(const ParamSet& params, const std::vector<LabeledSample>& samples,
                const HeadMode& mode) {
  if (samples.empty()) {
    throw InvalidInput("accuracy: empty sample set");
  }
  Batch b = to_batch(samples);
  const ForwardTrace trace = forward(params, b);
  const Matrix& logits = trace.logits();
  int correct = 0;
  for (int i = 0; i < logits.rows(); ++i) {
    if (argmax_masked(logits.row(i), logits.cols(), mode) == samples[i].label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / logits.rows();
}

std::vector<double> evaluate_accuracy(const ParamSet& params, const TaskStream& stream,
                                      EvalMode mode, int num_tasks) {
  if (num_tasks < 0 || num_tasks > static_cast<int>(stream.tasks.size())) {
    throw InvalidInput("evaluate_accuracy: task count out of range");
  }
  std::vector<double> out;
  out.reserve(num_tasks);
  for (int t = 0; t < num_tasks; ++t) {
    const Task& task = stream.tasks[t];
    const HeadMode head = mode == EvalMode::kTaskIl ? HeadMode::masked(task.spec.class_set)
                                                    : HeadMode::all();
    out.push_back(accuracy(params, task.test, head));
  }
  return out;
}

RecencyProfile recency_profile(const ParamSet& params, const std::vector<LabeledSample>& test_set,
                               const std::vector<std::vector<int>>& task_classes) {
  if (test_set.empty()) {
    throw InvalidInput("recency_profile: empty test set");
  }
  // The groups must cover every class exactly once.
  std::vector<int> all;
  for (const auto& group : task_classes) {
    all.insert(all.end(), group.begin(), group.end());
  }
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != static_cast<int>(i)) {
      throw InvalidInput("recency_profile: task class groups do not partition the class space");
    }
  }

  const Batch b = to_batch(test_set);
  const ForwardTrace trace = forward(params, b);
  if (static_cast<int>(all.size()) != trace.logits().cols()) {
    throw InvalidInput("recency_profile: class groups do not cover the network's classes");
  }
  const Matrix probs = softmax_rows(trace.logits());

  RecencyProfile profile;
  profile.p.assign(task_classes.size(), 0.0);
  for (int i = 0; i < probs.rows(); ++i) {
    const double* row = probs.row(i);
    for (std::size_t t = 0; t < task_classes.size(); ++t) {
      for (int c : task_classes[t]) {
        profile.p[t] += row[c];
      }
    }
  }
  for (double& v : profile.p) {
    v /= probs.rows();
  }
  return profile;
}

ForgettingResult forgetting(const AccuracyMatrix& matrix) {
  const int t = matrix.n_tasks;
  if (t < 2) {
    throw InvalidInput("forgetting: needs at least 2 tasks");
  }
  ForgettingResult result;
  result.per_task.reserve(t - 1);
  double sum = 0.0;
  for (int j = 0; j < t - 1; ++j) {
    double best = -1.0;
    for (int i = 0; i < t; ++i) {
      best = std::max(best, matrix.a[i][j]);
    }
    const double f = best - matrix.a[t - 1][j];
    result.per_task.push_back(f);
    sum += f;
  }
  result.mean = sum / result.per_task.size();
  return result;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= values.size();
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / values.size());  // population std
  return out;
}

}  // namespace esmer
