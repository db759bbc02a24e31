#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esmer/learners.hpp"
#include "esmer/network.hpp"
#include "esmer/stream.hpp"

namespace esmer {

// A[i][j] = accuracy on task j's test set after finishing training on task i.
// Entries with j > i are -1 (not yet defined).
struct AccuracyMatrix {
  int n_tasks = 0;
  std::vector<std::vector<double>> a;

  explicit AccuracyMatrix(int tasks = 0)
      : n_tasks(tasks), a(tasks, std::vector<double>(tasks, -1.0)) {}
};

enum class EvalMode { kClassIl, kTaskIl };

// Fraction of correct predictions on one labeled set under a head mode.
double accuracy(const ParamSet& params, const std::vector<LabeledSample>& samples,
                const HeadMode& mode);

// Accuracy per task over tasks [0, num_tasks). Task-IL masks each task's
// head to its own class subset.
std::vector<double> evaluate_accuracy(const ParamSet& params, const TaskStream& stream,
                                      EvalMode mode, int num_tasks);

// Mean softmax mass assigned to each task's class group over the full test
// set. The groups must partition the class space.
struct RecencyProfile {
  std::vector<double> p;
};
RecencyProfile recency_profile(const ParamSet& params, const std::vector<LabeledSample>& test_set,
                               const std::vector<std::vector<int>>& task_classes);

// Max-minus-final forgetting per task (excluding the last task) and its mean.
struct ForgettingResult {
  std::vector<double> per_task;
  double mean = 0.0;
};
ForgettingResult forgetting(const AccuracyMatrix& matrix);

// Trace points collected by the run probes.
struct DriftPoint {
  std::int64_t step = 0;
  std::string model;  // "stable" or "working"
  double task1_accuracy = 0.0;
};

struct MemorizationPoint {
  int task = 0;
  int epoch = 0;
  std::string model;
  double clean_accuracy = 0.0;
  double noisy_accuracy = 0.0;  // w.r.t. the observed (corrupted) labels
};

struct PurityPoint {
  std::int64_t offers = 0;
  double noise_fraction = 0.0;
};

// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace esmer
