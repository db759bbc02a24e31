#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "esmer/network.hpp"

namespace esmer {

// One training or test sample. `label` is what the learner sees and may have
// been corrupted by the noise injector; `true_label` is kept for purity and
// memorization instrumentation only.
struct LabeledSample {
  std::uint64_t id = 0;
  std::vector<double> features;
  int label = 0;
  int true_label = 0;
  bool is_noisy = false;
};

struct TaskSpec {
  int task_index = 0;
  std::vector<int> class_set;
  std::map<int, int> samples_per_class;
};

struct Task {
  TaskSpec spec;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

struct TaskStream {
  std::vector<Task> tasks;
  int num_classes_total = 0;
  std::uint64_t seed = 0;
};

// Labeled pool grouped by class; task streams draw from it.
struct SamplePool {
  int num_classes = 0;
  int dim = 0;
  std::vector<std::vector<LabeledSample>> train_by_class;
  std::vector<std::vector<LabeledSample>> test_by_class;
};

struct GaussianSourceSpec {
  int num_classes = 10;
  int dim = 32;
  double separation = 3.0;  // radius of the sphere the class means sit on
  double within_std = 1.3;
  int train_per_class = 500;
  int test_per_class = 200;

  void validate() const;
};

struct IdxPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

// Class means drawn once on a seeded sphere of radius `separation`; samples
// are mean + N(0, within_std^2 I). Train/test ids are disjoint.
SamplePool make_gaussian_source(const GaussianSourceSpec& spec, std::uint64_t seed);

// Parses big-endian IDX files (magic 0x00000803 for images, 0x00000801 for
// labels); pixel bytes are scaled to [0,1]. Throws FormatError naming the
// offense on wrong magic, truncation or count mismatches.
SamplePool load_idx(const IdxPaths& paths);

// Disjoint ascending class split into n_tasks equal chunks; per-task train
// order is a seeded shuffle. Throws InvalidInput if the class count is not
// divisible by n_tasks.
TaskStream make_class_il_stream(const SamplePool& pool, int n_tasks, std::uint64_t seed);

enum class GcilWeighting { kUniform, kLongtail };

// Each task derives its own seed from (dataset_seed, task_index) and uses it
// for every draw, so uniform and longtail runs sharing a dataset_seed see
// identical class counts and class subsets. Class count ~ U[2, c_max];
// longtail allocation follows a Zipf profile (weight 1/rank^exponent over
// draw rank); samples are drawn without replacement from each class's
// remaining pool and allocation shrinks (with a warning on stderr) when a
// pool runs dry.
TaskStream make_gcil_stream(const SamplePool& pool, int n_tasks, int c_max, int samples_per_task,
                            GcilWeighting weighting, std::uint64_t dataset_seed,
                            double zipf_exponent = 1.0);

// Symmetric label noise: exactly round(rate * n) samples, chosen uniformly,
// get a label drawn uniformly from class_set. The drawn label may equal the
// original; is_noisy is set on every selected sample regardless.
void inject_symmetric_noise(std::vector<LabeledSample>& samples, const std::vector<int>& class_set,
                            double rate, std::uint64_t seed);

// Seeded shuffle cut into consecutive batches; the final short batch is kept.
std::vector<std::vector<LabeledSample>> epoch_batches(const std::vector<LabeledSample>& samples,
                                                      int batch_size, std::uint64_t epoch_seed);

// Packs samples into a numeric minibatch using the observed labels.
Batch to_batch(const std::vector<LabeledSample>& samples);

// All test samples of every task, concatenated in task order.
std::vector<LabeledSample> full_test_set(const TaskStream& stream);

}  // namespace esmer
