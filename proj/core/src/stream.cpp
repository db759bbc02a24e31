#include "esmer/stream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "esmer/errors.hpp"
#include "esmer/rng.hpp"

namespace esmer {

namespace {

// Seed-stream tags for the generators in this file.
constexpr std::uint64_t kMeansStream = 0xA1;
constexpr std::uint64_t kTrainStream = 0xB000;
constexpr std::uint64_t kTestStream = 0xC000;
constexpr std::uint64_t kShuffleStream = 0xD000;

}  // namespace

void GaussianSourceSpec::validate() const {
  if (num_classes < 2) throw InvalidInput("gaussian source: num_classes must be >= 2");
  if (dim < 1) throw InvalidInput("gaussian source: dim must be >= 1");
  if (!(separation > 0.0)) throw InvalidInput("gaussian source: separation must be > 0");
  if (within_std < 0.0) throw InvalidInput("gaussian source: within_std must be >= 0");
  if (train_per_class < 1 || test_per_class < 1) {
    throw InvalidInput("gaussian source: per-class sample counts must be >= 1");
  }
}

SamplePool make_gaussian_source(const GaussianSourceSpec& spec, std::uint64_t seed) {
  spec.validate();
  SamplePool pool;
  pool.num_classes = spec.num_classes;
  pool.dim = spec.dim;
  pool.train_by_class.resize(spec.num_classes);
  pool.test_by_class.resize(spec.num_classes);

  // Class means on a sphere of radius `separation`.
  std::vector<std::vector<double>> means(spec.num_classes);
  SplitMix64 mean_rng(derive_seed(seed, kMeansStream));
  for (int c = 0; c < spec.num_classes; ++c) {
    std::vector<double> m(spec.dim);
    double norm2 = 0.0;
    for (double& v : m) {
      v = mean_rng.next_gaussian();
      norm2 += v * v;
    }
    const double scale = spec.separation / std::max(std::sqrt(norm2), 1e-300);
    for (double& v : m) {
      v *= scale;
    }
    means[c] = std::move(m);
  }

  std::uint64_t next_id = 0;
  auto emit = [&](std::vector<LabeledSample>& out, int c, int count, SplitMix64& rng) {
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
      LabeledSample s;
      s.id = next_id++;
      s.label = c;
      s.true_label = c;
      s.features.resize(spec.dim);
      for (int d = 0; d < spec.dim; ++d) {
        s.features[d] = means[c][d] + spec.within_std * rng.next_gaussian();
      }
      out.push_back(std::move(s));
    }
  };
  for (int c = 0; c < spec.num_classes; ++c) {
    SplitMix64 train_rng(derive_seed(seed, kTrainStream + c));
    emit(pool.train_by_class[c], c, spec.train_per_class, train_rng);
  }
  for (int c = 0; c < spec.num_classes; ++c) {
    SplitMix64 test_rng(derive_seed(seed, kTestStream + c));
    emit(pool.test_by_class[c], c, spec.test_per_class, test_rng);
  }
  return pool;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("idx: cannot open file: " + path);
  }
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& buf, std::size_t offset,
                          const std::string& path) {
  if (offset + 4 > buf.size()) {
    throw FormatError("idx: truncated header in " + path);
  }
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  const unsigned char* pixels = nullptr;
  std::vector<unsigned char> storage;
};

IdxImages parse_images(const std::string& path) {
  IdxImages out;
  out.storage = read_file(path);
  const std::uint32_t magic = read_u32_be(out.storage, 0, path);
  if (magic != kImagesMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    throw FormatError("idx: bad images magic " + std::string(buf) + " in " + path +
                      " (expected 0x00000803)");
  }
  out.count = read_u32_be(out.storage, 4, path);
  out.rows = read_u32_be(out.storage, 8, path);
  out.cols = read_u32_be(out.storage, 12, path);
  const std::size_t expected = 16 + static_cast<std::size_t>(out.count) * out.rows * out.cols;
  if (out.storage.size() < expected) {
    throw FormatError("idx: truncated image data in " + path);
  }
  out.pixels = out.storage.data() + 16;
  return out;
}

std::vector<int> parse_labels(const std::string& path) {
  const std::vector<unsigned char> buf = read_file(path);
  const std::uint32_t magic = read_u32_be(buf, 0, path);
  if (magic != kLabelsMagic) {
    char hex[64];
    std::snprintf(hex, sizeof(hex), "0x%08x", magic);
    throw FormatError("idx: bad labels magic " + std::string(hex) + " in " + path +
                      " (expected 0x00000801)");
  }
  const std::uint32_t count = read_u32_be(buf, 4, path);
  if (buf.size() < 8 + count) {
    throw FormatError("idx: truncated label data in " + path);
  }
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels[i] = buf[8 + i];
  }
  return labels;
}

}  // namespace

SamplePool load_idx(const IdxPaths& paths) {
  const IdxImages train_images = parse_images(paths.train_images);
  const std::vector<int> train_labels = parse_labels(paths.train_labels);
  const IdxImages test_images = parse_images(paths.test_images);
  const std::vector<int> test_labels = parse_labels(paths.test_labels);

  if (train_images.count != train_labels.size()) {
    throw FormatError("idx: train image count " + std::to_string(train_images.count) +
                      " does not match label count " + std::to_string(train_labels.size()));
  }
  if (test_images.count != test_labels.size()) {
    throw FormatError("idx: test image count " + std::to_string(test_images.count) +
                      " does not match label count " + std::to_string(test_labels.size()));
  }
  if (train_images.rows != test_images.rows || train_images.cols != test_images.cols) {
    throw FormatError("idx: train/test image dimensions disagree");
  }

  int num_classes = 0;
  for (int l : train_labels) num_classes = std::max(num_classes, l + 1);
  for (int l : test_labels) num_classes = std::max(num_classes, l + 1);
  if (num_classes < 2) {
    throw FormatError("idx: fewer than 2 distinct classes");
  }

  SamplePool pool;
  pool.num_classes = num_classes;
  pool.dim = static_cast<int>(train_images.rows * train_images.cols);
  pool.train_by_class.resize(num_classes);
  pool.test_by_class.resize(num_classes);

  std::uint64_t next_id = 0;
  auto ingest = [&](const IdxImages& images, const std::vector<int>& labels,
                    std::vector<std::vector<LabeledSample>>& by_class) {
    const std::size_t dim = images.rows * images.cols;
    for (std::uint32_t i = 0; i < images.count; ++i) {
      LabeledSample s;
      s.id = next_id++;
      s.label = labels[i];
      s.true_label = labels[i];
      s.features.resize(dim);
      const unsigned char* px = images.pixels + static_cast<std::size_t>(i) * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        s.features[d] = px[d] / 255.0;
      }
      by_class[labels[i]].push_back(std::move(s));
    }
  };
  ingest(train_images, train_labels, pool.train_by_class);
  ingest(test_images, test_labels, pool.test_by_class);
  return pool;
}

TaskStream make_class_il_stream(const SamplePool& pool, int n_tasks, std::uint64_t seed) {
  if (n_tasks < 1) {
    throw InvalidInput("class-il stream: n_tasks must be >= 1");
  }
  if (pool.num_classes % n_tasks != 0) {
    throw InvalidInput("class-il stream: " + std::to_string(pool.num_classes) +
                       " classes are not divisible into " + std::to_string(n_tasks) + " tasks");
  }
  const int per_task = pool.num_classes / n_tasks;
  TaskStream stream;
  stream.num_classes_total = pool.num_classes;
  stream.seed = seed;
  stream.tasks.resize(n_tasks);
  for (int t = 0; t < n_tasks; ++t) {
    Task& task = stream.tasks[t];
    task.spec.task_index = t;
    for (int c = t * per_task; c < (t + 1) * per_task; ++c) {
      task.spec.class_set.push_back(c);
      task.spec.samples_per_class[c] = static_cast<int>(pool.train_by_class[c].size());
      task.train.insert(task.train.end(), pool.train_by_class[c].begin(),
                        pool.train_by_class[c].end());
      task.test.insert(task.test.end(), pool.test_by_class[c].begin(),
                       pool.test_by_class[c].end());
    }
    SplitMix64 rng(derive_seed(seed, kShuffleStream + t));
    shuffle(task.train, rng);
  }
  return stream;
}

namespace {

// Largest-remainder split of `total` over the given weights; ties go to the
// lower rank so the result is deterministic. Preserves the total exactly.
std::vector<int> apportion(int total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const int n = static_cast<int>(weights.size());
  std::vector<int> counts(n);
  std::vector<std::pair<double, int>> remainders(n);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double share = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(share));
    remainders[i] = {share - counts[i], i};
    assigned += counts[i];
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < total - assigned; ++k) {
    ++counts[remainders[k].second];
  }
  return counts;
}

}  // namespace

TaskStream make_gcil_stream(const SamplePool& pool, int n_tasks, int c_max, int samples_per_task,
                            GcilWeighting weighting, std::uint64_t dataset_seed,
                            double zipf_exponent) {
  if (n_tasks < 1) throw InvalidInput("gcil stream: n_tasks must be >= 1");
  if (c_max < 2 || c_max > pool.num_classes) {
    throw InvalidInput("gcil stream: c_max must lie in [2, num_classes]");
  }
  if (samples_per_task < 2) {
    throw InvalidInput("gcil stream: samples_per_task must be >= 2");
  }
  if (!(zipf_exponent > 0.0)) {
    throw InvalidInput("gcil stream: zipf exponent must be > 0");
  }

  // Remaining per-class train pools, consumed across tasks.
  std::vector<std::vector<LabeledSample>> remaining = pool.train_by_class;

  TaskStream stream;
  stream.num_classes_total = pool.num_classes;
  stream.seed = dataset_seed;
  stream.tasks.resize(n_tasks);
  for (int t = 0; t < n_tasks; ++t) {
    // One seed per task drives every draw below, so sibling streams with a
    // shared dataset_seed agree on class counts and subsets no matter how
    // the previous tasks consumed their pools.
    SplitMix64 rng(derive_seed(dataset_seed, t));
    const int n_classes = 2 + static_cast<int>(rng.next_below(c_max - 1));

    std::vector<int> all_classes(pool.num_classes);
    std::iota(all_classes.begin(), all_classes.end(), 0);
    std::vector<int> subset;
    subset.reserve(n_classes);
    for (int k = 0; k < n_classes; ++k) {
      const std::size_t j = k + rng.next_below(all_classes.size() - k);
      std::swap(all_classes[k], all_classes[j]);
      subset.push_back(all_classes[k]);
    }

    std::vector<double> weights(n_classes, 1.0);
    if (weighting == GcilWeighting::kLongtail) {
      for (int k = 0; k < n_classes; ++k) {
        weights[k] = 1.0 / std::pow(k + 1, zipf_exponent);  // Zipf over draw rank
      }
    }
    const std::vector<int> allocation = apportion(samples_per_task, weights);

    Task& task = stream.tasks[t];
    task.spec.task_index = t;
    task.spec.class_set = subset;
    for (int k = 0; k < n_classes; ++k) {
      const int c = subset[k];
      std::vector<LabeledSample>& avail = remaining[c];
      int want = allocation[k];
      if (want > static_cast<int>(avail.size())) {
        std::cerr << "warning: gcil task " << t << " class " << c << " pool exhausted ("
                  << avail.size() << " left, wanted " << want << ")\n";
        want = static_cast<int>(avail.size());
      }
      for (int i = 0; i < want; ++i) {
        const std::size_t j = rng.next_below(avail.size());
        task.train.push_back(avail[j]);
        avail[j] = avail.back();
        avail.pop_back();
      }
      task.spec.samples_per_class[c] = want;
      task.test.insert(task.test.end(), pool.test_by_class[c].begin(),
                       pool.test_by_class[c].end());
    }
  }
  return stream;
}

void inject_symmetric_noise(std::vector<LabeledSample>& samples, const std::vector<int>& class_set,
                            double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) {
    throw InvalidInput("noise: rate must lie in [0, 1]");
  }
  if (class_set.empty()) {
    throw InvalidInput("noise: empty class set");
  }
  const int n = static_cast<int>(samples.size());
  const int k = static_cast<int>(std::floor(rate * n + 0.5));  // round half up
  SplitMix64 rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.next_below(n - i);
    std::swap(idx[i], idx[j]);
  }
  for (int i = 0; i < k; ++i) {
    LabeledSample& s = samples[idx[i]];
    s.label = class_set[rng.next_below(class_set.size())];
    s.is_noisy = true;
  }
}

std::vector<std::vector<LabeledSample>> epoch_batches(const std::vector<LabeledSample>& samples,
                                                      int batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) {
    throw InvalidInput("epoch_batches: batch_size must be >= 1");
  }
  std::vector<LabeledSample> order = samples;
  SplitMix64 rng(epoch_seed);
  shuffle(order, rng);
  std::vector<std::vector<LabeledSample>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Batch to_batch(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) {
    throw InvalidInput("to_batch: empty sample list");
  }
  const int dim = static_cast<int>(samples[0].features.size());
  Batch b;
  b.features = Matrix(static_cast<int>(samples.size()), dim);
  b.labels.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(samples[i].features.size()) != dim) {
      throw InvalidInput("to_batch: inconsistent feature widths");
    }
    std::copy(samples[i].features.begin(), samples[i].features.end(),
              b.features.row(static_cast<int>(i)));
    b.labels[i] = samples[i].label;
  }
  return b;
}

std::vector<LabeledSample> full_test_set(const TaskStream& stream) {
  std::vector<LabeledSample> all;
  for (const Task& task : stream.tasks) {
    all.insert(all.end(), task.test.begin(), task.test.end());
  }
  return all;
}

}  // namespace esmer
