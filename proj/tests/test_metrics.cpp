#include <cmath>

#include "doctest.h"
#include "esmer/errors.hpp"
#include "esmer/metrics.hpp"
#include "esmer/rng.hpp"
#include "esmer/stream.hpp"

using namespace esmer;

namespace {

SamplePool tight_pool(int classes, int dim, std::uint64_t seed, double std_dev = 0.0) {
  GaussianSourceSpec spec;
  spec.num_classes = classes;
  spec.dim = dim;
  spec.within_std = std_dev;
  spec.train_per_class = 10;
  spec.test_per_class = 10;
  return make_gaussian_source(spec, seed);
}

// Exact nearest-mean linear classifier for a zero-spread pool:
// logits_c = mean_c . x - |mean_c|^2 / 2.
ParamSet nearest_mean_classifier(const SamplePool& pool) {
  ParamSet params;
  params.layers.resize(1);
  params.layers[0].weights = Matrix(pool.dim, pool.num_classes);
  params.layers[0].bias.assign(pool.num_classes, 0.0);
  for (int c = 0; c < pool.num_classes; ++c) {
    const auto& mean = pool.train_by_class[c][0].features;
    double norm2 = 0.0;
    for (int d = 0; d < pool.dim; ++d) {
      params.layers[0].weights(d, c) = mean[d];
      norm2 += mean[d] * mean[d];
    }
    params.layers[0].bias[c] = -0.5 * norm2;
  }
  return params;
}

}  // namespace

TEST_CASE("accuracy: exact separability gives 1.0") {
  const SamplePool pool = tight_pool(6, 12, 3);
  const ParamSet params = nearest_mean_classifier(pool);
  const TaskStream stream = make_class_il_stream(pool, 1, 1);
  CHECK(accuracy(params, stream.tasks[0].test, HeadMode::all()) == 1.0);
}

TEST_CASE("accuracy: untrained network sits near chance") {
  // Binomial reasoning needs per-sample independence: with near-zero class
  // separation the labels are independent of the features, so an untrained
  // network is correct with probability exactly 1/C per sample.
  GaussianSourceSpec spec;
  spec.num_classes = 4;
  spec.dim = 8;
  spec.separation = 1e-6;
  spec.within_std = 1.0;
  spec.train_per_class = 10;
  spec.test_per_class = 250;  // 1000 test samples
  const SamplePool pool = make_gaussian_source(spec, 9);
  const TaskStream stream = make_class_il_stream(pool, 1, 2);
  const ParamSet params = init_params(NetworkSpec{8, {16}, 4}, 77);
  const double acc = accuracy(params, stream.tasks[0].test, HeadMode::all());
  // 3 binomial SEs around 0.25 for n = 1000
  CHECK(acc > 0.25 - 3 * 0.0137);
  CHECK(acc < 0.25 + 3 * 0.0137);
}

TEST_CASE("task-il accuracy dominates class-il accuracy pointwise") {
  GaussianSourceSpec spec;
  spec.num_classes = 8;
  spec.dim = 6;
  spec.separation = 2.0;
  spec.train_per_class = 10;
  spec.test_per_class = 40;
  const SamplePool pool = make_gaussian_source(spec, 21);
  const TaskStream stream = make_class_il_stream(pool, 4, 3);
  const ParamSet params = init_params(NetworkSpec{6, {10}, 8}, 5);
  const auto class_il = evaluate_accuracy(params, stream, EvalMode::kClassIl, 4);
  const auto task_il = evaluate_accuracy(params, stream, EvalMode::kTaskIl, 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(task_il[t] >= class_il[t]);
  }
}

TEST_CASE("recency: uniform logits spread mass evenly over equal tasks") {
  const SamplePool pool = tight_pool(10, 5, 4);
  const TaskStream stream = make_class_il_stream(pool, 5, 1);
  ParamSet zeros;
  zeros.layers.resize(1);
  zeros.layers[0].weights = Matrix(5, 10);
  zeros.layers[0].bias.assign(10, 0.0);
  std::vector<std::vector<int>> groups;
  for (const auto& task : stream.tasks) groups.push_back(task.spec.class_set);
  const RecencyProfile p = recency_profile(zeros, full_test_set(stream), groups);
  REQUIRE(p.p.size() == 5);
  for (double v : p.p) {
    CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("recency: saturated logits concentrate mass on one task") {
  const SamplePool pool = tight_pool(4, 3, 6);
  const TaskStream stream = make_class_il_stream(pool, 2, 1);
  ParamSet params;
  params.layers.resize(1);
  params.layers[0].weights = Matrix(3, 4);
  params.layers[0].bias.assign(4, 0.0);
  params.layers[0].bias[3] = 50.0;  // class 3 lives in task 1
  std::vector<std::vector<int>> groups;
  for (const auto& task : stream.tasks) groups.push_back(task.spec.class_set);
  const RecencyProfile p = recency_profile(params, full_test_set(stream), groups);
  CHECK(p.p[1] > 0.999);
}

TEST_CASE("recency: mass sums to one on random inputs; non-partitions rejected") {
  const SamplePool pool = tight_pool(6, 4, 8, 0.5);
  const TaskStream stream = make_class_il_stream(pool, 3, 1);
  const ParamSet params = init_params(NetworkSpec{4, {7}, 6}, 3);
  std::vector<std::vector<int>> groups;
  for (const auto& task : stream.tasks) groups.push_back(task.spec.class_set);
  const RecencyProfile p = recency_profile(params, full_test_set(stream), groups);
  double sum = 0.0;
  for (double v : p.p) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-9);

  auto overlapping = groups;
  overlapping[0] = {0, 1, 2};  // class 2 now appears twice
  CHECK_THROWS_AS(recency_profile(params, full_test_set(stream), overlapping), InvalidInput);
  auto incomplete = groups;
  incomplete[2] = {4};  // class 5 missing
  CHECK_THROWS_AS(recency_profile(params, full_test_set(stream), incomplete), InvalidInput);
}

TEST_CASE("forgetting: constant, two-task drop, monotone improvement, degenerate size") {
  AccuracyMatrix constant(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) constant.a[i][j] = 0.8;
  }
  const ForgettingResult none = forgetting(constant);
  for (double f : none.per_task) CHECK(f == 0.0);
  CHECK(none.mean == 0.0);

  AccuracyMatrix two(2);
  two.a[0][0] = 0.9;
  two.a[1][0] = 0.6;
  two.a[1][1] = 0.95;
  const ForgettingResult drop = forgetting(two);
  REQUIRE(drop.per_task.size() == 1);
  CHECK(drop.per_task[0] == doctest::Approx(0.3).epsilon(1e-12));

  AccuracyMatrix improving(3);
  improving.a[0][0] = 0.5;
  improving.a[1][0] = 0.6;
  improving.a[2][0] = 0.7;
  improving.a[1][1] = 0.5;
  improving.a[2][1] = 0.9;
  improving.a[2][2] = 0.8;
  const ForgettingResult up = forgetting(improving);
  CHECK(up.per_task[0] == 0.0);
  CHECK(up.per_task[1] == 0.0);

  AccuracyMatrix tiny(1);
  CHECK_THROWS_AS(forgetting(tiny), InvalidInput);
}

TEST_CASE("mean_std: population convention") {
  const MeanStd m = mean_std({0.6, 0.8});
  CHECK(m.mean == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(m.std == doctest::Approx(0.1).epsilon(1e-12));
  const MeanStd single = mean_std({0.4});
  CHECK(single.mean == 0.4);
  CHECK(single.std == 0.0);
}
