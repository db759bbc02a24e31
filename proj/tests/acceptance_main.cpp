// Acceptance suite: every criterion below prints one PASS/FAIL line; the
// process exits nonzero if any fail. Criteria 6-10 run full seeded
// experiments, so expect a few minutes of wall time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "esmer/buffer.hpp"
#include "esmer/config.hpp"
#include "esmer/error_memory.hpp"
#include "esmer/errors.hpp"
#include "esmer/learners.hpp"
#include "esmer/network.hpp"
#include "esmer/runner.hpp"

namespace {

using namespace esmer;

constexpr int kSeedCount = 5;

std::vector<std::uint64_t> five_seeds() { return {1, 2, 3, 4, 5}; }

ExperimentConfig clean_default() {
  ExperimentConfig c;  // desk-scale defaults
  c.seeds = five_seeds();
  c.probes.drift_interval = 25;  // puts a sample exactly 50 steps past the task-2 onset
  return c;
}

ExperimentConfig noisy_default() {
  ExperimentConfig c = clean_default();
  c.noise_rate = 0.4;
  c.hp.buffer_capacity = 200;
  c.probes.offer_log = true;
  return c;
}

// Wider tasks for the purity comparison: four classes per task keep label
// collisions (noise draws that hit the true label) at 25% of the corrupted
// samples, so a loss gate has real headroom below the stream's noise level.
ExperimentConfig purity_config(const std::string& method) {
  ExperimentConfig c = clean_default();
  c.method = method;
  c.source.gaussian.num_classes = 20;
  c.source.gaussian.train_per_class = 250;
  c.source.gaussian.test_per_class = 50;
  c.noise_rate = 0.4;
  c.hp.buffer_capacity = 200;
  return c;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Cached experiment results shared across criteria.
struct Runs {
  std::vector<RunRecord> esmer_clean;
  std::vector<RunRecord> er_clean;
  std::vector<RunRecord> esmer_noisy;
  std::vector<RunRecord> esmer_purity;
  std::vector<RunRecord> er_purity;
};

std::vector<RunRecord> run_or_die(const ExperimentConfig& config) {
  std::vector<std::string> failures;
  std::vector<RunRecord> records = run_all(config, kSeedCount, failures);
  if (!failures.empty()) {
    std::string msg = "run failed:";
    for (const auto& f : failures) msg += " " + f;
    throw NumericFault(msg);
  }
  return records;
}

double drift_at_local_50(const RunRecord& record, const std::string& model) {
  // The drift probe samples at task-local steps 0, 25, 50, ... of task 2;
  // entries carry global steps, so local 50 = onset + 50.
  std::int64_t onset = -1;
  for (const auto& p : record.drift) {
    if (onset < 0 || p.step < onset) onset = p.step;
  }
  for (const auto& p : record.drift) {
    if (p.step == onset + 50 && p.model == model) return p.task1_accuracy;
  }
  throw InvalidInput("drift sample at onset+50 missing for model " + model);
}

double population_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / v.size());
}

bool criterion_1_gradcheck(std::string& detail) {
  const Timer timer;
  const double err = grad_check(NetworkSpec{4, {8, 8}, 3}, 1);
  const double elapsed = timer.seconds();
  std::ostringstream out;
  out << "max relative error " << err << " (limit 1e-6), " << elapsed << "s (limit 10s)";
  detail = out.str();
  return err < 1e-6 && elapsed < 10.0;
}

bool criterion_2_reservoir(std::string& detail) {
  const Timer timer;
  const int capacity = 20, items = 200, trials = 20000;
  std::vector<int> hits(items, 0);
  for (int t = 0; t < trials; ++t) {
    EpisodicBuffer buffer(capacity, 70000 + t);
    for (int i = 0; i < items; ++i) {
      BufferItem item;
      item.sample.id = i;
      buffer.offer(std::move(item));
    }
    for (const auto& item : buffer.items()) ++hits[item.sample.id];
  }
  double lo = 1.0, hi = 0.0;
  for (int h : hits) {
    const double f = static_cast<double>(h) / trials;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  const double elapsed = timer.seconds();
  std::ostringstream out;
  out << "inclusion frequencies in [" << lo << ", " << hi << "] (limits [0.09, 0.11]), " << elapsed
      << "s (limit 30s)";
  detail = out.str();
  return lo >= 0.09 && hi <= 0.11 && elapsed < 30.0;
}

bool criterion_3_error_gate(const Runs& runs, std::string& detail) {
  int violations = 0;
  std::size_t decisions = 0;
  const double margin = noisy_default().hp.margin;
  for (const auto& record : runs.esmer_noisy) {
    violations += count_gate_violations(record.offer_log, margin);
    decisions += record.offer_log.size();
  }
  std::ostringstream out;
  out << violations << " violations over " << decisions << " logged gate decisions";
  detail = out.str();
  return decisions > 0 && violations == 0;
}

bool criterion_4_arithmetic(std::string& detail) {
  ErrorMemory weighting;
  weighting.mu = 1.0;
  weighting.margin = 1.2;
  weighting.initialized = true;
  const double lambda = compute_weights({2.0}, weighting)[0];
  const double lambda_expected = 1.0 / 2.0;  // mu / loss

  const double filtered = filter_outliers({1.0, 1.0, 1.0, 10.0});
  const double filtered_expected = (1.0 + 1.0 + 1.0) / 3.0;  // 10 sits past mean + std

  ErrorMemory momentum;
  momentum.mu = 1.0;
  momentum.decay = 0.99;
  momentum.initialized = true;
  const double updated = update(momentum, 2.0).mu;
  const double updated_expected = 0.99 * 1.0 + 0.01 * 2.0;

  std::ostringstream out;
  out << "lambda " << lambda << ", filtered mean " << filtered << ", updated mu " << updated;
  detail = out.str();
  return std::abs(lambda - lambda_expected) < 1e-12 &&
         std::abs(filtered - filtered_expected) < 1e-12 &&
         std::abs(updated - updated_expected) < 1e-12;
}

bool criterion_5_reduction(std::string& detail) {
  ExperimentConfig c;
  c.source.gaussian.train_per_class = 100;
  c.source.gaussian.test_per_class = 10;
  c.hp.epochs_per_task = 2;
  const std::uint64_t seed = 7;
  const TaskStream stream = build_stream(c, seed);
  const NetworkSpec spec = network_spec_of(c);

  AblationFlags all_off;
  all_off.error_weighting = false;
  all_off.stable_model = false;
  all_off.sensitive_sampling = false;
  EsmerLearner esmer_off(spec, c.hp, all_off, seed);
  ErLearner er(spec, c.hp, seed);

  int epochs_checked = 0;
  for (const Task& task : stream.tasks) {
    esmer_off.start_task();
    er.start_task();
    for (int epoch = 0; epoch < c.hp.epochs_per_task; ++epoch) {
      // Any shared batch order works; both learners must see the same stream.
      const std::uint64_t es = derive_seed(
          seed, static_cast<std::uint64_t>(task.spec.task_index) * 1000 + epoch);
      for (const auto& batch : epoch_batches(task.train, c.hp.batch_size, es)) {
        esmer_off.step(batch);
        er.step(batch);
      }
      esmer_off.end_epoch();
      er.end_epoch();
      if (!bitwise_equal(esmer_off.working_params(), er.working_params())) {
        detail = "parameter trajectories diverged at task " +
                 std::to_string(task.spec.task_index) + ", epoch " + std::to_string(epoch);
        return false;
      }
      ++epochs_checked;
    }
  }
  if (esmer_off.buffer().size() != er.buffer().size()) {
    detail = "buffer occupancy diverged";
    return false;
  }
  for (int i = 0; i < er.buffer().size(); ++i) {
    if (esmer_off.buffer().items()[i].sample.id != er.buffer().items()[i].sample.id) {
      detail = "buffer contents diverged at slot " + std::to_string(i);
      return false;
    }
  }
  detail = "bitwise-identical parameters across " + std::to_string(epochs_checked) +
           " epoch boundaries, identical buffers";
  return true;
}

bool criterion_6_purity(const Runs& runs, double elapsed, std::string& detail) {
  int wins = 0;
  std::ostringstream pairs;
  for (int i = 0; i < kSeedCount; ++i) {
    const double es = runs.esmer_purity[i].final_buffer_noise;
    const double er = runs.er_purity[i].final_buffer_noise;
    if (es <= er - 0.10) ++wins;
    pairs << " " << es << "/" << er;
  }
  std::ostringstream out;
  out << wins << "/5 seeds with a >=10pp purity gap (esmer/er:" << pairs.str() << "), " << elapsed
      << "s (limit 300s)";
  detail = out.str();
  return wins >= 4 && elapsed < 300.0;
}

bool criterion_7_ordering(const Runs& runs, std::string& detail) {
  int wins = 0;
  std::ostringstream pairs;
  for (int i = 0; i < kSeedCount; ++i) {
    const double es = runs.esmer_clean[i].mean_class_il;
    const double er = runs.er_clean[i].mean_class_il;
    if (es >= er) ++wins;
    pairs << " " << es << "/" << er;
  }
  detail = std::to_string(wins) + "/5 seeds with esmer >= er (esmer/er:" + pairs.str() + ")";
  return wins >= 4;
}

bool criterion_8_drift(const Runs& runs, std::string& detail) {
  int wins = 0;
  std::ostringstream pairs;
  for (int i = 0; i < kSeedCount; ++i) {
    const double es = drift_at_local_50(runs.esmer_clean[i], "stable");
    const double er = drift_at_local_50(runs.er_clean[i], "working");
    if (es > er) ++wins;
    pairs << " " << es << "/" << er;
  }
  detail = std::to_string(wins) +
           "/5 seeds with higher task-1 accuracy 50 steps into task 2 (esmer/er:" + pairs.str() +
           ")";
  return wins >= 4;
}

bool criterion_9_recency(const Runs& runs, std::string& detail) {
  int wins = 0;
  std::ostringstream pairs;
  for (int i = 0; i < kSeedCount; ++i) {
    const double es = population_std(runs.esmer_clean[i].recency_stable.p);
    const double er = population_std(runs.er_clean[i].recency_stable.p);
    if (es < er) ++wins;
    pairs << " " << es << "/" << er;
  }
  detail = std::to_string(wins) + "/5 seeds with flatter recency profiles (esmer/er:" +
           pairs.str() + ")";
  return wins >= 4;
}

bool criterion_10_stable_vs_working(const Runs& runs, std::string& detail) {
  int wins = 0;
  std::ostringstream pairs;
  for (int i = 0; i < kSeedCount; ++i) {
    const double stable = runs.esmer_noisy[i].mean_class_il;
    const double working = runs.esmer_noisy[i].mean_class_il_working;
    if (stable >= working) ++wins;
    pairs << " " << stable << "/" << working;
  }
  detail = std::to_string(wins) + "/5 seeds with stable >= working (stable/working:" +
           pairs.str() + ")";
  return wins >= 3;
}

bool criterion_11_ema_contraction(std::string& detail) {
  const NetworkSpec spec{8, {16}, 4};
  const ParamSet working = init_params(spec, 3);
  ParamSet stable = init_params(spec, 4);
  const double alpha = 0.999;
  const double initial = max_abs_gap(stable, working);
  double expected = initial;
  double worst = 0.0;
  for (int k = 1; k <= 100; ++k) {
    stable = ema_update(stable, working, alpha);
    expected *= alpha;
    worst = std::max(worst, std::abs(max_abs_gap(stable, working) - expected));
  }
  std::ostringstream out;
  out << "worst deviation from alpha^k decay: " << worst << " (limit 1e-10)";
  detail = out.str();
  return worst < 1e-10;
}

bool criterion_12_reproducibility(std::string& detail) {
  ExperimentConfig c;
  c.source.gaussian.num_classes = 4;
  c.source.gaussian.dim = 8;
  c.source.gaussian.train_per_class = 60;
  c.source.gaussian.test_per_class = 20;
  c.stream.num_tasks = 2;
  c.hp.epochs_per_task = 2;
  c.hp.buffer_capacity = 30;
  c.hidden_dims = {16};
  c.seeds = {1, 2};
  c.noise_rate = 0.25;
  c.probes.offer_log = true;
  c.probes.purity_interval = 20;

  const auto base = std::filesystem::temp_directory_path() / "esmer_acceptance_repro";
  std::filesystem::remove_all(base);
  std::filesystem::path dirs[2];
  for (int round = 0; round < 2; ++round) {
    c.output_dir = (base / ("round" + std::to_string(round))).string();
    std::vector<std::string> failures;
    const auto records = run_all(c, 2, failures);
    if (!failures.empty()) {
      detail = "run failed";
      return false;
    }
    dirs[round] = write_outputs(c, records, failures);
  }
  int compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dirs[0])) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream a(entry.path(), std::ios::binary);
    std::ifstream b(dirs[1] / entry.path().filename(), std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (sa.str() != sb.str() || sa.str().empty()) {
      detail = "CSV bytes differ: " + entry.path().filename().string();
      return false;
    }
    ++compared;
  }
  detail = std::to_string(compared) + " CSV files byte-identical across executions";
  return compared >= 4;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int number, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d. %s - %s\n", ok ? "PASS" : "FAIL", number, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  try {
    std::string detail;

    report(1, "gradient correctness", criterion_1_gradcheck(detail), detail);
    report(2, "reservoir uniformity", criterion_2_reservoir(detail), detail);
    report(4, "weighting/filter/momentum arithmetic", criterion_4_arithmetic(detail), detail);
    report(5, "all-off ablation reduces to plain replay", criterion_5_reduction(detail), detail);
    report(11, "stable-model contraction at rate 0.999", criterion_11_ema_contraction(detail),
           detail);

    Runs runs;
    runs.esmer_clean = run_or_die(clean_default());
    ExperimentConfig er_clean = clean_default();
    er_clean.method = "er";
    runs.er_clean = run_or_die(er_clean);
    runs.esmer_noisy = run_or_die(noisy_default());
    const Timer purity_timer;
    runs.esmer_purity = run_or_die(purity_config("esmer"));
    runs.er_purity = run_or_die(purity_config("er"));
    const double purity_elapsed = purity_timer.seconds();

    report(3, "error-gate exactness over offer logs", criterion_3_error_gate(runs, detail),
           detail);
    report(6, "buffer purity under label noise", criterion_6_purity(runs, purity_elapsed, detail),
           detail);
    report(7, "class-il ordering esmer vs er", criterion_7_ordering(runs, detail), detail);
    report(8, "drift mitigation at the task boundary", criterion_8_drift(runs, detail), detail);
    report(9, "recency-bias reduction", criterion_9_recency(runs, detail), detail);
    report(10, "stable model beats working model under noise",
           criterion_10_stable_vs_working(runs, detail), detail);
    report(12, "byte-identical reruns", criterion_12_reproducibility(detail), detail);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
    return 1;
  }

  if (failures == 0) {
    std::printf("acceptance: all criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criteria failed\n", failures);
  return 1;
}
