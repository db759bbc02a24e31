#include "esmer/runner.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "esmer/checkpoint.hpp"
#include "esmer/csv.hpp"
#include "esmer/errors.hpp"
#include "esmer/rng.hpp"

namespace esmer {

namespace {

using nlohmann::json;

constexpr std::uint64_t kEpochStream = 0xF000;

std::uint64_t epoch_seed(std::uint64_t run_seed, int task, int epoch) {
  return derive_seed(derive_seed(run_seed, kEpochStream),
                     static_cast<std::uint64_t>(task) * 1000003ULL + epoch);
}

struct PoolAndSpec {
  SamplePool pool;
  NetworkSpec spec;
};

PoolAndSpec build_pool(const ExperimentConfig& config, std::uint64_t seed) {
  PoolAndSpec out;
  if (config.source.type == SourceConfig::Type::kGaussian) {
    out.pool = make_gaussian_source(config.source.gaussian, seed);
  } else {
    out.pool = load_idx(config.source.idx);
  }
  out.spec.input_dim = out.pool.dim;
  out.spec.num_classes = out.pool.num_classes;
  out.spec.hidden_dims = config.hidden_dims;
  return out;
}

TaskStream build_stream_from_pool(const ExperimentConfig& config, const SamplePool& pool,
                                  std::uint64_t seed) {
  TaskStream stream;
  if (config.stream.mode == "class_il") {
    stream = make_class_il_stream(pool, config.stream.num_tasks, seed);
  } else {
    const GcilWeighting weighting = config.stream.mode == "gcil_uniform"
                                        ? GcilWeighting::kUniform
                                        : GcilWeighting::kLongtail;
    stream = make_gcil_stream(pool, config.stream.num_tasks, config.stream.gcil_max_classes,
                              config.stream.gcil_samples_per_task, weighting, seed,
                              config.stream.gcil_zipf_exponent);
  }
  if (config.noise_rate > 0.0) {
    for (Task& task : stream.tasks) {
      inject_symmetric_noise(task.train, task.spec.class_set, config.noise_rate,
                             derive_seed(seed, 0xE000 + task.spec.task_index));
    }
  }
  return stream;
}

// True when the method keeps a consolidated model next to the working one.
bool dual_model(const Learner& learner) {
  return &learner.inference_params() != &learner.working_params();
}

void probe_drift(RunRecord& record, const Learner& learner, const Task& first_task,
                 std::int64_t global_step) {
  if (dual_model(learner)) {
    record.drift.push_back({global_step, "stable",
                            accuracy(learner.inference_params(), first_task.test, HeadMode::all())});
  }
  record.drift.push_back({global_step, "working",
                          accuracy(learner.working_params(), first_task.test, HeadMode::all())});
}

void probe_memorization(RunRecord& record, const Learner& learner, const Task& task, int task_index,
                        int epoch) {
  std::vector<LabeledSample> clean;
  std::vector<LabeledSample> noisy;
  for (const LabeledSample& s : task.train) {
    (s.is_noisy ? noisy : clean).push_back(s);
  }
  auto measure = [&](const ParamSet& params, const std::string& model) {
    MemorizationPoint point;
    point.task = task_index;
    point.epoch = epoch;
    point.model = model;
    point.clean_accuracy = clean.empty() ? 0.0 : accuracy(params, clean, HeadMode::all());
    point.noisy_accuracy = noisy.empty() ? 0.0 : accuracy(params, noisy, HeadMode::all());
    record.memorization.push_back(std::move(point));
  };
  if (dual_model(learner)) {
    measure(learner.inference_params(), "stable");
  }
  measure(learner.working_params(), "working");
}

}  // namespace

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();

  const PoolAndSpec ps = build_pool(config, seed);
  const TaskStream stream = build_stream_from_pool(config, ps.pool, seed);
  const int n_tasks = static_cast<int>(stream.tasks.size());

  std::unique_ptr<Learner> learner =
      make_learner(config.method, ps.spec, config.hp, config.ablation, seed);
  learner->set_record_offers(config.probes.offer_log);

  RunRecord record;
  record.config_hash = config_hash(config);
  record.seed = seed;
  record.method = config.method;
  record.run_id = record.config_hash.substr(0, 8) + "-seed" + std::to_string(seed);
  record.inference_model = dual_model(*learner) ? "stable" : "working";
  record.matrix = AccuracyMatrix(n_tasks);

  std::int64_t global_step = 0;
  std::int64_t next_purity_mark = config.probes.purity_interval;
  for (int t = 0; t < n_tasks; ++t) {
    const Task& task = stream.tasks[t];
    learner->start_task();
    std::int64_t task_local_step = 0;
    for (int epoch = 0; epoch < config.hp.epochs_per_task; ++epoch) {
      if (config.probes.memorization) {
        probe_memorization(record, *learner, task, t, epoch);
      }
      const auto batches = epoch_batches(task.train, config.hp.batch_size, epoch_seed(seed, t, epoch));
      for (const auto& batch : batches) {
        if (t == 1 && config.probes.drift_interval > 0 &&
            task_local_step % config.probes.drift_interval == 0) {
          probe_drift(record, *learner, stream.tasks[0], global_step);
        }
        learner->step(batch);
        ++global_step;
        ++task_local_step;
        if (config.probes.purity_interval > 0 &&
            learner->buffer().candidates_seen() >= next_purity_mark) {
          record.purity.push_back(
              {learner->buffer().candidates_seen(), learner->buffer().noise_fraction()});
          next_purity_mark = (learner->buffer().candidates_seen() / config.probes.purity_interval + 1) *
                             config.probes.purity_interval;
        }
      }
      learner->end_epoch();
    }
    const std::vector<double> row =
        evaluate_accuracy(learner->inference_params(), stream, EvalMode::kClassIl, t + 1);
    for (int j = 0; j <= t; ++j) {
      record.matrix.a[t][j] = row[j];
    }
  }

  record.final_class_il = record.matrix.a.empty() ? std::vector<double>{} : record.matrix.a.back();
  record.final_task_il =
      evaluate_accuracy(learner->inference_params(), stream, EvalMode::kTaskIl, n_tasks);
  record.final_class_il_working =
      evaluate_accuracy(learner->working_params(), stream, EvalMode::kClassIl, n_tasks);
  record.mean_class_il = mean_std(record.final_class_il).mean;
  record.mean_task_il = mean_std(record.final_task_il).mean;
  record.mean_class_il_working = mean_std(record.final_class_il_working).mean;
  if (n_tasks >= 2) {
    record.forget = forgetting(record.matrix);
  }

  // Recency is defined only when the task class sets partition the space
  // (always true for class-incremental splits, generally false for GCIL).
  std::vector<std::vector<int>> groups;
  for (const Task& task : stream.tasks) {
    groups.push_back(task.spec.class_set);
  }
  try {
    const std::vector<LabeledSample> all_test = full_test_set(stream);
    record.recency_stable = recency_profile(learner->inference_params(), all_test, groups);
    record.recency_working = recency_profile(learner->working_params(), all_test, groups);
  } catch (const InvalidInput&) {
    record.recency_stable.p.clear();
    record.recency_working.p.clear();
  }

  record.offer_log = learner->offer_log();
  {
    std::ostringstream dump;
    dump_buffer_csv(learner->buffer(), dump);
    record.buffer_dump = dump.str();
  }
  record.final_buffer_noise = learner->buffer().noise_fraction();
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

std::vector<RunRecord> run_all(const ExperimentConfig& config, int jobs,
                               std::vector<std::string>& failures) {
  if (jobs < 1) {
    throw InvalidInput("run_all: jobs must be >= 1");
  }
  struct Slot {
    bool ok = false;
    RunRecord record;
    std::string error;
  };
  std::vector<Slot> slots(config.seeds.size());
  auto work = [&](std::size_t i) {
    try {
      slots[i].record = run_single(config, config.seeds[i]);
      slots[i].ok = true;
    } catch (const std::exception& e) {
      slots[i].error = "seed " + std::to_string(config.seeds[i]) + ": " + e.what();
    }
  };
  if (jobs == 1) {
    for (std::size_t i = 0; i < slots.size(); ++i) work(i);
  } else {
    std::vector<std::future<void>> futures;
    std::size_t next = 0;
    while (next < slots.size() || !futures.empty()) {
      while (next < slots.size() && static_cast<int>(futures.size()) < jobs) {
        futures.push_back(std::async(std::launch::async, work, next));
        ++next;
      }
      futures.front().get();
      futures.erase(futures.begin());
    }
  }
  std::vector<RunRecord> records;
  for (const Slot& slot : slots) {
    if (slot.ok) {
      records.push_back(slot.record);
    } else {
      failures.push_back(slot.error);
    }
  }
  return records;
}

namespace {

const char* kMetricsHeader = "run_id,seed,method,metric,model,index_a,index_b,step,value\n";

void metric_row(std::ostream& out, const RunRecord& r, const std::string& metric,
                const std::string& model, const std::string& ia, const std::string& ib,
                const std::string& step, double value) {
  out << r.run_id << ',' << r.seed << ',' << r.method << ',' << metric << ',' << model << ',' << ia
      << ',' << ib << ',' << step << ',' << csv_double(value) << '\n';
}

void write_metrics_csv(const RunRecord& r, std::ostream& out) {
  out << kMetricsHeader;
  for (int i = 0; i < r.matrix.n_tasks; ++i) {
    for (int j = 0; j <= i; ++j) {
      metric_row(out, r, "accuracy_matrix", r.inference_model, std::to_string(i), std::to_string(j),
                 "", r.matrix.a[i][j]);
    }
  }
  for (std::size_t j = 0; j < r.final_class_il.size(); ++j) {
    metric_row(out, r, "final_class_il", r.inference_model, std::to_string(j), "", "",
               r.final_class_il[j]);
  }
  for (std::size_t j = 0; j < r.final_task_il.size(); ++j) {
    metric_row(out, r, "final_task_il", r.inference_model, std::to_string(j), "", "",
               r.final_task_il[j]);
  }
  for (std::size_t j = 0; j < r.final_class_il_working.size(); ++j) {
    metric_row(out, r, "final_class_il_working", "working", std::to_string(j), "", "",
               r.final_class_il_working[j]);
  }
  metric_row(out, r, "mean_class_il", r.inference_model, "", "", "", r.mean_class_il);
  metric_row(out, r, "mean_task_il", r.inference_model, "", "", "", r.mean_task_il);
  metric_row(out, r, "mean_class_il_working", "working", "", "", "", r.mean_class_il_working);
  for (std::size_t j = 0; j < r.forget.per_task.size(); ++j) {
    metric_row(out, r, "forgetting", r.inference_model, std::to_string(j), "", "",
               r.forget.per_task[j]);
  }
  if (!r.forget.per_task.empty()) {
    metric_row(out, r, "mean_forgetting", r.inference_model, "", "", "", r.forget.mean);
  }
  for (std::size_t t = 0; t < r.recency_stable.p.size(); ++t) {
    metric_row(out, r, "recency", "stable", std::to_string(t), "", "", r.recency_stable.p[t]);
  }
  for (std::size_t t = 0; t < r.recency_working.p.size(); ++t) {
    metric_row(out, r, "recency", "working", std::to_string(t), "", "", r.recency_working.p[t]);
  }
  for (const DriftPoint& p : r.drift) {
    metric_row(out, r, "drift", p.model, "", "", std::to_string(p.step), p.task1_accuracy);
  }
  for (const MemorizationPoint& p : r.memorization) {
    metric_row(out, r, "memorization_clean", p.model, std::to_string(p.task),
               std::to_string(p.epoch), "", p.clean_accuracy);
    metric_row(out, r, "memorization_noisy", p.model, std::to_string(p.task),
               std::to_string(p.epoch), "", p.noisy_accuracy);
  }
  for (const PurityPoint& p : r.purity) {
    metric_row(out, r, "purity", "", "", "", std::to_string(p.offers), p.noise_fraction);
  }
  metric_row(out, r, "buffer_noise_fraction", "", "", "", "", r.final_buffer_noise);
}

void write_offers_csv(const RunRecord& r, std::ostream& out) {
  out << "run_id,step,sample_id,stable_loss,mu,mu_initialized,offered,inserted\n";
  for (const OfferRecord& rec : r.offer_log) {
    out << r.run_id << ',' << rec.step << ',' << rec.sample_id << ',' << csv_double(rec.stable_loss)
        << ',' << csv_double(rec.mu) << ',' << (rec.mu_initialized ? 1 : 0) << ','
        << (rec.offered ? 1 : 0) << ',' << (rec.inserted ? 1 : 0) << '\n';
  }
}

// Digest of the experimental setting shared across methods; method, ablation,
// seeds and probes are intentionally excluded so method variants remain
// comparable.
std::string setting_signature(const ExperimentConfig& config) {
  json j = json::parse(config_to_json(config));
  j.erase("method");
  j.erase("ablation");
  j.erase("seeds");
  j.erase("probes");
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

std::filesystem::path write_outputs(const ExperimentConfig& config,
                                    const std::vector<RunRecord>& records,
                                    const std::vector<std::string>& failures) {
  const std::filesystem::path dir =
      std::filesystem::path(config.output_dir) / config_hash(config);
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << config_to_json(config) << '\n';
  }
  double wall_total = 0.0;
  json summary;
  summary["config_hash"] = config_hash(config);
  summary["setting_signature"] = setting_signature(config);
  summary["method"] = config.method;
  summary["seeds"] = config.seeds;
  summary["failures"] = failures;
  json recs = json::array();
  for (const RunRecord& r : records) {
    {
      std::ofstream out(dir / ("seed_" + std::to_string(r.seed) + "_metrics.csv"),
                        std::ios::binary);
      write_metrics_csv(r, out);
    }
    if (!r.offer_log.empty()) {
      std::ofstream out(dir / ("seed_" + std::to_string(r.seed) + "_offers.csv"),
                        std::ios::binary);
      write_offers_csv(r, out);
    }
    {
      std::ofstream out(dir / ("seed_" + std::to_string(r.seed) + "_buffer.csv"),
                        std::ios::binary);
      out << r.buffer_dump;
    }
    json jr;
    jr["seed"] = r.seed;
    jr["run_id"] = r.run_id;
    jr["mean_class_il"] = r.mean_class_il;
    jr["mean_task_il"] = r.mean_task_il;
    jr["mean_class_il_working"] = r.mean_class_il_working;
    jr["final_class_il"] = r.final_class_il;
    jr["final_task_il"] = r.final_task_il;
    jr["final_buffer_noise"] = r.final_buffer_noise;
    recs.push_back(std::move(jr));
    wall_total += r.wall_seconds;
  }
  summary["records"] = std::move(recs);

  std::vector<double> means;
  std::vector<double> task_il_means;
  for (const RunRecord& r : records) {
    means.push_back(r.mean_class_il);
    task_il_means.push_back(r.mean_task_il);
  }
  const MeanStd class_il = mean_std(means);
  const MeanStd task_il = mean_std(task_il_means);
  summary["aggregate"] = {{"class_il", {{"mean", class_il.mean}, {"std", class_il.std}}},
                          {"task_il", {{"mean", task_il.mean}, {"std", task_il.std}}}};
  summary["wall_seconds_total"] = wall_total;
  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << '\n';
  }
  return dir;
}

namespace {

struct LoadedSummary {
  std::string method;
  std::string signature;
  std::vector<std::uint64_t> seeds;
  std::vector<double> mean_class_il;       // per successful seed
  std::vector<double> mean_task_il;
  std::vector<std::vector<double>> final_class_il;  // per seed, per task
};

}  // namespace

CompareResult compare_runs(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) {
    throw InvalidInput("compare: no run directories given");
  }
  std::vector<LoadedSummary> summaries;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "summary.json");
    if (!in) {
      throw InvalidInput("compare: cannot open " + (dir / "summary.json").string());
    }
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError("compare: bad summary.json in " + dir.string() + ": " + e.what());
    }
    LoadedSummary s;
    s.method = j.at("method").get<std::string>();
    s.signature = j.at("setting_signature").get<std::string>();
    j.at("seeds").get_to(s.seeds);
    for (const json& r : j.at("records")) {
      s.mean_class_il.push_back(r.at("mean_class_il").get<double>());
      s.mean_task_il.push_back(r.at("mean_task_il").get<double>());
      s.final_class_il.push_back(r.at("final_class_il").get<std::vector<double>>());
    }
    summaries.push_back(std::move(s));
  }

  for (std::size_t i = 1; i < summaries.size(); ++i) {
    if (summaries[i].signature != summaries[0].signature) {
      throw InvalidInput("compare: run directories use different experimental settings (" +
                         run_dirs[i].string() + " differs from " + run_dirs[0].string() + ")");
    }
  }
  for (const LoadedSummary& s : summaries) {
    if (s.mean_class_il.size() < s.seeds.size()) {
      std::cerr << "warning: method " << s.method << " has results for " << s.mean_class_il.size()
                << " of " << s.seeds.size() << " seeds; comparing the available ones\n";
    }
  }

  std::ostringstream csv;
  csv << "method,metric,task,mean,std,n\n";
  std::ostringstream text;
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %5s  %-22s %-22s\n", "method", "n", "class_il",
                "task_il");
  text << line;
  for (const LoadedSummary& s : summaries) {
    const MeanStd ci = mean_std(s.mean_class_il);
    const MeanStd ti = mean_std(s.mean_task_il);
    const int n = static_cast<int>(s.mean_class_il.size());
    std::snprintf(line, sizeof(line), "%-14s %5d  %8.4f +- %-10.4f %8.4f +- %-10.4f\n",
                  s.method.c_str(), n, ci.mean, ci.std, ti.mean, ti.std);
    text << line;
    csv << s.method << ",final_class_il_mean,," << csv_double(ci.mean) << ','
        << csv_double(ci.std) << ',' << n << '\n';
    csv << s.method << ",final_task_il_mean,," << csv_double(ti.mean) << ',' << csv_double(ti.std)
        << ',' << n << '\n';
    if (!s.final_class_il.empty()) {
      const std::size_t n_tasks = s.final_class_il[0].size();
      for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<double> column;
        for (const auto& row : s.final_class_il) {
          if (t < row.size()) column.push_back(row[t]);
        }
        const MeanStd m = mean_std(column);
        csv << s.method << ",final_class_il_task," << t << ',' << csv_double(m.mean) << ','
            << csv_double(m.std) << ',' << column.size() << '\n';
      }
    }
  }
  return {text.str(), csv.str()};
}

namespace {

struct MetricRow {
  std::string run_id;
  std::string seed;
  std::string method;
  std::string metric;
  std::string model;
  std::string index_a;
  std::string index_b;
  std::string step;
  std::string value;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

std::vector<MetricRow> load_metric_rows(const std::filesystem::path& run_dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(run_dir)) {
    throw InvalidInput("plotdata: not a directory: " + run_dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("seed_", 0) == 0 && name.size() > 12 &&
        name.compare(name.size() - 12, 12, "_metrics.csv") == 0) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw InvalidInput("plotdata: no seed metric CSVs in " + run_dir.string());
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricRow> rows;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 9) {
        throw FormatError("plotdata: malformed row in " + file.string());
      }
      rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]});
    }
  }
  return rows;
}

}  // namespace

std::string plot_data(const std::filesystem::path& run_dir, const std::string& figure) {
  const std::vector<MetricRow> rows = load_metric_rows(run_dir);
  auto select = [&](const std::string& metric) {
    std::vector<MetricRow> out;
    for (const MetricRow& r : rows) {
      if (r.metric == metric) out.push_back(r);
    }
    return out;
  };

  std::ostringstream out;
  if (figure == "drift") {
    const auto data = select("drift");
    if (data.empty()) {
      throw InvalidInput("plotdata: no drift trace recorded; enable probes.drift_interval");
    }
    out << "run_id,method,model,step,task1_accuracy\n";
    for (const auto& r : data) {
      out << r.run_id << ',' << r.method << ',' << r.model << ',' << r.step << ',' << r.value
          << '\n';
    }
  } else if (figure == "recency") {
    const auto data = select("recency");
    if (data.empty()) {
      throw InvalidInput(
          "plotdata: no recency profile recorded; requires a class-partitioning stream "
          "(stream.mode = class_il)");
    }
    out << "run_id,method,model,task,probability\n";
    for (const auto& r : data) {
      out << r.run_id << ',' << r.method << ',' << r.model << ',' << r.index_a << ',' << r.value
          << '\n';
    }
  } else if (figure == "purity") {
    const auto data = select("purity");
    if (data.empty()) {
      throw InvalidInput("plotdata: no purity trace recorded; enable probes.purity_interval");
    }
    out << "run_id,method,offer_count,noise_fraction\n";
    for (const auto& r : data) {
      out << r.run_id << ',' << r.method << ',' << r.step << ',' << r.value << '\n';
    }
  } else if (figure == "memorization") {
    const auto clean = select("memorization_clean");
    const auto noisy = select("memorization_noisy");
    if (clean.empty()) {
      throw InvalidInput("plotdata: no memorization trace recorded; enable probes.memorization");
    }
    out << "run_id,method,model,task,epoch,subset,accuracy\n";
    for (const auto& r : clean) {
      out << r.run_id << ',' << r.method << ',' << r.model << ',' << r.index_a << ',' << r.index_b
          << ",clean," << r.value << '\n';
    }
    for (const auto& r : noisy) {
      out << r.run_id << ',' << r.method << ',' << r.model << ',' << r.index_a << ',' << r.index_b
          << ",noisy," << r.value << '\n';
    }
  } else if (figure == "taskwise") {
    const auto data = select("accuracy_matrix");
    if (data.empty()) {
      throw InvalidInput("plotdata: no accuracy matrix found in " + run_dir.string());
    }
    out << "run_id,method,after_task,eval_task,accuracy\n";
    for (const auto& r : data) {
      out << r.run_id << ',' << r.method << ',' << r.index_a << ',' << r.index_b << ',' << r.value
          << '\n';
    }
  } else {
    throw InvalidInput("plotdata: unknown figure \"" + figure +
                       "\" (expected drift, recency, purity, memorization or taskwise)");
  }
  return out.str();
}

}  // namespace esmer
