#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "esmer/config.hpp"
#include "esmer/metrics.hpp"

namespace esmer {

// Everything measured over one seeded run.
struct RunRecord {
  std::string run_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string method;
  std::string inference_model;  // "stable" or "working"

  AccuracyMatrix matrix;  // inference model, all-classes head
  std::vector<double> final_class_il;
  std::vector<double> final_task_il;
  std::vector<double> final_class_il_working;
  double mean_class_il = 0.0;
  double mean_task_il = 0.0;
  double mean_class_il_working = 0.0;
  ForgettingResult forget;

  RecencyProfile recency_stable;   // empty unless the class groups partition the space
  RecencyProfile recency_working;

  std::vector<DriftPoint> drift;
  std::vector<MemorizationPoint> memorization;
  std::vector<PurityPoint> purity;
  std::vector<OfferRecord> offer_log;
  std::string buffer_dump;  // final buffer contents as CSV
  double final_buffer_noise = 0.0;

  double wall_seconds = 0.0;  // never written to CSV
};

// One full seeded run: stream construction, training with probes, metrics.
RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed);

// All configured seeds; failed seeds abort individually and land in
// `failures` ("seed N: message"). jobs > 1 runs seeds concurrently; per-seed
// state is fully isolated so results match sequential execution exactly.
std::vector<RunRecord> run_all(const ExperimentConfig& config, int jobs,
                               std::vector<std::string>& failures);

// Writes <output_dir>/<config_hash>/ with config.json, per-seed CSVs and
// summary.json; returns the directory. Every CSV byte is a pure function of
// (config, seed).
std::filesystem::path write_outputs(const ExperimentConfig& config,
                                    const std::vector<RunRecord>& records,
                                    const std::vector<std::string>& failures);

// Cross-method summary over previously written run directories. All
// directories must share the experimental setting (source, stream, noise,
// network, protocol); the comparison is emitted as an aligned text table and
// a CSV.
struct CompareResult {
  std::string text_table;
  std::string csv;
};
CompareResult compare_runs(const std::vector<std::filesystem::path>& run_dirs);

// One tidy CSV per figure, reshaped from a run directory's metric CSVs.
// figure is one of: drift, recency, purity, memorization, taskwise.
// Throws when the required probe was disabled, naming the config key.
std::string plot_data(const std::filesystem::path& run_dir, const std::string& figure);

}  // namespace esmer
