#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esmer/learners.hpp"
#include "esmer/network.hpp"
#include "esmer/stream.hpp"

namespace esmer {

struct SourceConfig {
  enum class Type { kGaussian, kIdx };
  Type type = Type::kGaussian;
  GaussianSourceSpec gaussian;
  IdxPaths idx;
};

struct StreamConfig {
  std::string mode = "class_il";  // class_il | gcil_uniform | gcil_longtail
  int num_tasks = 5;
  int gcil_max_classes = 5;
  int gcil_samples_per_task = 500;
  double gcil_zipf_exponent = 1.0;
};

struct ProbeConfig {
  int drift_interval = 20;    // steps between drift samples; 0 disables
  bool memorization = true;   // sample per epoch
  int purity_interval = 50;   // offers between purity samples; 0 disables
  bool offer_log = false;     // record every candidate-gate decision
};

// Everything a run needs. Parsed from JSON with strict validation: unknown
// keys are rejected and every issue is reported at once.
struct ExperimentConfig {
  std::string method = "esmer";
  AblationFlags ablation;
  SourceConfig source;
  StreamConfig stream;
  double noise_rate = 0.0;
  HyperParams hp;
  std::vector<int> hidden_dims = {128, 128};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  ProbeConfig probes;
  std::string output_dir = "runs";
};

// Parses and validates; throws ConfigError listing every problem found.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

// Normalized JSON with every default filled in.
std::string config_to_json(const ExperimentConfig& config);

// Stable 16-hex-digit digest of the normalized config, ignoring output_dir.
std::string config_hash(const ExperimentConfig& config);

NetworkSpec network_spec_of(const ExperimentConfig& config);

// Builds the task stream for one seed: source pool, task split, label noise.
TaskStream build_stream(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace esmer
