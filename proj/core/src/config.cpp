#include "esmer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "esmer/errors.hpp"
#include "esmer/rng.hpp"

namespace esmer {

namespace {

using nlohmann::json;

constexpr std::uint64_t kNoiseStream = 0xE000;

class Validator {
 public:
  void complain(const std::string& msg) { issues_.push_back(msg); }

  void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      complain(where + ": expected an object");
      return;
    }
    for (const auto& item : j.items()) {
      if (allowed.find(item.key()) == allowed.end()) {
        complain(where + ": unknown key \"" + item.key() + "\"");
      }
    }
  }

  template <typename T>
  void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const json::exception&) {
      complain(where + "." + key + ": wrong type");
    }
  }

  void finish() const {
    if (!issues_.empty()) {
      throw ConfigError(issues_);
    }
  }

  bool ok() const { return issues_.empty(); }

 private:
  std::vector<std::string> issues_;
};

void parse_source(const json& j, SourceConfig& out, Validator& v) {
  std::string type = "gaussian";
  v.get(j, "type", type, "source");
  if (type == "gaussian") {
    out.type = SourceConfig::Type::kGaussian;
    v.check_keys(j, "source",
                 {"type", "num_classes", "dim", "separation", "within_std", "train_per_class",
                  "test_per_class"});
    v.get(j, "num_classes", out.gaussian.num_classes, "source");
    v.get(j, "dim", out.gaussian.dim, "source");
    v.get(j, "separation", out.gaussian.separation, "source");
    v.get(j, "within_std", out.gaussian.within_std, "source");
    v.get(j, "train_per_class", out.gaussian.train_per_class, "source");
    v.get(j, "test_per_class", out.gaussian.test_per_class, "source");
  } else if (type == "idx") {
    out.type = SourceConfig::Type::kIdx;
    v.check_keys(j, "source",
                 {"type", "train_images", "train_labels", "test_images", "test_labels"});
    v.get(j, "train_images", out.idx.train_images, "source");
    v.get(j, "train_labels", out.idx.train_labels, "source");
    v.get(j, "test_images", out.idx.test_images, "source");
    v.get(j, "test_labels", out.idx.test_labels, "source");
    for (const auto& [key, value] :
         {std::pair<const char*, const std::string&>{"train_images", out.idx.train_images},
          {"train_labels", out.idx.train_labels},
          {"test_images", out.idx.test_images},
          {"test_labels", out.idx.test_labels}}) {
      if (value.empty()) {
        v.complain(std::string("source.") + key + ": required for idx sources");
      }
    }
  } else {
    v.complain("source.type: must be \"gaussian\" or \"idx\"");
  }
}

void validate_semantics(const ExperimentConfig& c, Validator& v) {
  if (c.method != "esmer" && c.method != "er" && c.method != "logit_replay") {
    v.complain("method: must be one of esmer, er, logit_replay");
  }
  if (c.stream.mode != "class_il" && c.stream.mode != "gcil_uniform" &&
      c.stream.mode != "gcil_longtail") {
    v.complain("stream.mode: must be one of class_il, gcil_uniform, gcil_longtail");
  }
  if (c.stream.num_tasks < 1) {
    v.complain("stream.num_tasks: must be >= 1");
  }
  if (c.noise_rate < 0.0 || c.noise_rate > 1.0) {
    v.complain("noise_rate: must lie in [0, 1]");
  }
  if (c.seeds.empty()) {
    v.complain("seeds: at least one seed required");
  }
  for (int h : c.hidden_dims) {
    if (h < 1) v.complain("network.hidden_dims: entries must be >= 1");
  }
  if (c.source.type == SourceConfig::Type::kGaussian) {
    try {
      c.source.gaussian.validate();
    } catch (const InvalidInput& e) {
      v.complain(std::string("source: ") + e.what());
    }
    if (c.stream.mode == "class_il" && c.stream.num_tasks >= 1 &&
        c.source.gaussian.num_classes % c.stream.num_tasks != 0) {
      v.complain("stream: num_classes is not divisible by num_tasks in class_il mode");
    }
    if (c.stream.mode != "class_il" &&
        (c.stream.gcil_max_classes < 2 ||
         c.stream.gcil_max_classes > c.source.gaussian.num_classes)) {
      v.complain("stream.gcil_max_classes: must lie in [2, num_classes]");
    }
  }
  if (c.stream.mode != "class_il" && c.stream.gcil_samples_per_task < 2) {
    v.complain("stream.gcil_samples_per_task: must be >= 2");
  }
  if (!(c.stream.gcil_zipf_exponent > 0.0)) {
    v.complain("stream.gcil_zipf_exponent: must be > 0");
  }
  try {
    c.hp.validate();
  } catch (const InvalidInput& e) {
    v.complain(std::string("hyperparams: ") + e.what());
  }
  if (c.probes.drift_interval < 0) v.complain("probes.drift_interval: must be >= 0");
  if (c.probes.purity_interval < 0) v.complain("probes.purity_interval: must be >= 0");
  if (c.output_dir.empty()) v.complain("output_dir: must not be empty");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("not valid JSON: ") + e.what()});
  }

  Validator v;
  ExperimentConfig c;
  v.check_keys(j, "config",
               {"method", "ablation", "source", "stream", "noise_rate", "hyperparams", "network",
                "seeds", "probes", "output_dir"});
  v.get(j, "method", c.method, "config");
  v.get(j, "noise_rate", c.noise_rate, "config");
  v.get(j, "seeds", c.seeds, "config");
  v.get(j, "output_dir", c.output_dir, "config");

  if (j.is_object() && j.contains("ablation")) {
    const json& a = j["ablation"];
    v.check_keys(a, "ablation", {"error_weighting", "stable_model", "sensitive_sampling"});
    v.get(a, "error_weighting", c.ablation.error_weighting, "ablation");
    v.get(a, "stable_model", c.ablation.stable_model, "ablation");
    v.get(a, "sensitive_sampling", c.ablation.sensitive_sampling, "ablation");
  }
  if (j.is_object() && j.contains("source")) {
    parse_source(j["source"], c.source, v);
  }
  if (j.is_object() && j.contains("stream")) {
    const json& s = j["stream"];
    v.check_keys(s, "stream",
                 {"mode", "num_tasks", "gcil_max_classes", "gcil_samples_per_task",
                  "gcil_zipf_exponent"});
    v.get(s, "mode", c.stream.mode, "stream");
    v.get(s, "num_tasks", c.stream.num_tasks, "stream");
    v.get(s, "gcil_max_classes", c.stream.gcil_max_classes, "stream");
    v.get(s, "gcil_samples_per_task", c.stream.gcil_samples_per_task, "stream");
    v.get(s, "gcil_zipf_exponent", c.stream.gcil_zipf_exponent, "stream");
  }
  if (j.is_object() && j.contains("hyperparams")) {
    const json& h = j["hyperparams"];
    v.check_keys(h, "hyperparams",
                 {"lr", "ema_decay", "update_rate", "consistency_weight", "margin", "error_decay",
                  "warmup_epochs", "batch_size", "memory_batch_size", "buffer_capacity",
                  "epochs_per_task", "logit_mse_weight", "logit_ce_weight"});
    v.get(h, "lr", c.hp.lr, "hyperparams");
    v.get(h, "ema_decay", c.hp.ema_decay, "hyperparams");
    v.get(h, "update_rate", c.hp.update_rate, "hyperparams");
    v.get(h, "consistency_weight", c.hp.consistency_weight, "hyperparams");
    v.get(h, "margin", c.hp.margin, "hyperparams");
    v.get(h, "error_decay", c.hp.error_decay, "hyperparams");
    v.get(h, "warmup_epochs", c.hp.warmup_epochs, "hyperparams");
    v.get(h, "batch_size", c.hp.batch_size, "hyperparams");
    v.get(h, "memory_batch_size", c.hp.memory_batch_size, "hyperparams");
    v.get(h, "buffer_capacity", c.hp.buffer_capacity, "hyperparams");
    v.get(h, "epochs_per_task", c.hp.epochs_per_task, "hyperparams");
    v.get(h, "logit_mse_weight", c.hp.logit_mse_weight, "hyperparams");
    v.get(h, "logit_ce_weight", c.hp.logit_ce_weight, "hyperparams");
  }
  if (j.is_object() && j.contains("network")) {
    const json& n = j["network"];
    v.check_keys(n, "network", {"hidden_dims"});
    v.get(n, "hidden_dims", c.hidden_dims, "network");
  }
  if (j.is_object() && j.contains("probes")) {
    const json& p = j["probes"];
    v.check_keys(p, "probes",
                 {"drift_interval", "memorization", "purity_interval", "offer_log"});
    v.get(p, "drift_interval", c.probes.drift_interval, "probes");
    v.get(p, "memorization", c.probes.memorization, "probes");
    v.get(p, "purity_interval", c.probes.purity_interval, "probes");
    v.get(p, "offer_log", c.probes.offer_log, "probes");
  }

  if (v.ok()) {
    validate_semantics(c, v);
  }
  v.finish();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError({"cannot open config file: " + path});
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace {

json normalized_json(const ExperimentConfig& c) {
  json j;
  j["method"] = c.method;
  j["ablation"] = {{"error_weighting", c.ablation.error_weighting},
                   {"stable_model", c.ablation.stable_model},
                   {"sensitive_sampling", c.ablation.sensitive_sampling}};
  if (c.source.type == SourceConfig::Type::kGaussian) {
    j["source"] = {{"type", "gaussian"},
                   {"num_classes", c.source.gaussian.num_classes},
                   {"dim", c.source.gaussian.dim},
                   {"separation", c.source.gaussian.separation},
                   {"within_std", c.source.gaussian.within_std},
                   {"train_per_class", c.source.gaussian.train_per_class},
                   {"test_per_class", c.source.gaussian.test_per_class}};
  } else {
    j["source"] = {{"type", "idx"},
                   {"train_images", c.source.idx.train_images},
                   {"train_labels", c.source.idx.train_labels},
                   {"test_images", c.source.idx.test_images},
                   {"test_labels", c.source.idx.test_labels}};
  }
  j["stream"] = {{"mode", c.stream.mode},
                 {"num_tasks", c.stream.num_tasks},
                 {"gcil_max_classes", c.stream.gcil_max_classes},
                 {"gcil_samples_per_task", c.stream.gcil_samples_per_task},
                 {"gcil_zipf_exponent", c.stream.gcil_zipf_exponent}};
  j["noise_rate"] = c.noise_rate;
  j["hyperparams"] = {{"lr", c.hp.lr},
                      {"ema_decay", c.hp.ema_decay},
                      {"update_rate", c.hp.update_rate},
                      {"consistency_weight", c.hp.consistency_weight},
                      {"margin", c.hp.margin},
                      {"error_decay", c.hp.error_decay},
                      {"warmup_epochs", c.hp.warmup_epochs},
                      {"batch_size", c.hp.batch_size},
                      {"memory_batch_size", c.hp.memory_batch_size},
                      {"buffer_capacity", c.hp.buffer_capacity},
                      {"epochs_per_task", c.hp.epochs_per_task},
                      {"logit_mse_weight", c.hp.logit_mse_weight},
                      {"logit_ce_weight", c.hp.logit_ce_weight}};
  j["network"] = {{"hidden_dims", c.hidden_dims}};
  j["seeds"] = c.seeds;
  j["probes"] = {{"drift_interval", c.probes.drift_interval},
                 {"memorization", c.probes.memorization},
                 {"purity_interval", c.probes.purity_interval},
                 {"offer_log", c.probes.offer_log}};
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  return normalized_json(config).dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
  json j = normalized_json(config);
  j.erase("output_dir");
  const std::string text = j.dump();
  // FNV-1a 64
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

NetworkSpec network_spec_of(const ExperimentConfig& config) {
  NetworkSpec spec;
  spec.hidden_dims = config.hidden_dims;
  if (config.source.type == SourceConfig::Type::kGaussian) {
    spec.input_dim = config.source.gaussian.dim;
    spec.num_classes = config.source.gaussian.num_classes;
  } else {
    const SamplePool pool = load_idx(config.source.idx);
    spec.input_dim = pool.dim;
    spec.num_classes = pool.num_classes;
  }
  return spec;
}

TaskStream build_stream(const ExperimentConfig& config, std::uint64_t seed) {
  SamplePool pool;
  if (config.source.type == SourceConfig::Type::kGaussian) {
    pool = make_gaussian_source(config.source.gaussian, seed);
  } else {
    pool = load_idx(config.source.idx);
  }

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
                             derive_seed(seed, kNoiseStream + task.spec.task_index));
    }
  }
  return stream;
}

}  // namespace esmer
