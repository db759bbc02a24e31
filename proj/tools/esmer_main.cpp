// Command-line front end: config-driven experiment runs, cross-method
// comparison tables, figure data extraction, and quick self-diagnostics.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "esmer/buffer.hpp"
#include "esmer/checkpoint.hpp"
#include "esmer/config.hpp"
#include "esmer/error_memory.hpp"
#include "esmer/errors.hpp"
#include "esmer/network.hpp"
#include "esmer/runner.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& kind, const std::string& message,
                const std::vector<std::string>& issues = {}) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  if (!issues.empty()) {
    j["issues"] = issues;
  }
  std::cerr << j.dump() << std::endl;
}

int cmd_run(const std::string& config_path, int jobs) {
  const esmer::ExperimentConfig config = esmer::load_config_file(config_path);
  std::vector<std::string> failures;
  const std::vector<esmer::RunRecord> records = esmer::run_all(config, jobs, failures);
  for (const std::string& f : failures) {
    std::cerr << "warning: run failed: " << f << '\n';
  }
  if (records.empty()) {
    emit_error("run_failed", "every seed failed", failures);
    return 1;
  }
  const std::filesystem::path dir = esmer::write_outputs(config, records, failures);
  for (const auto& r : records) {
    std::printf("seed %llu  class_il %.4f  task_il %.4f  (%.1fs)\n",
                static_cast<unsigned long long>(r.seed), r.mean_class_il, r.mean_task_il,
                r.wall_seconds);
  }
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const esmer::CompareResult result = esmer::compare_runs(paths);
  std::cout << result.text_table;
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw esmer::InvalidInput("compare: cannot write " + out_path);
  }
  out << result.csv;
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

int cmd_plotdata(const std::string& dir, const std::string& figure, const std::string& out_dir) {
  const std::string csv = esmer::plot_data(dir, figure);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path out_path = std::filesystem::path(out_dir) / (figure + ".csv");
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw esmer::InvalidInput("plotdata: cannot write " + out_path.string());
  }
  out << csv;
  std::printf("wrote %s\n", out_path.string().c_str());
  return 0;
}

int cmd_gradcheck(int input_dim, std::vector<int> hidden, int classes, std::uint64_t seed) {
  esmer::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_dims = std::move(hidden);
  spec.num_classes = classes;
  const double err = esmer::grad_check(spec, seed);
  const bool ok = err < 1e-6;
  std::printf("gradcheck max relative error: %.3e (%s)\n", err, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_selftest() {
  int failed = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", name);
    if (!ok) ++failed;
  };

  {
    esmer::NetworkSpec spec{4, {8, 8}, 3};
    check("gradient check < 1e-6", esmer::grad_check(spec, 1) < 1e-6);
  }
  {
    // Reservoir uniformity, quick version.
    const int capacity = 20, items = 200, trials = 2000;
    std::vector<int> hits(items, 0);
    for (int t = 0; t < trials; ++t) {
      esmer::EpisodicBuffer buffer(capacity, 9000 + t);
      for (int i = 0; i < items; ++i) {
        esmer::BufferItem item;
        item.sample.id = i;
        buffer.offer(std::move(item));
      }
      for (const auto& item : buffer.items()) {
        ++hits[item.sample.id];
      }
    }
    bool ok = true;
    for (int h : hits) {
      const double f = static_cast<double>(h) / trials;
      if (f < 0.08 || f > 0.12) ok = false;
    }
    check("reservoir inclusion frequencies near capacity/candidates", ok);
  }
  {
    esmer::ErrorMemory mem;
    mem.mu = 1.0;
    mem.margin = 1.2;
    mem.initialized = true;
    const auto w = esmer::compute_weights({2.0}, mem);
    const double filtered = esmer::filter_outliers({1.0, 1.0, 1.0, 10.0});
    esmer::ErrorMemory m2;
    m2.decay = 0.99;
    m2.mu = 1.0;
    m2.initialized = true;
    m2 = esmer::update(m2, 2.0);
    check("weighting arithmetic", std::abs(w[0] - 0.5) < 1e-12);
    check("outlier-filtered mean", std::abs(filtered - 1.0) < 1e-12);
    check("error-memory momentum update", std::abs(m2.mu - 1.01) < 1e-12);
  }
  {
    esmer::NetworkSpec spec{4, {6}, 3};
    const esmer::ParamSet working = esmer::init_params(spec, 7);
    esmer::ParamSet stable = esmer::init_params(spec, 8);
    const double initial = esmer::max_abs_gap(stable, working);
    bool ok = true;
    double gap = initial;
    for (int k = 1; k <= 20; ++k) {
      stable = esmer::ema_update(stable, working, 0.999);
      const double next = esmer::max_abs_gap(stable, working);
      if (std::abs(next - 0.999 * gap) > 1e-10) ok = false;
      gap = next;
    }
    check("stable-model update contracts toward the working model", ok);
  }
  {
    esmer::ExperimentConfig config;
    config.source.gaussian.num_classes = 4;
    config.source.gaussian.dim = 8;
    config.source.gaussian.train_per_class = 40;
    config.source.gaussian.test_per_class = 20;
    config.stream.num_tasks = 2;
    config.hp.epochs_per_task = 1;
    config.hp.buffer_capacity = 20;
    config.hidden_dims = {16};
    const esmer::RunRecord a = esmer::run_single(config, 3);
    const esmer::RunRecord b = esmer::run_single(config, 3);
    check("seeded run repeats exactly", a.matrix.a == b.matrix.a &&
                                            a.mean_class_il == b.mean_class_il &&
                                            a.final_buffer_noise == b.final_buffer_noise);
  }
  if (failed == 0) {
    std::printf("selftest passed\n");
    return 0;
  }
  std::printf("selftest failed (%d checks)\n", failed);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning engine and benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 1;
  auto* run = app.add_subcommand("run", "run every seed of a JSON experiment config");
  run->add_option("config", config_path, "path to config.json")->required();
  run->add_option("--jobs", jobs, "seeds to run concurrently")->check(CLI::PositiveNumber);

  std::vector<std::string> compare_dirs;
  std::string compare_out = "compare.csv";
  auto* compare = app.add_subcommand("compare", "summarize runs across methods");
  compare->add_option("dirs", compare_dirs, "run output directories")->required();
  compare->add_option("--out", compare_out, "CSV output path");

  std::string plot_dir;
  std::string figure;
  std::string plot_out = ".";
  auto* plotdata = app.add_subcommand("plotdata", "emit tidy CSV for one figure");
  plotdata->add_option("dir", plot_dir, "run output directory")->required();
  plotdata->add_option("--figure", figure, "drift | recency | purity | memorization | taskwise")
      ->required();
  plotdata->add_option("--out", plot_out, "output directory");

  int gc_input = 4;
  std::vector<int> gc_hidden = {8, 8};
  int gc_classes = 3;
  std::uint64_t gc_seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients to finite differences");
  gradcheck->add_option("--input-dim", gc_input);
  gradcheck->add_option("--hidden", gc_hidden)->delimiter(',');
  gradcheck->add_option("--classes", gc_classes);
  gradcheck->add_option("--seed", gc_seed);

  auto* selftest = app.add_subcommand("selftest", "quick internal diagnostics");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, jobs);
    if (compare->parsed()) return cmd_compare(compare_dirs, compare_out);
    if (plotdata->parsed()) return cmd_plotdata(plot_dir, figure, plot_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_input, gc_hidden, gc_classes, gc_seed);
    if (selftest->parsed()) return cmd_selftest();
  } catch (const esmer::ConfigError& e) {
    emit_error("config", "configuration rejected", e.issues());
    return 2;
  } catch (const esmer::InvalidInput& e) {
    emit_error("invalid_input", e.what());
    return 2;
  } catch (const esmer::FormatError& e) {
    emit_error("format", e.what());
    return 2;
  } catch (const esmer::NumericFault& e) {
    emit_error("numeric_fault", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
    return 4;
  }
  return 0;
}
