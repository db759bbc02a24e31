#include "esmer/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "esmer/errors.hpp"

namespace esmer {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "esmer-checkpoint-v1";

json params_to_json(const ParamSet& params) {
  json layers = json::array();
  for (const LayerParams& layer : params.layers) {
    json rows = json::array();
    for (int r = 0; r < layer.weights.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < layer.weights.cols(); ++c) {
        row.push_back(layer.weights(r, c));
      }
      rows.push_back(std::move(row));
    }
    layers.push_back({{"weights", std::move(rows)}, {"bias", layer.bias}});
  }
  return layers;
}

ParamSet params_from_json(const json& j) {
  ParamSet params;
  for (const json& layer : j) {
    LayerParams lp;
    const json& rows = layer.at("weights");
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    lp.weights = Matrix(r, c);
    for (int i = 0; i < r; ++i) {
      if (static_cast<int>(rows[i].size()) != c) {
        throw FormatError("checkpoint: ragged weight matrix");
      }
      for (int k = 0; k < c; ++k) {
        lp.weights(i, k) = rows[i][k].get<double>();
      }
    }
    layer.at("bias").get_to(lp.bias);
    params.layers.push_back(std::move(lp));
  }
  return params;
}

json item_to_json(const BufferItem& item) {
  json j = {{"id", item.sample.id},
            {"features", item.sample.features},
            {"label", item.sample.label},
            {"true_label", item.sample.true_label},
            {"is_noisy", item.sample.is_noisy},
            {"insertion_step", item.insertion_step}};
  if (item.stored_logits) {
    j["logits"] = *item.stored_logits;
  } else {
    j["logits"] = nullptr;
  }
  return j;
}

BufferItem item_from_json(const json& j) {
  BufferItem item;
  j.at("id").get_to(item.sample.id);
  j.at("features").get_to(item.sample.features);
  j.at("label").get_to(item.sample.label);
  j.at("true_label").get_to(item.sample.true_label);
  j.at("is_noisy").get_to(item.sample.is_noisy);
  j.at("insertion_step").get_to(item.insertion_step);
  if (!j.at("logits").is_null()) {
    item.stored_logits = j.at("logits").get<std::vector<double>>();
  }
  return item;
}

}  // namespace

std::string checkpoint_to_json(const EsmerLearner& learner) {
  json j;
  j["format"] = kFormatTag;
  j["step"] = learner.step_;
  j["working"] = params_to_json(learner.working_);
  j["stable"] = params_to_json(learner.stable_);
  j["error_memory"] = {{"mu", learner.error_mem_.mu},
                       {"decay", learner.error_mem_.decay},
                       {"margin", learner.error_mem_.margin},
                       {"warmup_epochs_remaining", learner.error_mem_.warmup_epochs_remaining},
                       {"initialized", learner.error_mem_.initialized}};
  json items = json::array();
  for (const BufferItem& item : learner.buffer_.items()) {
    items.push_back(item_to_json(item));
  }
  j["buffer"] = {{"capacity", learner.buffer_.capacity()},
                 {"candidates_seen", learner.buffer_.candidates_seen()},
                 {"rng_state", learner.buffer_.rng_state()},
                 {"items", std::move(items)}};
  j["rng"] = {{"memory", learner.memory_rng_.state()}, {"ema", learner.ema_rng_.state()}};
  return j.dump();
}

void restore_from_json(EsmerLearner& learner, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kFormatTag) {
    throw FormatError("checkpoint: missing or unexpected format tag");
  }
  ParamSet working = params_from_json(j.at("working"));
  ParamSet stable = params_from_json(j.at("stable"));
  if (!working.shape_matches(learner.working_) || !stable.shape_matches(learner.stable_)) {
    throw FormatError("checkpoint: parameter shapes do not match the learner's network");
  }
  const json& buf = j.at("buffer");
  if (buf.at("capacity").get<int>() != learner.buffer_.capacity()) {
    throw FormatError("checkpoint: buffer capacity does not match the learner's configuration");
  }
  std::vector<BufferItem> items;
  for (const json& it : buf.at("items")) {
    items.push_back(item_from_json(it));
  }

  learner.working_ = std::move(working);
  learner.stable_ = std::move(stable);
  const json& em = j.at("error_memory");
  em.at("mu").get_to(learner.error_mem_.mu);
  em.at("decay").get_to(learner.error_mem_.decay);
  em.at("margin").get_to(learner.error_mem_.margin);
  em.at("warmup_epochs_remaining").get_to(learner.error_mem_.warmup_epochs_remaining);
  em.at("initialized").get_to(learner.error_mem_.initialized);
  learner.buffer_.restore(std::move(items), buf.at("candidates_seen").get<std::int64_t>(),
                          buf.at("rng_state").get<std::uint64_t>());
  learner.memory_rng_.set_state(j.at("rng").at("memory").get<std::uint64_t>());
  learner.ema_rng_.set_state(j.at("rng").at("ema").get<std::uint64_t>());
  j.at("step").get_to(learner.step_);
}

void save_checkpoint(const EsmerLearner& learner, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("checkpoint: cannot open for writing: " + path);
  }
  out << checkpoint_to_json(learner);
}

void load_checkpoint(EsmerLearner& learner, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("checkpoint: cannot open: " + path);
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  restore_from_json(learner, text);
}

}  // namespace esmer
