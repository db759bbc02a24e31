#pragma once

#include <string>

#include "esmer/learners.hpp"

namespace esmer {

// JSON checkpoint of a full training state: working and stable parameters,
// error memory, buffer contents and RNG states. Floats round-trip bitwise
// (shortest-round-trip number serialization), so a restored learner replays
// the exact trajectory of the original.
std::string checkpoint_to_json(const EsmerLearner& learner);

// Restores into a learner constructed with the same spec and hyperparameters.
void restore_from_json(EsmerLearner& learner, const std::string& json_text);

void save_checkpoint(const EsmerLearner& learner, const std::string& path);
void load_checkpoint(EsmerLearner& learner, const std::string& path);

}  // namespace esmer
