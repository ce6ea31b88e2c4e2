#pragma once

// Self-describing JSON checkpoints: the full experiment config, its hash and
// seed, every parameter with its role and shape, and BN running statistics.
// Doubles are written in shortest round-trip form, so load(save(m)) restores
// every bit.

#include <stdexcept>
#include <string>

#include "godin/config.hpp"
#include "godin/model.hpp"

#include "json.hpp"

namespace godin {

inline constexpr const char* kCheckpointFormat = "godin-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ExperimentConfig config;
  Model model;
};

nlohmann::json checkpoint_to_json(const ExperimentConfig& config, const Model& model);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

// Serialized bytes (pretty-printed, trailing newline).
std::string checkpoint_text(const ExperimentConfig& config, const Model& model);

void save_checkpoint(const std::string& path, const ExperimentConfig& config, const Model& model);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace godin
