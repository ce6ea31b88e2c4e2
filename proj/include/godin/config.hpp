#pragma once

// Experiment configuration. Accepts a sectioned key = value text file or the
// equivalent JSON document; both map onto one canonical JSON form whose
// compact dump is hashed.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "godin/model.hpp"
#include "godin/scorer.hpp"
#include "godin/shiftbench.hpp"
#include "godin/trainer.hpp"

#include "json.hpp"

namespace godin {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";  // not part of the hash

  BenchConfig bench;  // bench.seed is derived from seed
  std::vector<std::size_t> hidden_dims{64, 64};
  std::vector<bool> use_batchnorm{true, true};
  double head_dropout = 0.0;
  HeadVariant head = HeadVariant::C;
  bool g_batchnorm = true;
  TrainConfig train;  // train.seed is train_seed, else the master seed
  std::optional<std::uint64_t> train_seed;

  std::vector<ScoreKind> scores{ScoreKind::Baseline, ScoreKind::Odin, ScoreKind::Mahalanobis,
                                ScoreKind::DeConfH, ScoreKind::DeConfG};
  bool preprocessing = true;
  double temperature = kOdinTemperature;

  // Propagates the master seed into bench and train.
  void sync_seeds();
  ModelSpec model_spec() const;
  // Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Sections become objects ([bench.shift] nests under bench); values are
// typed as bool, integer, real, comma list or string.
nlohmann::json parse_ini(std::string_view text);

// Detects JSON by a leading '{'. A JSON document carrying a "config" object
// (a config snapshot or a checkpoint) yields that embedded config.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

std::string canonical_text(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);  // 16 hex digits

std::string fnv1a64_hex(std::string_view bytes);

}  // namespace godin
