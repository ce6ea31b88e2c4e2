#pragma once

// Experiment orchestration behind the odinctl command line.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "godin/config.hpp"
#include "godin/evalkit.hpp"
#include "godin/model.hpp"
#include "godin/shiftbench.hpp"

namespace godin {

namespace fs = std::filesystem;

// Creates base/name, or base/<UTC timestamp>[-N] when name is empty. An
// existing named directory is an error; runs are never overwritten.
fs::path new_run_dir(const fs::path& base, const std::string& name);

// "config_hash=<h> seed=<s>", the first comment line of every CSV.
std::string provenance_line(const ExperimentConfig& config);

struct TrainArtifacts {
  fs::path dir;
  fs::path checkpoint;
  fs::path history;
  fs::path config;
};

// Generates data, trains, writes checkpoint.json, history.csv, config.json.
TrainArtifacts cmd_train(const ExperimentConfig& config, const fs::path& run_dir);

struct EvalOptions {
  std::optional<bool> preprocessing;             // overrides the config
  std::optional<std::vector<ScoreKind>> scores;  // overrides the config
  EvalObserver observer;
};

// In-memory evaluation of a trained model: per score function an epsilon
// search on the validation split (unless preprocessing is off), then
// evaluation against every OoD set. Score functions that do not apply to the
// model are listed in report.failures.
DetectionReport run_evaluation(const ExperimentConfig& config, const Model& model,
                               const BenchData& data, const EvalOptions& options = {});

struct EvalArtifacts {
  fs::path dir;
  fs::path report;
  DetectionReport result;
};

void write_report_files(const DetectionReport& report, const ExperimentConfig& config,
                        const fs::path& dir);

// Reads only the checkpoint (which embeds the config) and regenerates data.
EvalArtifacts cmd_eval(const fs::path& checkpoint, const EvalOptions& options, const fs::path& run_dir);

enum class SweepAxis { NumSamples, NumClasses, HeadVariant, Dropout };
SweepAxis parse_sweep_axis(std::string_view text);
std::string_view to_string(SweepAxis axis);

// Config of one sweep point; throws ConfigError on a malformed grid value.
ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis,
                                    const std::string& value, std::size_t index);

// Train + eval per grid value, each in run_dir/point-<i>. Failed points are
// recorded in the summary and the sweep continues. Returns sweep.csv.
fs::path cmd_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& grid,
                   const fs::path& run_dir, std::ostream* log = nullptr);

void cmd_gen_data(const ExperimentConfig& config, const fs::path& out_csv);

// Prints a metrics table for each report. With verify, recomputes every
// AUROC and TNR from the score CSVs beside the report; returns false on any
// mismatch.
bool cmd_report(const std::vector<fs::path>& reports, bool verify, std::ostream& out);

}  // namespace godin
