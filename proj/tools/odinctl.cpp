// odinctl: train, evaluate and sweep out-of-distribution detectors on the
// synthetic shift benchmark.
//
// exit codes: 0 success, 1 usage or config error, 2 runtime failure

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "godin/checkpoint.hpp"
#include "godin/config.hpp"
#include "godin/odinctl.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

void emit_error(const std::string& kind, const std::string& message, const std::string& field = {}) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << '\n';
}

godin::ExperimentConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  godin::ExperimentConfig cfg = path.empty() ? godin::ExperimentConfig{} : godin::load_config(path);
  if (seed) cfg.seed = *seed;
  cfg.sync_seeds();
  cfg.validate();
  return cfg;
}

std::vector<godin::ScoreKind> parse_scores(const std::vector<std::string>& names) {
  std::vector<godin::ScoreKind> out;
  for (const auto& n : names) {
    try {
      out.push_back(godin::parse_score_kind(n));
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Out-of-distribution detection experiments on a synthetic shift benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string run_name;

  auto* train = app.add_subcommand("train", "generate data, train a model, write a checkpoint");
  train->add_option("-c,--config", config_path, "config file (INI or JSON)");
  train->add_option("--seed", seed, "override the master seed");
  train->add_option("-o,--out-dir", out_dir, "parent directory for the run (default: config output_dir)");
  train->add_option("--run-name", run_name, "run directory name (default: UTC timestamp)");

  std::string checkpoint;
  bool no_preprocess = false;
  bool preprocess = false;
  std::vector<std::string> score_names;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against every OoD set");
  eval->add_option("checkpoint", checkpoint, "checkpoint.json written by train")->required();
  eval->add_option("-o,--out-dir", out_dir, "parent directory for the run (default: config output_dir)");
  eval->add_option("--run-name", run_name, "run directory name (default: UTC timestamp)");
  auto* np = eval->add_flag("--no-preprocess", no_preprocess, "disable input preprocessing (epsilon = 0)");
  eval->add_flag("--preprocess", preprocess, "force input preprocessing on")->excludes(np);
  eval->add_option("--scores", score_names, "score functions: baseline odin mahalanobis deconf-h deconf-g")
      ->delimiter(',');

  std::string axis_name;
  std::vector<std::string> grid;
  auto* sweep = app.add_subcommand("sweep", "train and evaluate along one axis");
  sweep->add_option("-c,--config", config_path, "base config file");
  sweep->add_option("--seed", seed, "override the master seed");
  sweep->add_option("--axis", axis_name, "num_samples | num_classes | head_variant | dropout")->required();
  sweep->add_option("--grid", grid, "comma separated values")->required()->delimiter(',');
  sweep->add_option("-o,--out-dir", out_dir, "parent directory for the run");
  sweep->add_option("--run-name", run_name, "run directory name (default: UTC timestamp)");

  std::string data_out;
  auto* gen = app.add_subcommand("gen-data", "write the benchmark as CSV");
  gen->add_option("-c,--config", config_path, "config file");
  gen->add_option("--seed", seed, "override the master seed");
  gen->add_option("--out", data_out, "output CSV path")->required();

  std::vector<std::string> reports;
  bool verify = false;
  auto* report = app.add_subcommand("report", "summarize report.json files");
  report->add_option("reports", reports, "report.json paths")->required();
  report->add_flag("--verify", verify, "recompute metrics from the score CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) {
      const auto cfg = resolve_config(config_path, seed);
      const auto dir = godin::new_run_dir(out_dir.empty() ? cfg.output_dir : out_dir, run_name);
      const auto out = godin::cmd_train(cfg, dir);
      std::cout << out.checkpoint.string() << '\n';
    } else if (*eval) {
      godin::EvalOptions opts;
      if (no_preprocess) opts.preprocessing = false;
      if (preprocess) opts.preprocessing = true;
      if (!score_names.empty()) opts.scores = parse_scores(score_names);
      const auto cfg = godin::load_checkpoint(checkpoint).config;
      const auto dir = godin::new_run_dir(out_dir.empty() ? cfg.output_dir : out_dir, run_name);
      const auto out = godin::cmd_eval(checkpoint, opts, dir);
      for (const auto& f : out.result.failures) std::cerr << "skipped " << f << '\n';
      std::cout << out.report.string() << '\n';
    } else if (*sweep) {
      const auto cfg = resolve_config(config_path, seed);
      godin::SweepAxis axis;
      try {
        axis = godin::parse_sweep_axis(axis_name);
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
      for (std::size_t i = 0; i < grid.size(); ++i) godin::sweep_point_config(cfg, axis, grid[i], i);
      const auto dir = godin::new_run_dir(out_dir.empty() ? cfg.output_dir : out_dir, run_name);
      std::cout << godin::cmd_sweep(cfg, axis, grid, dir, &std::cerr).string() << '\n';
    } else if (*gen) {
      const auto cfg = resolve_config(config_path, seed);
      godin::cmd_gen_data(cfg, data_out);
      std::cout << data_out << '\n';
    } else if (*report) {
      std::vector<godin::fs::path> paths(reports.begin(), reports.end());
      if (!godin::cmd_report(paths, verify, std::cout)) {
        emit_error("verification_failed", "recomputed metrics differ from the report");
        return kRuntime;
      }
    }
  } catch (const godin::ConfigError& e) {
    emit_error("invalid_config", e.what(), e.field());
    return kUsage;
  } catch (const UsageError& e) {
    emit_error("usage", e.what());
    return kUsage;
  } catch (const godin::CheckpointError& e) {
    emit_error("checkpoint", e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kRuntime;
  }
  return 0;
}
