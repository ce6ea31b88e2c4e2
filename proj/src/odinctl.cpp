#include "godin/odinctl.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "godin/checkpoint.hpp"
#include "godin/perturb.hpp"
#include "godin/trainer.hpp"

namespace godin {

using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json load_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace

fs::path new_run_dir(const fs::path& base, const std::string& name) {
  fs::create_directories(base);
  if (!name.empty()) {
    const fs::path dir = base / name;
    if (!fs::create_directory(dir)) {
      throw std::runtime_error("run directory '" + dir.string() + "' already exists");
    }
    return dir;
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &utc);
  for (int n = 0;; ++n) {
    const fs::path dir = base / (n == 0 ? std::string(stamp) : std::string(stamp) + "-" + std::to_string(n));
    if (fs::create_directory(dir)) return dir;
  }
}

std::string provenance_line(const ExperimentConfig& config) {
  return "config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed);
}

TrainArtifacts cmd_train(const ExperimentConfig& config, const fs::path& run_dir) {
  config.validate();
  const BenchData data = generate(config.bench);
  Model model = init_model(config.model_spec(), config.seed);
  const TrainHistory history = train(model, data.at(SetTag::Train), &data.at(SetTag::Val), config.train);

  TrainArtifacts out;
  out.dir = run_dir;
  out.checkpoint = run_dir / "checkpoint.json";
  out.history = run_dir / "history.csv";
  out.config = run_dir / "config.json";
  save_checkpoint(out.checkpoint.string(), config, model);
  {
    auto f = open_out(out.history);
    write_history_csv(f, history, provenance_line(config));
  }
  json snapshot = {{"config_hash", config_hash(config)}, {"seed", config.seed}, {"config", to_json(config)}};
  write_text(out.config, snapshot.dump(2) + "\n");
  return out;
}

DetectionReport run_evaluation(const ExperimentConfig& config, const Model& model,
                               const BenchData& data, const EvalOptions& options) {
  const bool preprocessing = options.preprocessing.value_or(config.preprocessing);
  const auto& kinds = options.scores ? *options.scores : config.scores;

  DetectionReport report;
  report.config_hash = config_hash(config);
  report.seed = config.seed;
  report.preprocessing = preprocessing;

  const LabeledSet& val = data.at(SetTag::Val);
  std::vector<const LabeledSet*> ood;
  for (SetTag tag : ood_tags()) ood.push_back(&data.at(tag));

  std::shared_ptr<const MahalanobisParams> maha;
  for (ScoreKind kind : kinds) {
    const std::string name(to_string(kind));
    try {
      if (kind == ScoreKind::DeConfG && !model.spec().head.g_enabled()) {
        throw std::invalid_argument("head " + std::string(to_string(model.spec().head.variant)) +
                                    " has no divisor");
      }
      if (kind == ScoreKind::Mahalanobis && !maha) {
        maha = std::make_shared<const MahalanobisParams>(fit_mahalanobis(model, data.at(SetTag::Train)));
      }
      const ScoreFn fn(kind, config.temperature, kind == ScoreKind::Mahalanobis ? maha : nullptr);
      const ScoreFunction bound = fn.bind(model);
      double epsilon = 0.0;
      std::optional<EpsilonSearchResult> search;
      if (preprocessing) {
        search = select_epsilon(val, bound, name);
        epsilon = search->epsilon;
      }
      DetectionReport part = evaluate(bound, name, epsilon, val, ood, options.observer);
      if (search) part.epsilon_searches.push_back(std::move(*search));
      merge_into(report, std::move(part));
    } catch (const NumericError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      report.failures.push_back(name + ": " + e.what());
    } catch (const std::runtime_error& e) {
      report.failures.push_back(name + ": " + e.what());
    }
  }
  return report;
}

void write_report_files(const DetectionReport& report, const ExperimentConfig& config,
                        const fs::path& dir) {
  json j = report_to_json(report);
  j["config"] = to_json(config);
  j["config"].erase("output_dir");
  write_text(dir / "report.json", j.dump(2) + "\n");

  const std::string prov = provenance_line(config);
  for (const auto& table : report.score_tables) {
    auto f = open_out(dir / ("scores-" + table.score_fn + ".csv"));
    write_scores_csv(f, table, prov + " score_fn=" + table.score_fn + " epsilon=" + num(table.epsilon));
  }
  for (const auto& e : report.entries) {
    const std::string tag(to_string(e.ood_set));
    auto f = open_out(dir / ("hist-" + e.score_fn + "-" + tag + ".csv"));
    write_histogram_csv(f, e.histogram, prov + " score_fn=" + e.score_fn + " ood_set=" + tag);
  }
  for (const auto& s : report.epsilon_searches) {
    auto f = open_out(dir / ("epsilon-" + s.score_name + ".csv"));
    write_epsilon_csv(f, s, prov + " score_fn=" + s.score_name);
  }
}

EvalArtifacts cmd_eval(const fs::path& checkpoint, const EvalOptions& options, const fs::path& run_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint.string());
  const BenchData data = generate(ck.config.bench);
  EvalArtifacts out;
  out.dir = run_dir;
  out.result = run_evaluation(ck.config, ck.model, data, options);
  write_report_files(out.result, ck.config, run_dir);
  out.report = run_dir / "report.json";
  return out;
}

// --- sweep -----------------------------------------------------------------

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::NumSamples: return "num_samples";
    case SweepAxis::NumClasses: return "num_classes";
    case SweepAxis::HeadVariant: return "head_variant";
    case SweepAxis::Dropout: return "dropout";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::NumSamples, SweepAxis::NumClasses, SweepAxis::HeadVariant, SweepAxis::Dropout}) {
    if (text == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown sweep axis '" + std::string(text) +
                              "' (expected num_samples, num_classes, head_variant or dropout)");
}

ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis,
                                    const std::string& value, std::size_t index) {
  ExperimentConfig c = base;
  const std::string field = "sweep." + std::string(to_string(axis));
  auto as_size = [&] {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != value.size() || value.empty() || value[0] == '-') {
      throw ConfigError(field, "'" + value + "' is not a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  };
  switch (axis) {
    case SweepAxis::NumSamples: c.bench.train_per_class = as_size(); break;
    case SweepAxis::NumClasses: c.bench.id_classes = as_size(); break;
    case SweepAxis::HeadVariant:
      try {
        c.head = parse_head_variant(value);
      } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
      }
      break;
    case SweepAxis::Dropout: {
      std::size_t pos = 0;
      double p = 0.0;
      try {
        p = std::stod(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != value.size()) throw ConfigError(field, "'" + value + "' is not a number");
      c.head_dropout = p;
      break;
    }
  }
  // Same data for every point; the training stream differs per point.
  c.train_seed = derive_seed(derive_seed(base.seed, streams::kSweep), index);
  c.sync_seeds();
  return c;
}

fs::path cmd_sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& grid,
                   const fs::path& run_dir, std::ostream* log) {
  base.validate();
  if (grid.empty()) throw ConfigError("sweep.grid", "empty grid");

  std::ostringstream csv;
  csv << "# " << provenance_line(base) << " axis=" << to_string(axis) << '\n';
  csv << "point,axis,value,config_hash,train_seed,status";
  for (ScoreKind k : base.scores) csv << ",mean_auroc_" << to_string(k);
  for (ScoreKind k : base.scores) csv << ",mean_tnr_" << to_string(k);
  csv << '\n';

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const fs::path dir = run_dir / ("point-" + std::to_string(i));
    std::string status = "ok";
    std::string hash;
    std::uint64_t train_seed = 0;
    std::vector<std::string> aurocs(base.scores.size()), tnrs(base.scores.size());
    try {
      const ExperimentConfig c = sweep_point_config(base, axis, grid[i], i);
      hash = config_hash(c);
      train_seed = c.train.seed;
      c.validate();
      fs::create_directories(dir);
      const auto trained = cmd_train(c, dir);
      const auto eval = cmd_eval(trained.checkpoint, {}, dir);
      for (std::size_t s = 0; s < base.scores.size(); ++s) {
        const std::string name(to_string(base.scores[s]));
        double a = 0.0, t = 0.0;
        std::size_t n = 0;
        for (const auto& e : eval.result.entries) {
          if (e.score_fn != name) continue;
          a += e.auroc;
          t += e.tnr_at_tpr95;
          ++n;
        }
        if (n > 0) {
          aurocs[s] = num(a / static_cast<double>(n));
          tnrs[s] = num(t / static_cast<double>(n));
        }
      }
      if (!eval.result.failures.empty()) status = "partial";
    } catch (const std::exception& e) {
      status = "failed";
      if (log) *log << "sweep point " << i << " (" << grid[i] << ") failed: " << e.what() << '\n';
    }
    csv << i << ',' << to_string(axis) << ',' << grid[i] << ',' << hash << ',' << train_seed << ','
        << status;
    for (const auto& a : aurocs) csv << ',' << a;
    for (const auto& t : tnrs) csv << ',' << t;
    csv << '\n';
    if (log) *log << "sweep point " << i << " (" << grid[i] << "): " << status << '\n';
  }
  const fs::path summary = run_dir / "sweep.csv";
  write_text(summary, csv.str());
  return summary;
}

// --- gen-data / report ---------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& config, const fs::path& out_csv) {
  config.validate();
  if (fs::exists(out_csv)) throw std::runtime_error("'" + out_csv.string() + "' already exists");
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  const BenchData data = generate(config.bench);
  auto f = open_out(out_csv);
  write_dataset_csv(f, data, provenance_line(config));
}

bool cmd_report(const std::vector<fs::path>& reports, bool verify, std::ostream& out) {
  bool ok = true;
  for (const auto& path : reports) {
    const json j = load_json(path);
    if (j.value("schema_version", -1) != kReportSchemaVersion) {
      throw std::runtime_error("'" + path.string() + "': unsupported report schema version");
    }
    out << path.string() << "  config_hash=" << j.at("config_hash").get<std::string>()
        << " seed=" << j.at("seed").get<std::uint64_t>()
        << (j.at("preprocessing").get<bool>() ? "" : " plain") << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "  %-12s %-16s %8s %8s %10s\n", "score_fn", "ood_set", "auroc",
                  "tnr95", "epsilon");
    out << line;

    std::map<std::string, std::map<SetTag, std::vector<double>>> tables;
    for (const auto& e : j.at("entries")) {
      const auto fn = e.at("score_fn").get<std::string>();
      const auto set = e.at("ood_set").get<std::string>();
      const double a = e.at("auroc").get<double>();
      const double t = e.at("tnr_at_tpr95").get<double>();
      std::snprintf(line, sizeof line, "  %-12s %-16s %8.4f %8.4f %10.6g", fn.c_str(), set.c_str(), a,
                    t, e.at("epsilon").get<double>());
      out << line;
      if (verify) {
        if (!tables.count(fn)) {
          std::ifstream in(path.parent_path() / ("scores-" + fn + ".csv"), std::ios::binary);
          if (!in) throw std::runtime_error("missing scores-" + fn + ".csv beside " + path.string());
          tables[fn] = read_scores_csv(in);
        }
        const auto& table = tables[fn];
        const auto& id = table.at(SetTag::Val);
        const auto& od = table.at(parse_set_tag(set));
        const bool match = auroc(id, od) == a && tnr_at_tpr(id, od) == t;
        out << (match ? "  verified" : "  MISMATCH");
        ok = ok && match;
      }
      out << '\n';
    }
    for (const auto& f : j.at("failures")) out << "  skipped: " << f.get<std::string>() << '\n';
  }
  return ok;
}

}  // namespace godin
