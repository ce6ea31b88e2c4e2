#pragma once

// Detection metrics over score vectors where in-distribution samples are the
// positive class and higher scores mean "more in-distribution".

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "godin/perturb.hpp"
#include "godin/scorer.hpp"
#include "godin/shiftbench.hpp"

#include "json.hpp"

namespace godin {

// P(s_id > s_ood) + 0.5 P(s_id == s_ood), via midranks.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

struct TprThreshold {
  double threshold = 0.0;  // largest tau with #{id >= tau} / n >= tpr
  double achieved_tpr = 0.0;
};
TprThreshold tpr_threshold(std::span<const double> id_scores, double tpr = 0.95);

// Fraction of OoD scores strictly below the TPR threshold.
double tnr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr = 0.95);

inline constexpr std::size_t kHistogramBins = 50;

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> id_counts;
  std::vector<std::size_t> ood_counts;
};

// Shared binning over the pooled [min, max].
Histogram shared_histogram(std::span<const double> id_scores, std::span<const double> ood_scores,
                           std::size_t bins = kHistogramBins);

struct DetectionEntry {
  std::string score_fn;
  SetTag ood_set = SetTag::OodSemantic;
  double auroc = 0.0;
  double tnr_at_tpr95 = 0.0;
  double threshold = 0.0;
  double achieved_tpr = 0.0;
  double epsilon = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  // Mean score change caused by preprocessing, for the ID and this OoD set.
  double id_score_shift = 0.0;
  double ood_score_shift = 0.0;
  Histogram histogram;
};

struct ScoreTable {
  std::string score_fn;
  double epsilon = 0.0;
  std::map<SetTag, std::vector<double>> scores;  // ID val plus every OoD set
};

struct DetectionReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  bool preprocessing = true;
  std::vector<DetectionEntry> entries;
  std::vector<EpsilonSearchResult> epsilon_searches;
  std::vector<ScoreTable> score_tables;
  std::vector<std::string> failures;  // score functions that could not run
};

// Sees the inputs each set is scored on (after preprocessing), chunk by chunk.
using EvalObserver = std::function<void(const std::string& score_fn, SetTag tag,
                                        const Tensor& evaluated_inputs)>;

// Perturbs the ID set and every OoD set with the same epsilon, scores them
// and computes both metrics per OoD set. epsilon == 0 disables preprocessing.
DetectionReport evaluate(const ScoreFunction& score, const std::string& score_name, double epsilon,
                         const LabeledSet& id_set, const std::vector<const LabeledSet*>& ood_sets,
                         const EvalObserver& observer = {});

// Appends every entry/table of src to dst.
void merge_into(DetectionReport& dst, DetectionReport src);

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json report_to_json(const DetectionReport& report);

void write_scores_csv(std::ostream& out, const ScoreTable& table, std::string_view header_comment);
void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         std::string_view header_comment);

// Rows (tag, score) of a scores CSV, for external re-verification.
std::map<SetTag, std::vector<double>> read_scores_csv(std::istream& in);

}  // namespace godin
