#include "godin/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace godin {

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || b.empty()) throw std::invalid_argument(std::string(what) + ": empty score set");
}

// Twice the Mann-Whitney U of `pos` against `neg`, exact in integers.
std::int64_t doubled_u(std::span<const double> pos, std::span<const double> neg) {
  struct Item {
    double v;
    bool pos;
  };
  std::vector<Item> pooled;
  pooled.reserve(pos.size() + neg.size());
  for (double v : pos) pooled.push_back({v, true});
  for (double v : neg) pooled.push_back({v, false});
  std::sort(pooled.begin(), pooled.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

  std::int64_t rank_sum2 = 0;  // sum of doubled midranks of positives
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    std::int64_t n_pos = 0;
    while (j < pooled.size() && pooled[j].v == pooled[i].v) {
      n_pos += pooled[j].pos ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, doubled midrank = i+1+j
    rank_sum2 += n_pos * static_cast<std::int64_t>(i + 1 + j);
    i = j;
  }
  const auto n = static_cast<std::int64_t>(pos.size());
  return rank_sum2 - n * (n + 1);
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores, "auroc");
  for (double v : id_scores)
    if (std::isnan(v)) throw std::invalid_argument("auroc: NaN score");
  for (double v : ood_scores)
    if (std::isnan(v)) throw std::invalid_argument("auroc: NaN score");
  const double pairs2 = 2.0 * static_cast<double>(id_scores.size()) *
                        static_cast<double>(ood_scores.size());
  const std::int64_t u2 = doubled_u(id_scores, ood_scores);
  const double direct = static_cast<double>(u2) / pairs2;
  if (direct >= 0.5) return direct;
  // Take the complement of the larger orientation so that swapping the sets
  // gives exactly 1 - value.
  const double other = (pairs2 - static_cast<double>(u2)) / pairs2;
  return 1.0 - other;
}

TprThreshold tpr_threshold(std::span<const double> id_scores, double tpr) {
  if (id_scores.empty()) throw std::invalid_argument("tnr_at_tpr: empty score set");
  if (!(tpr > 0.0 && tpr < 1.0)) throw std::invalid_argument("tnr_at_tpr: tpr must be in (0,1)");
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t n = sorted.size();
  std::size_t k = 1;
  while (static_cast<double>(k) / static_cast<double>(n) < tpr) ++k;
  TprThreshold out;
  out.threshold = sorted[k - 1];
  const auto kept = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [&](double v) { return v >= out.threshold; }));
  out.achieved_tpr = static_cast<double>(kept) / static_cast<double>(n);
  return out;
}

double tnr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr) {
  require_nonempty(id_scores, ood_scores, "tnr_at_tpr");
  const double tau = tpr_threshold(id_scores, tpr).threshold;
  const auto below = std::count_if(ood_scores.begin(), ood_scores.end(),
                                   [&](double v) { return v < tau; });
  return static_cast<double>(below) / static_cast<double>(ood_scores.size());
}

Histogram shared_histogram(std::span<const double> id_scores, std::span<const double> ood_scores,
                           std::size_t bins) {
  require_nonempty(id_scores, ood_scores, "histogram");
  if (bins == 0) throw std::invalid_argument("histogram: zero bins");
  Histogram h;
  h.lo = std::min(*std::min_element(id_scores.begin(), id_scores.end()),
                  *std::min_element(ood_scores.begin(), ood_scores.end()));
  h.hi = std::max(*std::max_element(id_scores.begin(), id_scores.end()),
                  *std::max_element(ood_scores.begin(), ood_scores.end()));
  h.id_counts.assign(bins, 0);
  h.ood_counts.assign(bins, 0);
  const double width = h.hi - h.lo;
  auto bin_of = [&](double v) -> std::size_t {
    if (!(width > 0.0)) return 0;
    const double t = (v - h.lo) / width * static_cast<double>(bins);
    return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, t)));
  };
  for (double v : id_scores) ++h.id_counts[bin_of(v)];
  for (double v : ood_scores) ++h.ood_counts[bin_of(v)];
  return h;
}

DetectionReport evaluate(const ScoreFunction& score, const std::string& score_name, double epsilon,
                         const LabeledSet& id_set, const std::vector<const LabeledSet*>& ood_sets,
                         const EvalObserver& observer) {
  if (ood_sets.empty()) throw std::invalid_argument("evaluate: no OoD sets given");
  if (id_set.size() == 0) throw std::invalid_argument("evaluate: empty in-distribution set");
  constexpr std::size_t kChunk = 256;

  struct Scored {
    std::vector<double> perturbed;
    std::vector<double> plain;
  };
  auto run = [&](const LabeledSet& set) {
    Scored out;
    const std::size_t n = set.size();
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
      const std::size_t end = std::min(n, begin + kChunk);
      const Tensor chunk = slice_rows(set.inputs, begin, end);
      const Tensor moved = perturb(chunk, score, epsilon);
      if (observer) observer(score_name, set.tag, moved);
      const Tensor s = score(moved);
      out.perturbed.insert(out.perturbed.end(), s.values().begin(), s.values().end());
      if (epsilon == 0.0) continue;
      const Tensor s0 = score(chunk);
      out.plain.insert(out.plain.end(), s0.values().begin(), s0.values().end());
    }
    if (epsilon == 0.0) out.plain = out.perturbed;
    return out;
  };

  DetectionReport report;
  ScoreTable table;
  table.score_fn = score_name;
  table.epsilon = epsilon;

  const Scored id = run(id_set);
  const double id_shift = mean_of(id.perturbed) - mean_of(id.plain);
  const TprThreshold thr = tpr_threshold(id.perturbed);
  table.scores[id_set.tag] = id.perturbed;

  for (const LabeledSet* set : ood_sets) {
    if (set == nullptr || set->size() == 0) {
      throw std::invalid_argument("evaluate: missing or empty OoD set");
    }
    const Scored ood = run(*set);
    DetectionEntry e;
    e.score_fn = score_name;
    e.ood_set = set->tag;
    e.auroc = auroc(id.perturbed, ood.perturbed);
    e.tnr_at_tpr95 = tnr_at_tpr(id.perturbed, ood.perturbed);
    e.threshold = thr.threshold;
    e.achieved_tpr = thr.achieved_tpr;
    e.epsilon = epsilon;
    e.n_id = id.perturbed.size();
    e.n_ood = ood.perturbed.size();
    e.id_score_shift = id_shift;
    e.ood_score_shift = mean_of(ood.perturbed) - mean_of(ood.plain);
    e.histogram = shared_histogram(id.perturbed, ood.perturbed);
    report.entries.push_back(std::move(e));
    table.scores[set->tag] = ood.perturbed;
  }
  report.score_tables.push_back(std::move(table));
  return report;
}

void merge_into(DetectionReport& dst, DetectionReport src) {
  for (auto& e : src.entries) dst.entries.push_back(std::move(e));
  for (auto& s : src.epsilon_searches) dst.epsilon_searches.push_back(std::move(s));
  for (auto& t : src.score_tables) dst.score_tables.push_back(std::move(t));
  for (auto& f : src.failures) dst.failures.push_back(std::move(f));
}

nlohmann::json report_to_json(const DetectionReport& report) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "detection-report";
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["preprocessing"] = report.preprocessing;
  j["plain"] = !report.preprocessing;

  json entries = json::array();
  for (const auto& e : report.entries) {
    json h;
    h["bins"] = e.histogram.id_counts.size();
    h["lo"] = e.histogram.lo;
    h["hi"] = e.histogram.hi;
    h["id_counts"] = e.histogram.id_counts;
    h["ood_counts"] = e.histogram.ood_counts;
    entries.push_back({
        {"score_fn", e.score_fn},
        {"ood_set", std::string(to_string(e.ood_set))},
        {"auroc", e.auroc},
        {"tnr_at_tpr95", e.tnr_at_tpr95},
        {"threshold", e.threshold},
        {"achieved_tpr", e.achieved_tpr},
        {"epsilon", e.epsilon},
        {"n_id", e.n_id},
        {"n_ood", e.n_ood},
        {"id_score_shift", e.id_score_shift},
        {"ood_score_shift", e.ood_score_shift},
        {"histogram", std::move(h)},
    });
  }
  j["entries"] = std::move(entries);

  json searches = json::array();
  for (const auto& s : report.epsilon_searches) {
    searches.push_back({{"score_fn", s.score_name},
                        {"grid", s.grid},
                        {"mean_scores", s.mean_scores},
                        {"argmax_epsilon", s.argmax_epsilon},
                        {"epsilon", s.epsilon}});
  }
  j["epsilon_searches"] = std::move(searches);
  j["failures"] = report.failures;
  return j;
}

void write_scores_csv(std::ostream& out, const ScoreTable& table, std::string_view header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "sample_id,tag,score\n";
  for (const auto& [tag, scores] : table.scores) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out << i << ',' << to_string(tag) << ',' << fmt(scores[i]) << '\n';
    }
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         std::string_view header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "bin,lo,hi,id_count,ood_count\n";
  const std::size_t bins = histogram.id_counts.size();
  const double width = (histogram.hi - histogram.lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = histogram.lo + width * static_cast<double>(b);
    const double hi = b + 1 == bins ? histogram.hi : histogram.lo + width * static_cast<double>(b + 1);
    out << b << ',' << fmt(lo) << ',' << fmt(hi) << ',' << histogram.id_counts[b] << ','
        << histogram.ood_counts[b] << '\n';
  }
}

std::map<SetTag, std::vector<double>> read_scores_csv(std::istream& in) {
  std::map<SetTag, std::vector<double>> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "sample_id,tag,score") throw std::runtime_error("scores csv: unexpected header");
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error("scores csv: malformed row '" + line + "'");
    }
    const SetTag tag = parse_set_tag(line.substr(c1 + 1, c2 - c1 - 1));
    out[tag].push_back(std::stod(line.substr(c2 + 1)));
  }
  return out;
}

}  // namespace godin
