#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "godin/evalkit.hpp"
#include "godin/trainer.hpp"
#include "support.hpp"

using namespace godin;

namespace {

double brute_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  double wins = 0.0;
  for (double a : id)
    for (double b : ood) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Best TNR over every threshold keeping at least the TPR; the convention is
// "ID if score >= tau".
double brute_tnr(const std::vector<double>& id, const std::vector<double>& ood, double tpr) {
  double best = 0.0;
  for (double tau : id) {
    const auto kept = std::count_if(id.begin(), id.end(), [&](double v) { return v >= tau; });
    if (static_cast<double>(kept) / static_cast<double>(id.size()) < tpr) continue;
    const auto below = std::count_if(ood.begin(), ood.end(), [&](double v) { return v < tau; });
    best = std::max(best, static_cast<double>(below) / static_cast<double>(ood.size()));
  }
  return best;
}

std::vector<double> draw(std::size_t n, Rng& rng, double shift, bool coarse) {
  std::normal_distribution<double> nd(shift, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = coarse ? std::round(nd(rng) * 2.0) / 2.0 : nd(rng);
  return v;
}

LabeledSet set_of(SetTag tag, std::vector<double> x) {
  LabeledSet s;
  s.tag = tag;
  const std::size_t n = x.size();
  s.inputs = Tensor::matrix(n, 1, std::move(x));
  if (is_labeled(tag)) s.labels.assign(n, 0);
  return s;
}

}  // namespace

TEST_CASE("auroc examples") {
  const std::vector<double> hi{3, 4, 5}, lo{0, 1, 2};
  CHECK(auroc(hi, lo) == 1.0);
  CHECK(auroc(lo, hi) == 0.0);
  const std::vector<double> flat(5, 0.3);
  CHECK(auroc(flat, flat) == 0.5);
  CHECK(auroc(std::vector<double>{3, 2}, std::vector<double>{1, 2}) == 0.875);
  CHECK_THROWS(auroc(std::vector<double>{}, lo));
  CHECK_THROWS(auroc(std::vector<double>{NAN}, lo));
}

TEST_CASE("auroc agrees with pair counting, is symmetric and rank-based") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60, m = 1 + rng() % 60;
    const bool coarse = trial % 2 == 0;
    const auto id = draw(n, rng, 0.5, coarse);
    const auto ood = draw(m, rng, 0.0, coarse);
    const double a = auroc(id, ood);
    CHECK(std::abs(a - brute_auroc(id, ood)) < 1e-12);
    CHECK(a + auroc(ood, id) == 1.0);
    CHECK((a >= 0.0 && a <= 1.0));

    std::vector<double> tid, tood;
    for (double v : id) tid.push_back(std::exp(0.3 * v) - 7.0);
    for (double v : ood) tood.push_back(std::exp(0.3 * v) - 7.0);
    CHECK(auroc(tid, tood) == a);
  }
}

TEST_CASE("tnr examples") {
  std::vector<double> id(100);
  std::iota(id.begin(), id.end(), 1.0);
  const auto t = tpr_threshold(id);
  CHECK(t.threshold == 6.0);
  CHECK(t.achieved_tpr == 0.95);
  CHECK(tnr_at_tpr(id, std::vector<double>{5.5, 50.5, 99.5}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tnr_at_tpr(id, std::vector<double>{-1, 0, 5.999}) == 1.0);
  CHECK(tnr_at_tpr(id, std::vector<double>{6, 100, 1000}) == 0.0);
  CHECK_THROWS(tpr_threshold(id, 1.0));
  CHECK_THROWS(tnr_at_tpr(std::vector<double>{}, id));
}

TEST_CASE("tnr agrees with a threshold sweep") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 80, m = 1 + rng() % 80;
    const bool coarse = trial % 3 == 0;
    const auto id = draw(n, rng, 1.0, coarse);
    const auto ood = draw(m, rng, 0.0, coarse);
    CHECK(tnr_at_tpr(id, ood) == brute_tnr(id, ood, 0.95));
    CHECK(tpr_threshold(id).achieved_tpr >= 0.95);
  }
}

TEST_CASE("histogram mass and layout") {
  Rng rng(3);
  const auto id = draw(300, rng, 1.0, false);
  const auto ood = draw(200, rng, 0.0, false);
  const Histogram h = shared_histogram(id, ood);
  CHECK(h.id_counts.size() == kHistogramBins);
  CHECK(std::accumulate(h.id_counts.begin(), h.id_counts.end(), std::size_t{0}) == 300);
  CHECK(std::accumulate(h.ood_counts.begin(), h.ood_counts.end(), std::size_t{0}) == 200);
  CHECK(h.lo == std::min(*std::min_element(id.begin(), id.end()), *std::min_element(ood.begin(), ood.end())));
  CHECK(h.hi == std::max(*std::max_element(id.begin(), id.end()), *std::max_element(ood.begin(), ood.end())));

  const std::vector<double> flat(4, 2.0);
  const Histogram f = shared_histogram(flat, flat, 3);
  CHECK(f.id_counts == std::vector<std::size_t>{4, 0, 0});

  std::ostringstream out;
  write_histogram_csv(out, shared_histogram(std::vector<double>{0.0}, std::vector<double>{2.0}, 2), "h");
  CHECK(out.str() == "# h\nbin,lo,hi,id_count,ood_count\n0,0,1,1,0\n1,1,2,0,1\n");
}

TEST_CASE("evaluate wires scores into metrics") {
  Rng rng(4);
  const LabeledSet id = set_of(SetTag::Val, draw(120, rng, 2.0, false));
  const LabeledSet sem = set_of(SetTag::OodSemantic, draw(80, rng, 0.0, false));
  const LabeledSet uni = set_of(SetTag::OodUniform, draw(300, rng, 1.0, false));
  const ScoreFunction ident = [](const Tensor& x) { return x; };
  const DetectionReport r = evaluate(ident, "identity", 0.0, id, {&sem, &uni});
  REQUIRE(r.entries.size() == 2);
  const auto& id_scores = r.score_tables.at(0).scores.at(SetTag::Val);
  CHECK(id_scores == id.inputs.values());
  CHECK(r.entries[0].auroc == auroc(id.inputs.values(), sem.inputs.values()));
  CHECK(r.entries[1].tnr_at_tpr95 == tnr_at_tpr(id.inputs.values(), uni.inputs.values()));
  CHECK(r.entries[0].n_id == 120);
  CHECK(r.entries[1].n_ood == 300);
  CHECK(r.entries[0].id_score_shift == 0.0);

  // Round trip through the scores CSV reproduces the metrics exactly.
  std::stringstream csv;
  write_scores_csv(csv, r.score_tables[0], "config_hash=x seed=0");
  const auto back = read_scores_csv(csv);
  CHECK(auroc(back.at(SetTag::Val), back.at(SetTag::OodSemantic)) == r.entries[0].auroc);
  CHECK(tnr_at_tpr(back.at(SetTag::Val), back.at(SetTag::OodUniform)) == r.entries[1].tnr_at_tpr95);

  CHECK_THROWS_AS(evaluate(ident, "identity", 0.0, id, {}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(ident, "identity", 0.0, id, {nullptr}), std::invalid_argument);
}

TEST_CASE("preprocessing shifts are reported and seen by the observer") {
  const LabeledSet id = set_of(SetTag::Val, {0.0, 1.0, 2.0});
  const LabeledSet ood = set_of(SetTag::OodGaussian, {5.0, 6.0});
  const ScoreFunction ident = [](const Tensor& x) { return x; };
  std::size_t rows_seen = 0;
  const auto r = evaluate(ident, "identity", 0.5, id, {&ood},
                          [&](const std::string& fn, SetTag, const Tensor& x) {
                            CHECK(fn == "identity");
                            rows_seen += x.dim(0);
                          });
  CHECK(rows_seen == 5);
  CHECK(r.entries[0].id_score_shift == 0.5);
  CHECK(r.entries[0].ood_score_shift == 0.5);
  CHECK(r.entries[0].epsilon == 0.5);
}

TEST_CASE("constant scores carry no information") {
  Rng rng(5);
  // A zero-weight plain head gives identical logits for every input.
  ModelSpec spec;
  spec.backbone.input_dim = 3;
  spec.head.variant = HeadVariant::PlainI;
  spec.head.num_classes = 4;
  spec.head.feature_dim = 3;
  const Model m(spec);
  const auto fn = ScoreFn(ScoreKind::Baseline).bind(m);
  LabeledSet val;
  val.tag = SetTag::Val;
  val.inputs = testing::random_tensor({50, 3}, rng);
  val.labels.assign(50, 0);
  LabeledSet ood;
  ood.tag = SetTag::OodUniform;
  ood.inputs = testing::random_tensor({40, 3}, rng, -9, 9);
  const auto r = evaluate(fn, "baseline", 0.0, val, {&ood});
  CHECK(r.entries[0].auroc == 0.5);
  CHECK(r.entries[0].tnr_at_tpr95 == 0.0);
}

TEST_CASE("report json layout") {
  DetectionReport r;
  r.config_hash = "0123456789abcdef";
  r.seed = 9;
  r.preprocessing = false;
  DetectionEntry e;
  e.score_fn = "baseline";
  e.ood_set = SetTag::OodBoth;
  e.auroc = 0.75;
  e.histogram.id_counts = {1, 2};
  e.histogram.ood_counts = {3, 0};
  r.entries.push_back(e);
  r.failures.push_back("deconf-g: no divisor");
  const auto j = report_to_json(r);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["kind"] == "detection-report");
  CHECK(j["plain"] == true);
  CHECK(j["seed"] == 9);
  CHECK(j["entries"][0]["ood_set"] == "ood-both");
  CHECK(j["entries"][0]["histogram"]["bins"] == 2);
  CHECK(j["failures"].size() == 1);
}
