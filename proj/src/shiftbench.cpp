#include "godin/shiftbench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "godin/rng.hpp"

namespace godin {

namespace {

constexpr std::array<SetTag, 7> kAllTags = {SetTag::Train,          SetTag::Val,
                                            SetTag::OodSemantic,    SetTag::OodNonSemantic,
                                            SetTag::OodBoth,        SetTag::OodUniform,
                                            SetTag::OodGaussian};
constexpr std::array<SetTag, 5> kOodTags = {SetTag::OodSemantic, SetTag::OodNonSemantic,
                                            SetTag::OodBoth, SetTag::OodUniform,
                                            SetTag::OodGaussian};

// Stream offsets under the bench seed.
constexpr std::uint64_t kIdCenters = 100;
constexpr std::uint64_t kHeldoutCenters = 200;
constexpr std::uint64_t kShiftGeometry = 300;
constexpr std::uint64_t kTrainClass = 1000;
constexpr std::uint64_t kValClass = 2000;
constexpr std::uint64_t kNonSemanticClass = 3000;
constexpr std::uint64_t kSemanticClass = 4000;
constexpr std::uint64_t kBothClass = 5000;
constexpr std::uint64_t kUniform = 6000;
constexpr std::uint64_t kGaussian = 7000;

using Vec = std::vector<double>;

Vec random_unit(std::size_t k, Rng& rng) {
  std::normal_distribution<double> normal;
  Vec v(k);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Vec> sphere_centers(std::size_t count, std::size_t k, double radius,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> centers;
  for (std::size_t c = 0; c < count; ++c) {
    Vec v = random_unit(k, rng);
    for (double& x : v) x *= radius;
    centers.push_back(std::move(v));
  }
  return centers;
}

struct ShiftGeometry {
  Vec offset;
  Vec plane_p, plane_q;  // orthonormal; plane_q empty when k == 1
  double angle = 0.0;

  Vec rotate(const Vec& v) const {
    if (angle == 0.0 || plane_q.empty()) return v;
    const double a = dot(v, plane_p), b = dot(v, plane_q);
    const double c = std::cos(angle) - 1.0, s = std::sin(angle);
    Vec out = v;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] += c * (a * plane_p[i] + b * plane_q[i]) + s * (a * plane_q[i] - b * plane_p[i]);
    }
    return out;
  }
};

ShiftGeometry shift_geometry(const BenchConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kShiftGeometry));
  ShiftGeometry geo;
  geo.offset = random_unit(cfg.input_dim, rng);
  for (double& x : geo.offset) x *= cfg.shift.offset_scale * cfg.center_radius;
  geo.plane_p = random_unit(cfg.input_dim, rng);
  if (cfg.input_dim >= 2) {
    Vec q;
    double norm = 0.0;
    do {
      q = random_unit(cfg.input_dim, rng);
      const double proj = dot(q, geo.plane_p);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] -= proj * geo.plane_p[i];
      norm = std::sqrt(dot(q, q));
    } while (norm < 1e-6);
    for (double& x : q) x /= norm;
    geo.plane_q = std::move(q);
  }
  geo.angle = cfg.shift.rotation_deg * std::numbers::pi / 180.0;
  return geo;
}

// Appends n draws of center + stddev * z + offset to rows.
void sample_cluster(Vec& rows, const Vec& center, const Vec* offset, double stddev, std::size_t n,
                    std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < center.size(); ++i) {
      double x = center[i] + stddev * normal(rng);
      if (offset) x += (*offset)[i];
      rows.push_back(x);
    }
  }
}

void standardize_in_place(Vec& rows, const Standardizer& st) {
  const std::size_t k = st.mean.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = (rows[i] - st.mean[i % k]) / st.stddev[i % k];
  }
}

LabeledSet make_set(SetTag tag, Vec rows, std::size_t k, std::vector<int> labels = {}) {
  const std::size_t n = rows.size() / k;
  return LabeledSet{tag, Tensor(Shape{n, k}, std::move(rows)), std::move(labels)};
}

}  // namespace

std::string_view to_string(SetTag tag) {
  switch (tag) {
    case SetTag::Train: return "train";
    case SetTag::Val: return "val";
    case SetTag::OodSemantic: return "ood-semantic";
    case SetTag::OodNonSemantic: return "ood-nonsemantic";
    case SetTag::OodBoth: return "ood-both";
    case SetTag::OodUniform: return "ood-uniform";
    case SetTag::OodGaussian: return "ood-gaussian";
  }
  return "?";
}

SetTag parse_set_tag(std::string_view text) {
  for (SetTag t : kAllTags) {
    if (text == to_string(t)) return t;
  }
  throw std::invalid_argument("unknown set tag '" + std::string(text) + "'");
}

bool is_labeled(SetTag tag) { return tag == SetTag::Train || tag == SetTag::Val; }

std::span<const SetTag> ood_tags() { return kOodTags; }

void BenchConfig::validate() const {
  if (id_classes < 2) throw std::invalid_argument("bench: need at least 2 in-distribution classes");
  if (input_dim < 1) throw std::invalid_argument("bench: input_dim must be >= 1");
  if (train_per_class < 1) throw std::invalid_argument("bench: train_per_class must be >= 1");
  if (!(within_class_std > 0.0)) throw std::invalid_argument("bench: within_class_std must be > 0");
  if (!(center_radius >= 0.0)) throw std::invalid_argument("bench: center_radius must be >= 0");
  if (!(shift.cov_scale > 0.0)) throw std::invalid_argument("bench: shift cov_scale must be > 0");
}

BenchData generate(const BenchConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.input_dim;
  const auto id_centers =
      sphere_centers(cfg.id_classes, k, cfg.center_radius, derive_seed(cfg.seed, kIdCenters));
  const auto heldout_centers = sphere_centers(cfg.heldout_classes, k, cfg.center_radius,
                                              derive_seed(cfg.seed, kHeldoutCenters));
  const ShiftGeometry geo = shift_geometry(cfg);
  const double shifted_std = cfg.within_class_std * std::sqrt(cfg.shift.cov_scale);

  Vec train, val, nonsem, sem, both;
  std::vector<int> train_labels, val_labels, nonsem_origin, sem_origin;
  for (std::size_t c = 0; c < cfg.id_classes; ++c) {
    const auto label = static_cast<int>(c);
    sample_cluster(train, id_centers[c], nullptr, cfg.within_class_std, cfg.train_per_class,
                   derive_seed(cfg.seed, kTrainClass + c));
    train_labels.insert(train_labels.end(), cfg.train_per_class, label);
    sample_cluster(val, id_centers[c], nullptr, cfg.within_class_std, cfg.val_per_class,
                   derive_seed(cfg.seed, kValClass + c));
    val_labels.insert(val_labels.end(), cfg.val_per_class, label);
    sample_cluster(nonsem, geo.rotate(id_centers[c]), &geo.offset, shifted_std, cfg.ood_per_class,
                   derive_seed(cfg.seed, kNonSemanticClass + c));
    nonsem_origin.insert(nonsem_origin.end(), cfg.ood_per_class, label);
  }
  for (std::size_t c = 0; c < cfg.heldout_classes; ++c) {
    sample_cluster(sem, heldout_centers[c], nullptr, cfg.within_class_std, cfg.ood_per_class,
                   derive_seed(cfg.seed, kSemanticClass + c));
    sample_cluster(both, geo.rotate(heldout_centers[c]), &geo.offset, shifted_std,
                   cfg.ood_per_class, derive_seed(cfg.seed, kBothClass + c));
    sem_origin.insert(sem_origin.end(), cfg.ood_per_class, static_cast<int>(cfg.id_classes + c));
  }

  BenchData data;
  Standardizer& st = data.standardizer;
  const std::size_t n = train.size() / k;
  st.mean.assign(k, 0.0);
  st.stddev.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) st.mean[j] += train[i * k + j];
  for (double& m : st.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double c = train[i * k + j] - st.mean[j];
      st.stddev[j] += c * c;
    }
  }
  for (double& s : st.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
  for (Vec* rows : {&train, &val, &nonsem, &sem, &both}) standardize_in_place(*rows, st);

  Vec lo(k, 0.0), hi(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    lo[j] = hi[j] = train[j];
    for (std::size_t i = 1; i < n; ++i) {
      lo[j] = std::min(lo[j], train[i * k + j]);
      hi[j] = std::max(hi[j], train[i * k + j]);
    }
  }
  Vec uniform, gaussian;
  {
    Rng rng(derive_seed(cfg.seed, kUniform));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < cfg.noise_samples; ++s)
      for (std::size_t j = 0; j < k; ++j) uniform.push_back(lo[j] + (hi[j] - lo[j]) * unit(rng));
  }
  {
    Rng rng(derive_seed(cfg.seed, kGaussian));
    std::normal_distribution<double> normal;
    for (std::size_t s = 0; s < cfg.noise_samples * k; ++s) gaussian.push_back(normal(rng));
  }

  data.origin[SetTag::Train] = train_labels;
  data.origin[SetTag::Val] = val_labels;
  data.origin[SetTag::OodNonSemantic] = nonsem_origin;
  data.origin[SetTag::OodSemantic] = sem_origin;
  data.origin[SetTag::OodBoth] = std::move(sem_origin);
  data.origin[SetTag::OodUniform].assign(cfg.noise_samples, -1);
  data.origin[SetTag::OodGaussian].assign(cfg.noise_samples, -1);
  data.sets[SetTag::Train] = make_set(SetTag::Train, std::move(train), k, std::move(train_labels));
  data.sets[SetTag::Val] = make_set(SetTag::Val, std::move(val), k, std::move(val_labels));
  data.sets[SetTag::OodSemantic] = make_set(SetTag::OodSemantic, std::move(sem), k);
  data.sets[SetTag::OodNonSemantic] = make_set(SetTag::OodNonSemantic, std::move(nonsem), k);
  data.sets[SetTag::OodBoth] = make_set(SetTag::OodBoth, std::move(both), k);
  data.sets[SetTag::OodUniform] = make_set(SetTag::OodUniform, std::move(uniform), k);
  data.sets[SetTag::OodGaussian] = make_set(SetTag::OodGaussian, std::move(gaussian), k);
  return data;
}

std::vector<BenchConfig> ablation_slices(const BenchConfig& base, SliceAxis axis,
                                         std::span<const std::size_t> grid) {
  if (grid.empty()) throw std::invalid_argument("ablation_slices: empty grid");
  std::vector<BenchConfig> out;
  for (std::size_t value : grid) {
    BenchConfig cfg = base;
    if (axis == SliceAxis::NumSamples) {
      cfg.train_per_class = value;
    } else {
      cfg.id_classes = value;
    }
    out.push_back(cfg);
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const BenchData& data, std::string_view header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  std::size_t k = 0;
  for (const auto& [tag, set] : data.sets) {
    if (set.size() > 0) k = set.inputs.dim(1);
  }
  for (std::size_t j = 0; j < k; ++j) out << 'x' << j << ',';
  out << "label,tag\n";
  char buf[32];
  for (const auto& [tag, set] : data.sets) {
    const auto& v = set.inputs.values();
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i * k + j]);
        out << buf << ',';
      }
      if (!set.labels.empty()) out << set.labels[i];
      out << ',' << to_string(tag) << '\n';
    }
  }
}

std::map<SetTag, LabeledSet> read_dataset_csv(std::istream& in) {
  std::map<SetTag, std::pair<Vec, std::vector<int>>> rows;
  std::string line;
  std::size_t k = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      if (cells.size() < 2 || cells[cells.size() - 2] != "label" || cells.back() != "tag") {
        throw std::runtime_error("dataset csv: bad header");
      }
      k = cells.size() - 2;
      header_seen = true;
      continue;
    }
    if (cells.size() != k + 2) throw std::runtime_error("dataset csv: ragged row");
    const SetTag tag = parse_set_tag(cells.back());
    auto& [values, labels] = rows[tag];
    for (std::size_t j = 0; j < k; ++j) values.push_back(std::stod(cells[j]));
    const std::string& label = cells[k];
    if (label.empty() == is_labeled(tag)) {
      throw std::runtime_error("dataset csv: label presence does not match tag " + cells.back());
    }
    if (!label.empty()) labels.push_back(std::stoi(label));
  }
  std::map<SetTag, LabeledSet> out;
  for (auto& [tag, entry] : rows) {
    out[tag] = make_set(tag, std::move(entry.first), k, std::move(entry.second));
  }
  return out;
}

}  // namespace godin
