#include "godin/scorer.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "godin/linalg.hpp"

namespace godin {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Baseline: return "baseline";
    case ScoreKind::Odin: return "odin";
    case ScoreKind::Mahalanobis: return "mahalanobis";
    case ScoreKind::DeConfH: return "deconf-h";
    case ScoreKind::DeConfG: return "deconf-g";
  }
  return "?";
}

ScoreKind parse_score_kind(std::string_view text) {
  for (auto k : {ScoreKind::Baseline, ScoreKind::Odin, ScoreKind::Mahalanobis,
                 ScoreKind::DeConfH, ScoreKind::DeConfG}) {
    if (text == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown score function '" + std::string(text) + "'");
}

// --- Mahalanobis -----------------------------------------------------------

namespace {

// Sample order sorted by (label, features) so that pooled sums do not depend
// on the order the samples arrive in.
std::vector<std::size_t> canonical_order(const std::vector<Tensor>& layers,
                                         std::span<const int> labels) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (labels[a] != labels[b]) return labels[a] < labels[b];
    for (const auto& f : layers) {
      const std::size_t d = f.dim(1);
      const double* ra = f.values().data() + a * d;
      const double* rb = f.values().data() + b * d;
      for (std::size_t j = 0; j < d; ++j) {
        if (ra[j] != rb[j]) return ra[j] < rb[j];
      }
    }
    return false;
  });
  return order;
}

MahalanobisLayer fit_layer(const Tensor& f, std::span<const int> labels,
                           std::span<const std::size_t> order, std::size_t num_classes,
                           std::span<const std::size_t> counts) {
  MahalanobisLayer layer;
  const std::size_t d = f.dim(1);
  const std::size_t n = f.dim(0);
  const auto& v = f.values();
  layer.dim = d;
  layer.means.assign(num_classes * d, 0.0);
  for (std::size_t idx : order) {
    const auto c = static_cast<std::size_t>(labels[idx]);
    for (std::size_t j = 0; j < d; ++j) layer.means[c * d + j] += v[idx * d + j];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t j = 0; j < d; ++j) layer.means[c * d + j] /= static_cast<double>(counts[c]);

  layer.covariance.assign(d * d, 0.0);
  std::vector<double> centered(d);
  for (std::size_t idx : order) {
    const auto c = static_cast<std::size_t>(labels[idx]);
    for (std::size_t j = 0; j < d; ++j) centered[j] = v[idx * d + j] - layer.means[c * d + j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) layer.covariance[a * d + b] += centered[a] * centered[b];
  }
  double trace = 0.0;
  for (double& x : layer.covariance) x /= static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) trace += layer.covariance[j * d + j];
  layer.ridge = kRidgeRelative * trace / static_cast<double>(d) + kRidgeAbsolute;

  std::vector<double> regularized = layer.covariance;
  for (std::size_t j = 0; j < d; ++j) regularized[j * d + j] += layer.ridge;
  auto chol = linalg::cholesky(regularized, d);
  if (!chol) throw std::runtime_error("fit_mahalanobis: covariance is singular after regularization");
  layer.cholesky = std::move(*chol);

  std::vector<double> wm(d * num_classes);
  std::vector<double> z(d);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::copy_n(layer.means.begin() + static_cast<std::ptrdiff_t>(c * d), d, z.begin());
    linalg::solve_lower(layer.cholesky, z, d);
    for (std::size_t j = 0; j < d; ++j) wm[j * num_classes + c] = z[j];
  }
  layer.whitened_means = Tensor({d, num_classes}, std::move(wm));
  return layer;
}

}  // namespace

MahalanobisParams fit_mahalanobis(const std::vector<Tensor>& layer_features,
                                  std::span<const int> labels, std::size_t num_classes) {
  if (layer_features.empty()) throw std::invalid_argument("fit_mahalanobis: no feature layers");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::out_of_range("fit_mahalanobis: label out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] < 2) {
      throw std::invalid_argument("fit_mahalanobis: class " + std::to_string(c) +
                                  " has fewer than 2 samples");
    }
  }
  for (const auto& f : layer_features) {
    if (f.rank() != 2 || f.dim(0) != labels.size()) {
      throw ShapeError("fit_mahalanobis: features do not match labels");
    }
  }
  const auto order = canonical_order(layer_features, labels);
  MahalanobisParams params;
  params.num_classes = num_classes;
  for (const auto& f : layer_features) {
    params.layers.push_back(fit_layer(f, labels, order, num_classes, counts));
  }
  params.layer_weights.assign(params.layers.size(), 1.0);
  return params;
}

MahalanobisParams fit_mahalanobis(const Model& model, const LabeledSet& train_set) {
  const FeatureBundle features = model.backbone().forward(train_set.inputs);
  std::vector<Tensor> untracked;
  for (const auto& f : features.layers) untracked.push_back(f.detach());
  return fit_mahalanobis(untracked, train_set.labels, model.spec().head.num_classes);
}

Tensor whiten(const Tensor& features, const MahalanobisLayer& layer) {
  const std::size_t d = layer.dim;
  if (features.rank() != 2 || features.dim(1) != d) {
    throw ShapeError("whiten: expected [B," + std::to_string(d) + "], got " +
                     to_string(features.shape()));
  }
  const std::size_t rows = features.dim(0);
  std::vector<double> z(features.values());
  for (std::size_t i = 0; i < rows; ++i) {
    linalg::solve_lower(layer.cholesky, std::span<double>(z).subspan(i * d, d), d);
  }
  return make_op("whiten", features.shape(), std::move(z), {features},
                 [rows, d, lower = layer.cholesky](const TapeNode&, std::span<const double> g,
                                                   std::span<std::vector<double>* const> gin) {
                   std::vector<double> y(d);
                   for (std::size_t i = 0; i < rows; ++i) {
                     std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(i * d), d, y.begin());
                     linalg::solve_lower_transposed(lower, y, d);
                     for (std::size_t j = 0; j < d; ++j) (*gin[0])[i * d + j] += y[j];
                   }
                 });
}

std::vector<Tensor> maha_layer_scores(const FeatureBundle& features,
                                      const MahalanobisParams& params) {
  if (features.layers.size() != params.layers.size()) {
    throw std::invalid_argument("mahalanobis: fitted for " + std::to_string(params.layers.size()) +
                                " layers, model exposes " + std::to_string(features.layers.size()));
  }
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const MahalanobisLayer& layer = params.layers[l];
    const Tensor dist = pairwise_sq_dist(whiten(features.layers[l], layer), layer.whitened_means);
    out.push_back(max_along_axis(neg(dist), 1));
  }
  return out;
}

// --- score functions ---------------------------------------------------------

Tensor s_base(const Model& model, const Tensor& x) {
  return max_along_axis(softmax(model.forward(x).logits), 1);
}

Tensor s_odin(const Model& model, const Tensor& x, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("s_odin: temperature must be > 0");
  return max_along_axis(softmax(scale(model.forward(x).logits, 1.0 / temperature)), 1);
}

Tensor s_maha(const Model& model, const MahalanobisParams& params, const Tensor& x) {
  const auto per_layer = maha_layer_scores(model.backbone().forward(x), params);
  Tensor total = per_layer.front();
  if (params.layer_weights.front() != 1.0) total = scale(total, params.layer_weights.front());
  for (std::size_t l = 1; l < per_layer.size(); ++l) {
    const double alpha = params.layer_weights[l];
    total = total + (alpha == 1.0 ? per_layer[l] : scale(per_layer[l], alpha));
  }
  return total;
}

Tensor s_deconf(const Model& model, const Tensor& x, DeConfBranch branch) {
  if (branch == DeConfBranch::G && !model.spec().head.g_enabled()) {
    throw std::logic_error("s_deconf: the g branch needs a dividend/divisor head, got " +
                           std::string(to_string(model.spec().head.variant)));
  }
  const ModelOutput out = model.forward(x);
  if (branch == DeConfBranch::H) return max_along_axis(out.h, 1);
  return *out.g;
}

ScoreFn::ScoreFn(ScoreKind kind, double temperature, std::shared_ptr<const MahalanobisParams> maha)
    : kind_(kind), temperature_(temperature), maha_(std::move(maha)) {
  if (kind_ == ScoreKind::Odin && !(temperature_ > 0.0)) {
    throw std::invalid_argument("score: ODIN temperature must be > 0");
  }
  if (kind_ == ScoreKind::Mahalanobis && !maha_) {
    throw std::invalid_argument("score: Mahalanobis scoring needs fitted parameters");
  }
}

Tensor ScoreFn::operator()(const Model& model, const Tensor& x) const {
  switch (kind_) {
    case ScoreKind::Baseline: return s_base(model, x);
    case ScoreKind::Odin: return s_odin(model, x, temperature_);
    case ScoreKind::Mahalanobis: return s_maha(model, *maha_, x);
    case ScoreKind::DeConfH: return s_deconf(model, x, DeConfBranch::H);
    case ScoreKind::DeConfG: return s_deconf(model, x, DeConfBranch::G);
  }
  throw std::logic_error("unreachable");
}

ScoreFunction ScoreFn::bind(const Model& model) const {
  return [fn = *this, &model](const Tensor& x) { return fn(model, x); };
}

std::vector<double> score_all(const ScoreFunction& fn, const Tensor& x, std::size_t chunk) {
  std::vector<double> out;
  const std::size_t n = x.rank() == 2 ? x.dim(0) : 0;
  out.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    const Tensor s = fn(slice_rows(x, begin, end));
    out.insert(out.end(), s.values().begin(), s.values().end());
  }
  return out;
}

}  // namespace godin
