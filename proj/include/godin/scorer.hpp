#pragma once

// Scoring functions S(x); higher means "more in-distribution". Every score is
// a differentiable [B,1] tensor so input preprocessing can follow its
// gradient.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "godin/model.hpp"
#include "godin/shiftbench.hpp"
#include "godin/tensor.hpp"

namespace godin {

enum class ScoreKind { Baseline, Odin, Mahalanobis, DeConfH, DeConfG };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

inline constexpr double kOdinTemperature = 1000.0;

// Tied-covariance Gaussian fit of one feature layer.
struct MahalanobisLayer {
  std::size_t dim = 0;
  std::vector<double> means;       // [C, d] row-major class means
  std::vector<double> covariance;  // [d, d] pooled, before the ridge
  double ridge = 0.0;              // added to the diagonal before factoring
  std::vector<double> cholesky;    // lower factor of covariance + ridge * I
  Tensor whitened_means;           // [d, C]: L^{-1} mu_c as columns
};

struct MahalanobisParams {
  std::vector<MahalanobisLayer> layers;
  std::vector<double> layer_weights;  // alpha_l, all 1
  std::size_t num_classes = 0;
};

// Relative ridge lambda = kRidgeRelative * trace / d, plus kRidgeAbsolute so a
// zero-scatter layer still factors.
inline constexpr double kRidgeRelative = 1e-6;
inline constexpr double kRidgeAbsolute = 1e-12;

// Pools per-layer features of a labeled set. Throws when a class has fewer
// than two samples or a covariance cannot be factored.
MahalanobisParams fit_mahalanobis(const std::vector<Tensor>& layer_features,
                                  std::span<const int> labels, std::size_t num_classes);
MahalanobisParams fit_mahalanobis(const Model& model, const LabeledSet& train_set);

// [B,d] -> [B,d] rows z solving L z = f (differentiable in f).
Tensor whiten(const Tensor& features, const MahalanobisLayer& layer);

// Per-layer S^l = max_c -(f - mu_c)^T Sigma^{-1} (f - mu_c), each [B,1].
std::vector<Tensor> maha_layer_scores(const FeatureBundle& features, const MahalanobisParams& params);

Tensor s_base(const Model& model, const Tensor& x);
Tensor s_odin(const Model& model, const Tensor& x, double temperature);
Tensor s_maha(const Model& model, const MahalanobisParams& params, const Tensor& x);
enum class DeConfBranch { H, G };
Tensor s_deconf(const Model& model, const Tensor& x, DeConfBranch branch);

// A bound scoring function over inputs: x [B,k] -> [B,1].
using ScoreFunction = std::function<Tensor(const Tensor&)>;

class ScoreFn {
 public:
  ScoreFn(ScoreKind kind, double temperature = kOdinTemperature,
          std::shared_ptr<const MahalanobisParams> maha = nullptr);

  ScoreKind kind() const { return kind_; }
  double temperature() const { return temperature_; }
  std::string name() const { return std::string(to_string(kind_)); }

  Tensor operator()(const Model& model, const Tensor& x) const;
  // The returned callable references model; keep it alive.
  ScoreFunction bind(const Model& model) const;

 private:
  ScoreKind kind_;
  double temperature_;
  std::shared_ptr<const MahalanobisParams> maha_;
};

// Untracked scores of a whole set, evaluated in chunks.
std::vector<double> score_all(const ScoreFunction& fn, const Tensor& x, std::size_t chunk = 512);

}  // namespace godin
