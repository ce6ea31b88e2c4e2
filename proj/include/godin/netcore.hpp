#pragma once

// MLP backbone: Linear -> [BatchNorm] -> ReLU per hidden layer, exposing the
// post-activation of every hidden layer and the penultimate features.

#include <cstddef>
#include <optional>
#include <vector>

#include "godin/rng.hpp"
#include "godin/tensor.hpp"

namespace godin {

enum class Mode { Train, Eval };

struct BackboneSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::vector<bool> use_batchnorm;  // one flag per hidden layer
  double head_dropout = 0.0;        // applied to f^p before the head, train mode only

  void validate() const;
  std::size_t feature_dim() const {
    return hidden_dims.empty() ? input_dim : hidden_dims.back();
  }
};

// Per-feature batch normalization. Train mode normalizes with the biased
// batch statistics and updates running <- (1 - momentum) running + momentum batch;
// eval mode uses the running statistics only.
class BatchNorm {
 public:
  explicit BatchNorm(std::size_t features, double momentum = 0.1, double eps = 1e-5);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor forward(const Tensor& x) const;

  std::size_t features() const { return running_mean.size(); }

  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum;
  double eps;
};

struct FeatureBundle {
  std::vector<Tensor> layers;  // f^1..f^L; the input itself for a zero-depth backbone
  Tensor penultimate;          // f^p, same tensor as layers.back()
};

struct DenseLayer {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  std::optional<BatchNorm> bn;
};

class Backbone {
 public:
  explicit Backbone(BackboneSpec spec);

  const BackboneSpec& spec() const { return spec_; }

  FeatureBundle forward(const Tensor& x, Mode mode);
  FeatureBundle forward(const Tensor& x) const;

  std::vector<DenseLayer> layers;

 private:
  template <class Self>
  static FeatureBundle run(Self& self, const Tensor& x, Mode mode);

  BackboneSpec spec_;
};

// Inverted dropout: in train mode each unit is zeroed with probability p and
// survivors are scaled by 1/(1-p). Identity in eval mode or when p == 0.
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);

}  // namespace godin
