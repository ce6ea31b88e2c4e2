#include "godin/netcore.hpp"

#include <cmath>
#include <type_traits>
#include <utility>

namespace godin {

void BackboneSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("backbone: input_dim must be >= 1");
  for (std::size_t d : hidden_dims) {
    if (d < 1) throw std::invalid_argument("backbone: hidden dims must be >= 1");
  }
  if (use_batchnorm.size() != hidden_dims.size()) {
    throw std::invalid_argument("backbone: need one batchnorm flag per hidden layer");
  }
  if (!(head_dropout >= 0.0 && head_dropout < 1.0)) {
    throw std::invalid_argument("backbone: head dropout must lie in [0, 1)");
  }
}

// --- BatchNorm -------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t features, double momentum_, double eps_)
    : gamma(Tensor::full({features}, 1.0)),
      beta(Tensor::zeros({features})),
      running_mean(features, 0.0),
      running_var(features, 1.0),
      momentum(momentum_),
      eps(eps_) {}

namespace {

void check_features(const Tensor& x, std::size_t features, const char* who) {
  if (x.rank() != 2 || x.dim(1) != features) {
    throw ShapeError(std::string(who) + ": expected [B," + std::to_string(features) + "], got " +
                     to_string(x.shape()));
  }
}

}  // namespace

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::Eval) return std::as_const(*this).forward(x);
  check_features(x, features(), "batchnorm");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (rows == 0) throw ShapeError("batchnorm: empty batch");
  const auto& v = x.values();

  std::vector<double> mu(cols, 0.0), var(cols, 0.0), inv_std(cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) mu[j] += v[i * cols + j];
  for (auto& m : mu) m /= static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double c = v[i * cols + j] - mu[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < cols; ++j) {
    var[j] /= static_cast<double>(rows);
    inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  }

  std::vector<double> xhat(v.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      xhat[i * cols + j] = (v[i * cols + j] - mu[j]) * inv_std[j];

  Tensor normalized = make_op(
      "batchnorm", x.shape(), std::move(xhat), {x},
      [rows, cols, inv_std](const TapeNode& node, std::span<const double> g,
                            std::span<std::vector<double>* const> gin) {
        const auto& y = node.output->data;
        auto& gx = *gin[0];
        const double n = static_cast<double>(rows);
        for (std::size_t j = 0; j < cols; ++j) {
          double gsum = 0.0, gysum = 0.0;
          for (std::size_t i = 0; i < rows; ++i) {
            gsum += g[i * cols + j];
            gysum += g[i * cols + j] * y[i * cols + j];
          }
          for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t k = i * cols + j;
            gx[k] += inv_std[j] / n * (n * g[k] - gsum - y[k] * gysum);
          }
        }
      });

  for (std::size_t j = 0; j < cols; ++j) {
    running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mu[j];
    running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j];
  }
  return normalized * gamma + beta;
}

Tensor BatchNorm::forward(const Tensor& x) const {
  check_features(x, features(), "batchnorm");
  std::vector<double> inv(features());
  for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / std::sqrt(running_var[j] + eps);
  const Tensor shift(Shape{features()}, running_mean);
  const Tensor inv_std(Shape{features()}, std::move(inv));
  return (x - shift) * inv_std * gamma + beta;
}

// --- Backbone --------------------------------------------------------------

Backbone::Backbone(BackboneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.input_dim;
  for (std::size_t l = 0; l < spec_.hidden_dims.size(); ++l) {
    const std::size_t out = spec_.hidden_dims[l];
    DenseLayer layer{Tensor::zeros({in, out}), Tensor::zeros({out}), std::nullopt};
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    if (spec_.use_batchnorm[l]) {
      layer.bn.emplace(out);
      layer.bn->gamma.set_requires_grad(true);
      layer.bn->beta.set_requires_grad(true);
    }
    layers.push_back(std::move(layer));
    in = out;
  }
}

template <class Self>
FeatureBundle Backbone::run(Self& self, const Tensor& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != self.spec_.input_dim) {
    throw ShapeError("backbone: expected input [B," + std::to_string(self.spec_.input_dim) +
                     "], got " + to_string(x.shape()));
  }
  FeatureBundle out;
  Tensor h = x;
  for (auto& layer : self.layers) {
    h = matmul(h, layer.weight) + layer.bias;
    if (layer.bn) {
      if constexpr (std::is_const_v<Self>) {
        h = layer.bn->forward(h);
      } else {
        h = layer.bn->forward(h, mode);
      }
    }
    h = relu(h);
    out.layers.push_back(h);
  }
  if (out.layers.empty()) out.layers.push_back(x);
  out.penultimate = out.layers.back();
  return out;
}

FeatureBundle Backbone::forward(const Tensor& x, Mode mode) { return run(*this, x, mode); }

FeatureBundle Backbone::forward(const Tensor& x) const { return run(*this, x, Mode::Eval); }

// --- dropout ---------------------------------------------------------------

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (mode == Mode::Eval || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const double survivor = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng) ? survivor : 0.0;
  return x * Tensor(x.shape(), std::move(mask));
}

}  // namespace godin
