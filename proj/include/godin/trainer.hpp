#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "godin/model.hpp"
#include "godin/rng.hpp"
#include "godin/shiftbench.hpp"
#include "godin/tensor.hpp"

namespace godin {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> lr_drop_points{0.5, 0.75};  // fractions of total epochs
  bool decay_divisor = true;                      // weight decay on w_g, b_g
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;  // NaN when no validation set was given
};

// Zero-mean normal with variance 2 / fan_in.
Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng);

// Model with He-initialized weights (backbone, class and divisor weights),
// zero biases, unit BN scale.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

// Mean negative log-likelihood of the true class, via log-softmax.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

double learning_rate(const TrainConfig& config, std::size_t epoch);

// Whether the optimizer applies weight decay to a parameter of this role.
// Head class weights and biases act as class centroids and are never decayed.
bool decays(ParamRole role, const TrainConfig& config);

// SGD with momentum and L2 weight decay folded into the gradient:
//   v <- momentum * v + (grad + wd * p);  p <- p - lr * v
class SgdMomentum {
 public:
  explicit SgdMomentum(const TrainConfig& config) : config_(config) {}

  void step(std::span<const ParamRef> params, std::span<const Tensor> grads, std::size_t epoch);

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> velocity_;
};

// Single-threaded minibatch training. Batches are reshuffled every epoch with
// an rng derived from (seed, epoch). Throws NumericError on a non-finite loss.
TrainHistory train(Model& model, const LabeledSet& train_set, const LabeledSet* val_set,
                   const TrainConfig& config);

double accuracy(const Model& model, const LabeledSet& set);

void write_history_csv(std::ostream& out, const TrainHistory& history,
                       std::string_view header_comment);

}  // namespace godin
