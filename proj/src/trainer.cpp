#include "godin/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace godin {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  for (double d : lr_drop_points) {
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("train: lr drop points must lie in (0, 1)");
  }
}

Tensor he_init(Shape shape, std::size_t fan_in, Rng& rng) {
  if (fan_in < 1) throw std::invalid_argument("he_init: fan_in must be >= 1");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<double> data(numel(shape));
  for (double& v : data) v = normal(rng);
  return Tensor(std::move(shape), std::move(data));
}

namespace {
void fill_from(Tensor& dst, const Tensor& src) {
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}
}  // namespace

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  Model model(spec);
  Rng rng(derive_seed(seed, streams::kInit));
  for (auto& layer : model.backbone().layers) {
    const std::size_t fan_in = layer.weight.dim(0);
    fill_from(layer.weight, he_init(layer.weight.shape(), fan_in, rng));
  }
  Head& head = model.head();
  const std::size_t d = spec.head.feature_dim;
  fill_from(head.class_weight, he_init(head.class_weight.shape(), d, rng));
  if (spec.head.g_enabled()) {
    fill_from(head.divisor_weight, he_init(head.divisor_weight.shape(), d, rng));
  }
  return model;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy: logits must be [B,C]");
  const auto classes = static_cast<int>(logits.dim(1));
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
  return neg(mean(pick(log_softmax(logits), labels)));
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  double lr = config.lr0;
  const double e = static_cast<double>(epoch);
  for (double d : config.lr_drop_points) {
    if (e >= d * static_cast<double>(config.epochs)) lr *= 0.1;
  }
  return lr;
}

bool decays(ParamRole role, const TrainConfig& config) {
  switch (role) {
    case ParamRole::HeadClassWeight:
    case ParamRole::HeadClassBias: return false;
    case ParamRole::DivisorWeight:
    case ParamRole::DivisorBias: return config.decay_divisor;
    default: return true;
  }
}

void SgdMomentum::step(std::span<const ParamRef> params, std::span<const Tensor> grads,
                       std::size_t epoch) {
  if (params.size() != grads.size()) throw std::invalid_argument("sgd: params/grads mismatch");
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.tensor.size(), 0.0);
  }
  const double lr = learning_rate(config_, epoch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor param = params[i].tensor;
    auto p = param.mutable_data();
    auto g = grads[i].data();
    if (g.size() != p.size()) throw std::invalid_argument("sgd: gradient shape mismatch");
    const double wd = decays(params[i].role, config_) ? config_.weight_decay : 0.0;
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = config_.momentum * v[k] + (g[k] + wd * p[k]);
      p[k] -= lr * v[k];
    }
  }
}

double accuracy(const Model& model, const LabeledSet& set) {
  if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  constexpr std::size_t kChunk = 512;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < set.size(); begin += kChunk) {
    const std::size_t end = std::min(set.size(), begin + kChunk);
    const auto pred = argmax_rows(model.forward(slice_rows(set.inputs, begin, end)).logits);
    for (std::size_t i = begin; i < end; ++i) {
      if (static_cast<int>(pred[i - begin]) == set.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

TrainHistory train(Model& model, const LabeledSet& train_set, const LabeledSet* val_set,
                   const TrainConfig& config) {
  config.validate();
  const std::size_t n = train_set.size();
  if (n == 0) throw std::invalid_argument("train: empty training set");
  if (train_set.labels.size() != n) throw std::invalid_argument("train: training set needs labels");

  const std::vector<ParamRef> params = model.parameters();
  std::vector<Tensor> wrt;
  for (const auto& p : params) wrt.push_back(p.tensor);
  SgdMomentum optimizer(config);

  TrainHistory history;
  std::vector<std::size_t> order(n);
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(derive_seed(config.seed, streams::kShuffle), epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng dropout_rng(derive_seed(derive_seed(config.seed, streams::kDropout), epoch));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Tensor x = gather_rows(train_set.inputs, rows);
      batch_labels.clear();
      for (std::size_t r : rows) batch_labels.push_back(train_set.labels[r]);

      std::vector<Tensor> grads;
      double batch_loss = 0.0;
      {
        GradTape tape;
        try {
          const ModelOutput out = model.forward(x, Mode::Train, &dropout_rng);
          const Tensor loss = cross_entropy(out.logits, batch_labels);
          batch_loss = loss.item();
          grads = grad(loss, wrt);
          const auto pred = argmax_rows(out.logits);
          for (std::size_t i = 0; i < pred.size(); ++i) {
            if (static_cast<int>(pred[i]) == batch_labels[i]) ++correct;
          }
        } catch (const NumericError& e) {
          throw NumericError("train: diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(begin / config.batch_size) + " (" + e.what() + ")");
        }
      }
      optimizer.step(params, grads, epoch);
      loss_sum += batch_loss * static_cast<double>(end - begin);
    }
    history.loss.push_back(loss_sum / static_cast<double>(n));
    history.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    history.val_accuracy.push_back(val_set ? accuracy(model, *val_set)
                                           : std::numeric_limits<double>::quiet_NaN());
  }
  return history;
}

void write_history_csv(std::ostream& out, const TrainHistory& history,
                       std::string_view header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "epoch,loss,train_acc,val_acc\n";
  char buf[128];
  for (std::size_t e = 0; e < history.loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, history.loss[e],
                  history.train_accuracy[e], history.val_accuracy[e]);
    out << buf;
  }
}

}  // namespace godin
