#include "doctest.h"

#include <cmath>
#include <sstream>

#include "godin/checkpoint.hpp"
#include "godin/trainer.hpp"
#include "support.hpp"

using namespace godin;

namespace {

LabeledSet blobs(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double cx = c == 0 ? -3.0 : 3.0;
      x.push_back(cx + n(rng));
      x.push_back(n(rng));
      y.push_back(c);
    }
  }
  LabeledSet s;
  s.tag = SetTag::Train;
  s.inputs = Tensor::matrix(2 * per_class, 2, std::move(x));
  s.labels = std::move(y);
  return s;
}

ModelSpec small_spec(HeadVariant v = HeadVariant::C) {
  ModelSpec spec;
  spec.backbone.input_dim = 2;
  spec.backbone.hidden_dims = {8};
  spec.backbone.use_batchnorm = {true};
  spec.head.variant = v;
  spec.head.num_classes = 2;
  spec.head.feature_dim = 8;
  return spec;
}

std::vector<std::vector<double>> snapshot(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.push_back(p.tensor.values());
  return out;
}

}  // namespace

TEST_CASE("he_init statistics") {
  Rng rng(1);
  const Tensor t = he_init({1000, 1000}, 2, rng);
  double mean = 0.0;
  for (double v : t.values()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size());
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);

  Rng a(7), b(7);
  CHECK(he_init({3, 4}, 3, a).values() == he_init({3, 4}, 3, b).values());
  CHECK_THROWS(he_init({2, 2}, 0, a));
}

TEST_CASE("cross entropy examples") {
  const std::vector<int> zero{0};
  CHECK(cross_entropy(Tensor::matrix(1, 2, {0, 0}), zero).item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(Tensor::matrix(1, 2, {60, 0}), zero).item() < 1e-20);

  const std::vector<int> two{2};
  const double got = cross_entropy(Tensor::matrix(1, 3, {1, 2, 3}), two).item();
  const long double oracle =
      -std::log(std::exp(3.0L) / (std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L)));
  CHECK(std::abs(got - static_cast<double>(oracle)) < 1e-14);
  CHECK(std::abs(got - 0.40761) < 1e-5);

  const std::vector<int> bad{3};
  CHECK_THROWS_AS(cross_entropy(Tensor::matrix(1, 3, {1, 2, 3}), bad), std::out_of_range);
}

TEST_CASE("sgd step arithmetic and decay exclusion") {
  TrainConfig cfg;
  cfg.lr0 = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.1;
  cfg.lr_drop_points = {};
  Tensor plain = Tensor({1}, {1.0});
  Tensor centroid = Tensor({1}, {1.0});
  const std::vector<ParamRef> params{{"w", ParamRole::BackboneWeight, plain},
                                     {"h", ParamRole::HeadClassWeight, centroid}};
  const std::vector<Tensor> grads{Tensor({1}, {0.0}), Tensor({1}, {0.0})};
  SgdMomentum opt(cfg);
  opt.step(params, grads, 0);
  CHECK(plain.item() == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(centroid.item() == 1.0);
}

TEST_CASE("momentum accumulates") {
  TrainConfig cfg;
  cfg.lr0 = 0.5;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  cfg.lr_drop_points = {};
  Tensor p = Tensor({1}, {0.0});
  const std::vector<ParamRef> params{{"p", ParamRole::BackboneBias, p}};
  const std::vector<Tensor> grads{Tensor({1}, {1.0})};
  SgdMomentum opt(cfg);
  opt.step(params, grads, 0);  // v = 1
  opt.step(params, grads, 0);  // v = 1.9
  CHECK(p.item() == doctest::Approx(-0.5 * (1.0 + 1.9)).epsilon(1e-15));
}

TEST_CASE("decayed parameter set never contains class weights") {
  TrainConfig cfg;
  for (bool flag : {true, false}) {
    cfg.decay_divisor = flag;
    CHECK_FALSE(decays(ParamRole::HeadClassWeight, cfg));
    CHECK_FALSE(decays(ParamRole::HeadClassBias, cfg));
    CHECK(decays(ParamRole::DivisorWeight, cfg) == flag);
    CHECK(decays(ParamRole::DivisorBias, cfg) == flag);
    CHECK(decays(ParamRole::BackboneWeight, cfg));
  }
  Model model(small_spec(HeadVariant::I));
  cfg.decay_divisor = true;
  for (const auto& p : model.parameters()) {
    const bool is_centroid = p.name == "head.class_weight" || p.name == "head.class_bias";
    CHECK(decays(p.role, cfg) == !is_centroid);
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.epochs = 200;
  CHECK(learning_rate(cfg, 0) == 0.1);
  CHECK(learning_rate(cfg, 99) == 0.1);
  CHECK(learning_rate(cfg, 100) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(learning_rate(cfg, 149) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(learning_rate(cfg, 150) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(learning_rate(cfg, 199) == doctest::Approx(0.001).epsilon(1e-15));
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.lr0 = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.lr_drop_points = {1.0};
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("separable blobs are learned") {
  const LabeledSet data = blobs(100, 3);
  for (HeadVariant v : {HeadVariant::PlainI, HeadVariant::I, HeadVariant::E, HeadVariant::C}) {
    Model model = init_model(small_spec(v), 5);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 32;
    cfg.seed = 5;
    const TrainHistory h = train(model, data, nullptr, cfg);
    INFO("variant " << to_string(v));
    CHECK(h.loss.size() == 50);
    CHECK(h.train_accuracy.size() == 50);
    for (double l : h.loss) CHECK(std::isfinite(l));
    CHECK(accuracy(model, data) >= 0.99);
  }
}

TEST_CASE("zero epochs leave the model untouched") {
  Model model = init_model(small_spec(), 9);
  const auto before = snapshot(model);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainHistory h = train(model, blobs(10, 1), nullptr, cfg);
  CHECK(h.loss.empty());
  CHECK(snapshot(model) == before);
}

TEST_CASE("training is deterministic given the seed") {
  const LabeledSet data = blobs(40, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.seed = 11;
  ModelSpec spec = small_spec();
  spec.backbone.head_dropout = 0.3;
  Model a = init_model(spec, 11), b = init_model(spec, 11);
  train(a, data, &data, cfg);
  train(b, data, &data, cfg);
  CHECK(snapshot(a) == snapshot(b));
  ExperimentConfig ec;
  CHECK(checkpoint_to_json(ec, a).dump() == checkpoint_to_json(ec, b).dump());

  cfg.seed = 12;
  Model c = init_model(spec, 11);
  train(c, data, &data, cfg);
  CHECK(snapshot(a) != snapshot(c));
}

TEST_CASE("divergence aborts with a diagnostic") {
  Model model = init_model(small_spec(HeadVariant::PlainI), 1);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.lr0 = 1e200;
  cfg.momentum = 0.0;
  try {
    train(model, blobs(20, 1), nullptr, cfg);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("history csv layout") {
  TrainHistory h;
  h.loss = {0.5};
  h.train_accuracy = {0.75};
  h.val_accuracy = {1.0};
  std::ostringstream out;
  write_history_csv(out, h, "config_hash=x seed=1");
  CHECK(out.str() == "# config_hash=x seed=1\nepoch,loss,train_acc,val_acc\n0,0.5,0.75,1\n");
}
