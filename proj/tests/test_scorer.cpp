#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "godin/scorer.hpp"
#include "godin/trainer.hpp"
#include "support.hpp"

using namespace godin;
using testing::fd_check;
using testing::random_tensor;

namespace {

// Zero-depth PlainI model whose logits are the inputs themselves.
Model identity_model(std::size_t c) {
  ModelSpec spec;
  spec.backbone.input_dim = c;
  spec.head.variant = HeadVariant::PlainI;
  spec.head.num_classes = c;
  spec.head.feature_dim = c;
  Model m(spec);
  auto w = m.head().class_weight.mutable_data();
  for (std::size_t i = 0; i < c; ++i) w[i * c + i] = 1.0;
  return m;
}

Model small_model(HeadVariant v, Rng& rng, std::vector<std::size_t> hidden = {5, 4}) {
  ModelSpec spec;
  spec.backbone.input_dim = 4;
  spec.backbone.use_batchnorm.assign(hidden.size(), true);
  spec.backbone.hidden_dims = hidden;
  spec.head.variant = v;
  spec.head.num_classes = 3;
  spec.head.feature_dim = hidden.empty() ? 4 : hidden.back();
  Model m = init_model(spec, 1);
  testing::scramble(m, rng);
  return m;
}

// Gauss-Jordan inverse in long double.
std::vector<long double> invert(std::vector<long double> a, std::size_t d) {
  std::vector<long double> inv(d * d, 0.0L);
  for (std::size_t i = 0; i < d; ++i) inv[i * d + i] = 1.0L;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::fabs(a[r * d + col]) > std::fabs(a[piv * d + col])) piv = r;
    for (std::size_t j = 0; j < d; ++j) {
      std::swap(a[col * d + j], a[piv * d + j]);
      std::swap(inv[col * d + j], inv[piv * d + j]);
    }
    const long double p = a[col * d + col];
    for (std::size_t j = 0; j < d; ++j) {
      a[col * d + j] /= p;
      inv[col * d + j] /= p;
    }
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const long double f = a[r * d + col];
      for (std::size_t j = 0; j < d; ++j) {
        a[r * d + j] -= f * a[col * d + j];
        inv[r * d + j] -= f * inv[col * d + j];
      }
    }
  }
  return inv;
}

// max_c -(f - mu_c)^T (Sigma + ridge I)^{-1} (f - mu_c), straight from the
// definition.
std::vector<double> brute_maha(const Tensor& train, const std::vector<int>& labels, std::size_t classes,
                               const Tensor& query) {
  const std::size_t n = train.dim(0), d = train.dim(1);
  std::vector<long double> mu(classes * d, 0.0L);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++count[labels[i]];
    for (std::size_t j = 0; j < d; ++j) mu[labels[i] * d + j] += train(i, j);
  }
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t j = 0; j < d; ++j) mu[c * d + j] /= count[c];
  std::vector<long double> cov(d * d, 0.0L);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov[a * d + b] += (train(i, a) - mu[labels[i] * d + a]) * (train(i, b) - mu[labels[i] * d + b]);
  long double trace = 0.0L;
  for (auto& v : cov) v /= n;
  for (std::size_t j = 0; j < d; ++j) trace += cov[j * d + j];
  for (std::size_t j = 0; j < d; ++j) cov[j * d + j] += 1e-6L * trace / d + 1e-12L;
  const auto inv = invert(cov, d);
  std::vector<double> out;
  for (std::size_t q = 0; q < query.dim(0); ++q) {
    long double best = -1e300L;
    for (std::size_t c = 0; c < classes; ++c) {
      long double m = 0.0L;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          m += (query(q, a) - mu[c * d + a]) * inv[a * d + b] * (query(q, b) - mu[c * d + b]);
      best = std::max(best, -m);
    }
    out.push_back(static_cast<double>(best));
  }
  return out;
}

}  // namespace

TEST_CASE("baseline examples") {
  const Model m3 = identity_model(3);
  const double got = s_base(m3, Tensor::matrix(1, 3, {1, 2, 3})).item();
  const long double oracle = std::exp(3.0L) / (std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L));
  CHECK(std::abs(got - static_cast<double>(oracle)) < 1e-15);
  CHECK(std::abs(got - 0.66524096) < 1e-8);

  const Model m4 = identity_model(4);
  CHECK(s_base(m4, Tensor::matrix(1, 4, {2, 2, 2, 2})).item() == doctest::Approx(0.25).epsilon(1e-15));

  Rng rng(1);
  const Tensor s = s_base(m4, random_tensor({500, 4}, rng, -30, 30));
  for (double v : s.values()) CHECK((v >= 0.25 - 1e-15 && v <= 1.0));
}

TEST_CASE("odin examples") {
  Rng rng(2);
  const Model m = small_model(HeadVariant::PlainI, rng);
  const Tensor x = random_tensor({50, 4}, rng, -2, 2);
  CHECK(s_odin(m, x, 1.0).values() == s_base(m, x).values());

  const Model m2 = identity_model(2);
  const double got = s_odin(m2, Tensor::matrix(1, 2, {1000, 0}), 1000.0).item();
  CHECK(std::abs(got - 1.0 / (1.0 + std::exp(-1.0))) < 1e-15);
  CHECK(std::abs(got - 0.7310586) < 1e-7);
  CHECK_THROWS(s_odin(m2, Tensor::matrix(1, 2, {1, 0}), 0.0));
  CHECK_THROWS(ScoreFn(ScoreKind::Odin, -1.0));

  // The predicted class is the same under any temperature.
  const Model m3 = identity_model(3);
  const Tensor logits = random_tensor({200, 3}, rng, -5, 5);
  const auto pred = argmax_rows(logits);
  for (double t : {1.0, 10.0, 1000.0}) {
    const Tensor p = softmax(scale(logits, 1.0 / t));
    CHECK(argmax_rows(p) == pred);
    // The max probability shrinks toward 1/C as T grows, never below it.
    const Tensor st = s_odin(m3, logits, t);
    for (double v : st.values()) CHECK(v >= 1.0 / 3.0 - 1e-15);
  }
}

TEST_CASE("mahalanobis fit on a 1-d example") {
  const Tensor f = Tensor::matrix(4, 1, {0, 2, 10, 12});
  const std::vector<int> y{0, 0, 1, 1};
  const auto p = fit_mahalanobis({f}, y, 2);
  REQUIRE(p.layers.size() == 1);
  CHECK(p.layers[0].means == std::vector<double>{1.0, 11.0});
  CHECK(p.layers[0].covariance == std::vector<double>{1.0});
  CHECK(p.layers[0].ridge == doctest::Approx(1e-6 + 1e-12).epsilon(1e-12));
  CHECK(p.layer_weights == std::vector<double>{1.0});

  // A point one unit from the nearest mean.
  FeatureBundle fb;
  fb.layers = {Tensor::matrix(1, 1, {2.0})};
  const double s = maha_layer_scores(fb, p)[0].item();
  CHECK(s == doctest::Approx(-1.0 / (1.0 + 1e-6 + 1e-12)).epsilon(1e-12));
  fb.layers = {Tensor::matrix(1, 1, {11.0})};
  CHECK(std::abs(maha_layer_scores(fb, p)[0].item()) < 1e-20);
}

TEST_CASE("mahalanobis fit on a 2-d example") {
  // Class scatter is the identity once pooled.
  const Tensor f = Tensor::matrix(8, 2, {1, 0, -1, 0, 0, 1, 0, -1, 11, 0, 9, 0, 10, 1, 10, -1});
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  const auto p = fit_mahalanobis({f}, y, 2);
  CHECK(p.layers[0].covariance[0] == 0.5);
  CHECK(p.layers[0].covariance[1] == 0.0);
  CHECK(p.layers[0].covariance[3] == 0.5);
  FeatureBundle fb;
  fb.layers = {Tensor::matrix(1, 2, {0.5, 0.5})};
  // (0.25 + 0.25) / 0.5 = 1
  CHECK(maha_layer_scores(fb, p)[0].item() == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("zero scatter leaves only the absolute ridge") {
  const Tensor f = Tensor::matrix(4, 2, {1, 1, 1, 1, 3, 3, 3, 3});
  const auto p = fit_mahalanobis({f}, std::vector<int>{0, 0, 1, 1}, 2);
  CHECK(p.layers[0].ridge == kRidgeAbsolute);
}

TEST_CASE("mahalanobis fit is order independent and needs two samples per class") {
  Rng rng(3);
  const Tensor f = testing::random_normal({30, 3}, rng);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 3);
  const auto p = fit_mahalanobis({f}, y, 3);

  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> py;
  for (std::size_t i : perm) py.push_back(y[i]);
  const auto q = fit_mahalanobis({gather_rows(f, perm)}, py, 3);
  CHECK(p.layers[0].means == q.layers[0].means);
  CHECK(p.layers[0].covariance == q.layers[0].covariance);
  CHECK(p.layers[0].cholesky == q.layers[0].cholesky);

  const Tensor three = Tensor::matrix(3, 1, {0, 1, 2});
  CHECK_THROWS_AS(fit_mahalanobis({three}, std::vector<int>{0, 0, 1}, 2), std::invalid_argument);
  CHECK_THROWS(fit_mahalanobis({three}, std::vector<int>{0, 0, 5}, 2));
}

TEST_CASE("mahalanobis agrees with a brute-force oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + static_cast<std::size_t>(trial % 5);
    const Tensor f = testing::random_normal({40, d}, rng, 2.0);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 4);
    const auto p = fit_mahalanobis({f}, y, 4);
    const Tensor query = testing::random_normal({10, d}, rng, 3.0);
    FeatureBundle fb;
    fb.layers = {query};
    const auto got = maha_layer_scores(fb, p)[0].values();
    const auto want = brute_maha(f, y, 4, query);
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got[i] <= 0.0);
      CHECK(testing::rel_error(got[i], want[i], 1.0) < 1e-9);
    }
  }
}

TEST_CASE("s_maha sums hidden-layer scores") {
  Rng rng(5);
  Model m = small_model(HeadVariant::C, rng);
  const Tensor train = random_tensor({60, 4}, rng, -2, 2);
  LabeledSet set;
  set.inputs = train;
  for (std::size_t i = 0; i < 60; ++i) set.labels.push_back(static_cast<int>(i % 3));
  const auto p = fit_mahalanobis(m, set);
  CHECK(p.layers.size() == 2);  // f^p is the last hidden layer, counted once
  const Tensor x = random_tensor({7, 4}, rng, -2, 2);
  const auto per_layer = maha_layer_scores(m.backbone().forward(x), p);
  const auto total = s_maha(m, p, x).values();
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(per_layer[0].values()[i] <= 0.0);
    CHECK(per_layer[1].values()[i] <= 0.0);
    CHECK(total[i] == per_layer[0].values()[i] + per_layer[1].values()[i]);
  }
  CHECK_THROWS(ScoreFn(ScoreKind::Mahalanobis));
}

TEST_CASE("deconf score ranges") {
  Rng rng(6);
  const Model c = small_model(HeadVariant::C, rng);
  const Tensor x = random_tensor({300, 4}, rng, -10, 10);
  const Tensor ch = s_deconf(c, x, DeConfBranch::H), cg = s_deconf(c, x, DeConfBranch::G);
  for (double v : ch.values()) CHECK((v >= -1.0 && v <= 1.0));
  for (double v : cg.values()) CHECK((v > 0.0 && v < 1.0));
  const Model e = small_model(HeadVariant::E, rng);
  const Tensor eh = s_deconf(e, x, DeConfBranch::H);
  for (double v : eh.values()) CHECK(v <= 0.0);

  const Model plain = small_model(HeadVariant::PlainI, rng);
  CHECK_THROWS_AS(s_deconf(plain, x, DeConfBranch::G), std::logic_error);
  // On a plain head the h branch is the max logit.
  const Tensor logits = plain.forward(x).logits;
  CHECK(s_deconf(plain, x, DeConfBranch::H).values() == max_along_axis(logits, 1).values());
}

TEST_CASE("score input gradients pass finite differences") {
  Rng rng(7);
  for (HeadVariant v : {HeadVariant::I, HeadVariant::E, HeadVariant::C, HeadVariant::PlainI}) {
    Model m = small_model(v, rng);
    LabeledSet set;
    set.inputs = random_tensor({30, 4}, rng, -2, 2);
    for (std::size_t i = 0; i < 30; ++i) set.labels.push_back(static_cast<int>(i % 3));
    auto maha = std::make_shared<const MahalanobisParams>(fit_mahalanobis(m, set));
    std::vector<ScoreFn> fns{ScoreFn(ScoreKind::Baseline), ScoreFn(ScoreKind::Odin, 10.0),
                             ScoreFn(ScoreKind::Mahalanobis, kOdinTemperature, maha),
                             ScoreFn(ScoreKind::DeConfH)};
    if (has_divisor(v)) fns.emplace_back(ScoreKind::DeConfG);
    for (const auto& fn : fns) {
      Tensor x = random_tensor({3, 4}, rng).set_requires_grad(true);
      INFO(to_string(v) << " " << fn.name());
      CHECK(fd_check([&] { return sum(fn(m, x)); }, {x}) < 1e-5);
    }
  }
}

TEST_CASE("score_all matches a single batch") {
  Rng rng(8);
  const Model m = small_model(HeadVariant::C, rng);
  const Tensor x = random_tensor({37, 4}, rng);
  const auto fn = ScoreFn(ScoreKind::DeConfH).bind(m);
  CHECK(score_all(fn, x, 5) == fn(x).values());
  CHECK(parse_score_kind("deconf-g") == ScoreKind::DeConfG);
  CHECK_THROWS(parse_score_kind("energy"));
}
