#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "godin/model.hpp"
#include "godin/rng.hpp"
#include "godin/tensor.hpp"

namespace testing {

using godin::Tensor;

inline Tensor random_tensor(godin::Shape shape, godin::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(godin::numel(shape));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

inline Tensor random_normal(godin::Shape shape, godin::Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(godin::numel(shape));
  for (double& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero partials from
// turning round-off into huge relative errors.
inline double rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Max relative error between reverse-mode gradients of f() with respect to
// each tensor in wrt and central differences. f must rebuild its result from
// the current contents of wrt every call.
inline double fd_check(const std::function<Tensor()>& f, std::vector<Tensor> wrt, double h = 1e-5) {
  std::vector<Tensor> analytic;
  {
    godin::GradTape tape;
    const Tensor out = f();
    analytic = godin::grad(out, wrt);
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < wrt.size(); ++t) {
    auto data = wrt[t].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = f().item();
      data[i] = keep - h;
      const double down = f().item();
      data[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, rel_error(analytic[t].values()[i], numeric));
    }
  }
  return worst;
}

inline std::vector<Tensor> param_tensors(const godin::Model& model) {
  std::vector<Tensor> out;
  for (const auto& p : model.parameters()) out.push_back(p.tensor);
  return out;
}

// Randomizes every parameter and BN running statistic of a model so that no
// path is trivially zero or identity.
inline void scramble(godin::Model& model, godin::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  for (auto& p : model.parameters()) {
    auto d = p.tensor.mutable_data();
    const bool bn_scale = p.role == godin::ParamRole::BatchNormScale ||
                          p.role == godin::ParamRole::DivisorBatchNormScale;
    for (double& x : d) x = bn_scale ? pos(rng) : u(rng);
  }
  for (auto& ref : model.batchnorms()) {
    for (double& m : ref.bn->running_mean) m = 0.3 * u(rng);
    for (double& v : ref.bn->running_var) v = pos(rng);
  }
}

}  // namespace testing
