#include "godin/deconf.hpp"

#include <stdexcept>
#include <type_traits>

namespace godin {

std::string_view to_string(HeadVariant v) {
  switch (v) {
    case HeadVariant::I: return "I";
    case HeadVariant::E: return "E";
    case HeadVariant::C: return "C";
    case HeadVariant::PlainI: return "PlainI";
    case HeadVariant::PlainE: return "PlainE";
    case HeadVariant::PlainC: return "PlainC";
  }
  return "?";
}

HeadVariant parse_head_variant(std::string_view text) {
  for (auto v : {HeadVariant::I, HeadVariant::E, HeadVariant::C, HeadVariant::PlainI,
                 HeadVariant::PlainE, HeadVariant::PlainC}) {
    if (text == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown head variant '" + std::string(text) + "'");
}

Similarity similarity_of(HeadVariant v) {
  switch (v) {
    case HeadVariant::I:
    case HeadVariant::PlainI: return Similarity::Inner;
    case HeadVariant::E:
    case HeadVariant::PlainE: return Similarity::Euclid;
    default: return Similarity::Cosine;
  }
}

bool has_divisor(HeadVariant v) {
  return v == HeadVariant::I || v == HeadVariant::E || v == HeadVariant::C;
}

void HeadSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("head: need at least 2 classes");
  if (feature_dim < 1) throw std::invalid_argument("head: feature_dim must be >= 1");
}

namespace {

void check_head_input(const Tensor& fp, const Tensor& w, const char* who) {
  if (fp.rank() != 2 || w.rank() != 2 || fp.dim(1) != w.dim(0)) {
    throw ShapeError(std::string(who) + ": features " + to_string(fp.shape()) +
                     " do not match weights " + to_string(w.shape()));
  }
}

}  // namespace

Tensor h_inner(const Tensor& fp, const Tensor& w, const Tensor& b) {
  check_head_input(fp, w, "h_inner");
  return matmul(fp, w) + b;
}

Tensor h_euclid(const Tensor& fp, const Tensor& w) {
  check_head_input(fp, w, "h_euclid");
  return neg(pairwise_sq_dist(fp, w));
}

Tensor h_cosine(const Tensor& fp, const Tensor& w) {
  check_head_input(fp, w, "h_cosine");
  const double floor_sq = kCosineNormFloor * kCosineNormFloor;
  const Tensor fp_norm = sqrt(clamp_min(sum_along_axis(square(fp), 1), floor_sq));  // [B,1]
  const Tensor w_norm = sqrt(clamp_min(sum_along_axis(square(w), 0), floor_sq));    // [1,C]
  return clamp(matmul(fp, w) / fp_norm / w_norm, -1.0, 1.0);
}

Tensor deconf_logits(const Tensor& h, const Tensor& g) {
  for (double v : g.values()) {
    if (!(v > 0.0)) throw NumericError("logits: non-positive divisor");
  }
  return h / g;
}

Head::Head(HeadSpec spec) : spec_(spec) {
  spec_.validate();
  const std::size_t d = spec_.feature_dim, c = spec_.num_classes;
  class_weight = Tensor::zeros({d, c}).set_requires_grad(true);
  if (spec_.has_class_bias()) class_bias = Tensor::zeros({c}).set_requires_grad(true);
  if (spec_.g_enabled()) {
    divisor_weight = Tensor::zeros({d, 1}).set_requires_grad(true);
    divisor_bias = Tensor::zeros({1}).set_requires_grad(true);
    if (spec_.g_batchnorm) {
      divisor_bn.emplace(1);
      divisor_bn->gamma.set_requires_grad(true);
      divisor_bn->beta.set_requires_grad(true);
    }
  }
}

Tensor Head::h(const Tensor& fp) const {
  switch (similarity_of(spec_.variant)) {
    case Similarity::Inner: return h_inner(fp, class_weight, class_bias);
    case Similarity::Euclid: return h_euclid(fp, class_weight);
    case Similarity::Cosine: return h_cosine(fp, class_weight);
  }
  throw std::logic_error("unreachable");
}

template <class Self>
Tensor Head::run_g(Self& self, const Tensor& fp, Mode mode) {
  if (!self.spec_.g_enabled()) {
    throw std::logic_error("head: variant " + std::string(to_string(self.spec_.variant)) +
                           " has no divisor branch");
  }
  check_head_input(fp, self.divisor_weight, "g_divisor");
  Tensor pre = matmul(fp, self.divisor_weight) + self.divisor_bias;
  if (self.divisor_bn) {
    if constexpr (std::is_const_v<Self>) {
      pre = self.divisor_bn->forward(pre);
    } else {
      pre = self.divisor_bn->forward(pre, mode);
    }
  }
  return clamp(sigmoid(pre), kDivisorFloor, kDivisorCeil);
}

Tensor Head::g(const Tensor& fp, Mode mode) { return run_g(*this, fp, mode); }

Tensor Head::g(const Tensor& fp) const { return run_g(*this, fp, Mode::Eval); }

}  // namespace godin
