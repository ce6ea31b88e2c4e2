#pragma once

// Dividend/divisor classifier head: logits f_i = h_i(f^p) / g(f^p).
//
//   h^I_i = w_i . f^p + b_i
//   h^E_i = -||f^p - w_i||^2
//   h^C_i = (w_i . f^p) / (||w_i|| ||f^p||)
//   g     = sigmoid(BN(w_g . f^p + b_g))
//
// The Plain variants fix g = 1, which for PlainI is an ordinary linear
// softmax classifier.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "godin/netcore.hpp"
#include "godin/tensor.hpp"

namespace godin {

enum class HeadVariant { I, E, C, PlainI, PlainE, PlainC };

std::string_view to_string(HeadVariant v);
HeadVariant parse_head_variant(std::string_view text);

enum class Similarity { Inner, Euclid, Cosine };
Similarity similarity_of(HeadVariant v);
bool has_divisor(HeadVariant v);

struct HeadSpec {
  HeadVariant variant = HeadVariant::C;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  bool g_batchnorm = true;

  bool g_enabled() const { return has_divisor(variant); }
  bool has_class_bias() const { return similarity_of(variant) == Similarity::Inner; }
  void validate() const;
};

// Norm floor for the cosine head.
inline constexpr double kCosineNormFloor = 1e-12;
// g is kept inside (0,1): sigmoid saturates to exactly 0 or 1 in double.
inline constexpr double kDivisorFloor = 1e-12;
inline constexpr double kDivisorCeil = 1.0 - 0x1p-53;

// fp [B,d], w [d,C], b [C] -> [B,C]
Tensor h_inner(const Tensor& fp, const Tensor& w, const Tensor& b);
Tensor h_euclid(const Tensor& fp, const Tensor& w);
Tensor h_cosine(const Tensor& fp, const Tensor& w);

// f_i = h_i / g with g [B,1] broadcast across classes; g must be positive.
Tensor deconf_logits(const Tensor& h, const Tensor& g);

class Head {
 public:
  explicit Head(HeadSpec spec);

  const HeadSpec& spec() const { return spec_; }

  Tensor h(const Tensor& fp) const;
  // Throws std::logic_error on a Plain head.
  Tensor g(const Tensor& fp, Mode mode);
  Tensor g(const Tensor& fp) const;

  Tensor class_weight;    // [d,C], the w_i as columns
  Tensor class_bias;      // [C], variant I only (empty otherwise)
  Tensor divisor_weight;  // [d,1]
  Tensor divisor_bias;    // [1]
  std::optional<BatchNorm> divisor_bn;

 private:
  template <class Self>
  static Tensor run_g(Self& self, const Tensor& fp, Mode mode);

  HeadSpec spec_;
};

}  // namespace godin
