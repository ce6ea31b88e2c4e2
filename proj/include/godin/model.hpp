#pragma once

#include <optional>
#include <string>
#include <vector>

#include "godin/deconf.hpp"
#include "godin/netcore.hpp"
#include "godin/rng.hpp"

namespace godin {

struct ModelSpec {
  BackboneSpec backbone;
  HeadSpec head;

  void validate() const;
};

struct ModelOutput {
  FeatureBundle features;
  Tensor h;
  std::optional<Tensor> g;  // absent for Plain heads
  Tensor logits;
};

// What a parameter is, for optimizer rules (weight-decay exclusion) and
// checkpoint naming.
enum class ParamRole {
  BackboneWeight,
  BackboneBias,
  BatchNormScale,
  BatchNormShift,
  HeadClassWeight,
  HeadClassBias,
  DivisorWeight,
  DivisorBias,
  DivisorBatchNormScale,
  DivisorBatchNormShift,
};

std::string_view to_string(ParamRole role);

struct ParamRef {
  std::string name;
  ParamRole role;
  Tensor tensor;  // shares storage with the model
};

struct BatchNormRef {
  std::string name;
  BatchNorm* bn;
};

// Backbone plus head. Copies are deep: a copied model never shares parameter
// storage with its source.
class Model {
 public:
  // All weights zero, BN scale one; see init_model() for He initialization.
  explicit Model(ModelSpec spec);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }

  ModelOutput forward(const Tensor& x) const;
  // Train mode needs an rng when the spec has head dropout.
  ModelOutput forward(const Tensor& x, Mode mode, Rng* dropout_rng);

  std::vector<ParamRef> parameters() const;
  std::vector<BatchNormRef> batchnorms();

  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  Head& head() { return head_; }
  const Head& head() const { return head_; }

 private:
  void deep_copy_tensors();

  ModelSpec spec_;
  Backbone backbone_;
  Head head_;
};

}  // namespace godin
