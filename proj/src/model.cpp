#include "godin/model.hpp"

#include <stdexcept>

namespace godin {

void ModelSpec::validate() const {
  backbone.validate();
  head.validate();
  if (head.feature_dim != backbone.feature_dim()) {
    throw std::invalid_argument("model: head feature_dim " + std::to_string(head.feature_dim) +
                                " != backbone output " + std::to_string(backbone.feature_dim()));
  }
}

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::BackboneWeight: return "backbone_weight";
    case ParamRole::BackboneBias: return "backbone_bias";
    case ParamRole::BatchNormScale: return "bn_scale";
    case ParamRole::BatchNormShift: return "bn_shift";
    case ParamRole::HeadClassWeight: return "class_weight";
    case ParamRole::HeadClassBias: return "class_bias";
    case ParamRole::DivisorWeight: return "divisor_weight";
    case ParamRole::DivisorBias: return "divisor_bias";
    case ParamRole::DivisorBatchNormScale: return "divisor_bn_scale";
    case ParamRole::DivisorBatchNormShift: return "divisor_bn_shift";
  }
  return "?";
}

namespace {
ModelSpec checked(ModelSpec spec) {
  spec.validate();
  return spec;
}
}  // namespace

Model::Model(ModelSpec spec)
    : spec_(checked(std::move(spec))), backbone_(spec_.backbone), head_(spec_.head) {}

Model::Model(const Model& other)
    : spec_(other.spec_), backbone_(other.backbone_), head_(other.head_) {
  deep_copy_tensors();
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Model::deep_copy_tensors() {
  auto fresh = [](Tensor& t) { t = t.clone(); };
  for (auto& layer : backbone_.layers) {
    fresh(layer.weight);
    fresh(layer.bias);
    if (layer.bn) {
      fresh(layer.bn->gamma);
      fresh(layer.bn->beta);
    }
  }
  fresh(head_.class_weight);
  fresh(head_.class_bias);
  fresh(head_.divisor_weight);
  fresh(head_.divisor_bias);
  if (head_.divisor_bn) {
    fresh(head_.divisor_bn->gamma);
    fresh(head_.divisor_bn->beta);
  }
}

ModelOutput Model::forward(const Tensor& x) const {
  ModelOutput out;
  out.features = backbone_.forward(x);
  const Tensor& fp = out.features.penultimate;
  out.h = head_.h(fp);
  if (head_.spec().g_enabled()) {
    out.g = head_.g(fp);
    out.logits = deconf_logits(out.h, *out.g);
  } else {
    out.logits = out.h;
  }
  return out;
}

ModelOutput Model::forward(const Tensor& x, Mode mode, Rng* dropout_rng) {
  if (mode == Mode::Eval) return std::as_const(*this).forward(x);
  ModelOutput out;
  out.features = backbone_.forward(x, mode);
  Tensor fp = out.features.penultimate;
  const double p = spec_.backbone.head_dropout;
  if (p > 0.0) {
    if (dropout_rng == nullptr) throw std::invalid_argument("model: train mode dropout needs an rng");
    fp = dropout(fp, p, mode, *dropout_rng);
  }
  out.h = head_.h(fp);
  if (head_.spec().g_enabled()) {
    out.g = head_.g(fp, mode);
    out.logits = deconf_logits(out.h, *out.g);
  } else {
    out.logits = out.h;
  }
  return out;
}

std::vector<ParamRef> Model::parameters() const {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < backbone_.layers.size(); ++l) {
    const auto& layer = backbone_.layers[l];
    const std::string prefix = "backbone." + std::to_string(l) + ".";
    out.push_back({prefix + "weight", ParamRole::BackboneWeight, layer.weight});
    out.push_back({prefix + "bias", ParamRole::BackboneBias, layer.bias});
    if (layer.bn) {
      out.push_back({prefix + "bn.gamma", ParamRole::BatchNormScale, layer.bn->gamma});
      out.push_back({prefix + "bn.beta", ParamRole::BatchNormShift, layer.bn->beta});
    }
  }
  out.push_back({"head.class_weight", ParamRole::HeadClassWeight, head_.class_weight});
  if (head_.spec().has_class_bias()) {
    out.push_back({"head.class_bias", ParamRole::HeadClassBias, head_.class_bias});
  }
  if (head_.spec().g_enabled()) {
    out.push_back({"head.divisor_weight", ParamRole::DivisorWeight, head_.divisor_weight});
    out.push_back({"head.divisor_bias", ParamRole::DivisorBias, head_.divisor_bias});
    if (head_.divisor_bn) {
      out.push_back({"head.divisor_bn.gamma", ParamRole::DivisorBatchNormScale,
                     head_.divisor_bn->gamma});
      out.push_back({"head.divisor_bn.beta", ParamRole::DivisorBatchNormShift,
                     head_.divisor_bn->beta});
    }
  }
  return out;
}

std::vector<BatchNormRef> Model::batchnorms() {
  std::vector<BatchNormRef> out;
  for (std::size_t l = 0; l < backbone_.layers.size(); ++l) {
    auto& layer = backbone_.layers[l];
    if (layer.bn) out.push_back({"backbone." + std::to_string(l) + ".bn", &*layer.bn});
  }
  if (head_.divisor_bn) out.push_back({"head.divisor_bn", &*head_.divisor_bn});
  return out;
}

}  // namespace godin
