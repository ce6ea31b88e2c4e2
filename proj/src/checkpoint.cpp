#include "godin/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace godin {

using nlohmann::json;

json checkpoint_to_json(const ExperimentConfig& config, const Model& model) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(config);
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;

  json params = json::array();
  for (const auto& p : model.parameters()) {
    params.push_back({{"name", p.name},
                      {"role", std::string(to_string(p.role))},
                      {"shape", p.tensor.shape()},
                      {"data", p.tensor.values()}});
  }
  j["parameters"] = std::move(params);

  Model copy = model;
  json stats = json::array();
  for (const auto& ref : copy.batchnorms()) {
    stats.push_back({{"name", ref.name},
                     {"momentum", ref.bn->momentum},
                     {"eps", ref.bn->eps},
                     {"running_mean", ref.bn->running_mean},
                     {"running_var", ref.bn->running_var}});
  }
  j["batchnorm"] = std::move(stats);
  return j;
}

namespace {

std::vector<double> read_doubles(const json& j, const std::string& what) {
  if (!j.is_array()) throw CheckpointError("checkpoint: '" + what + "' is not an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw CheckpointError("checkpoint: '" + what + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

Checkpoint checkpoint_from_json(const json& j) {
  if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat) {
    throw CheckpointError("checkpoint: not a " + std::string(kCheckpointFormat) + " file");
  }
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: version " + std::to_string(version) + " not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  ExperimentConfig config;
  try {
    config = config_from_json(j.at("config"));
    config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: embedded config invalid: ") + e.what());
  }
  const std::string stored_hash = j.value("config_hash", std::string());
  if (stored_hash != config_hash(config)) {
    throw CheckpointError("checkpoint: config hash mismatch (stored " + stored_hash + ", computed " +
                          config_hash(config) + ")");
  }

  Model model(config.model_spec());
  const auto params = model.parameters();
  const json& stored = j.at("parameters");
  if (!stored.is_array() || stored.size() != params.size()) {
    throw CheckpointError("checkpoint: parameter count does not match the model spec");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& entry = stored[i];
    const ParamRef& p = params[i];
    if (entry.value("name", std::string()) != p.name) {
      throw CheckpointError("checkpoint: expected parameter '" + p.name + "' at position " +
                            std::to_string(i));
    }
    if (entry.at("shape").get<Shape>() != p.tensor.shape()) {
      throw CheckpointError("checkpoint: shape mismatch for '" + p.name + "'");
    }
    const auto data = read_doubles(entry.at("data"), p.name);
    if (data.size() != p.tensor.size()) throw CheckpointError("checkpoint: size mismatch for '" + p.name + "'");
    Tensor t = p.tensor;
    std::copy(data.begin(), data.end(), t.mutable_data().begin());
  }

  auto bns = model.batchnorms();
  const json& stats = j.at("batchnorm");
  if (!stats.is_array() || stats.size() != bns.size()) {
    throw CheckpointError("checkpoint: batchnorm count does not match the model spec");
  }
  for (std::size_t i = 0; i < bns.size(); ++i) {
    const json& entry = stats[i];
    BatchNorm& bn = *bns[i].bn;
    if (entry.value("name", std::string()) != bns[i].name) {
      throw CheckpointError("checkpoint: expected batchnorm '" + bns[i].name + "'");
    }
    bn.momentum = entry.at("momentum").get<double>();
    bn.eps = entry.at("eps").get<double>();
    auto mean = read_doubles(entry.at("running_mean"), bns[i].name + ".running_mean");
    auto var = read_doubles(entry.at("running_var"), bns[i].name + ".running_var");
    if (mean.size() != bn.features() || var.size() != bn.features()) {
      throw CheckpointError("checkpoint: running stats size mismatch for '" + bns[i].name + "'");
    }
    bn.running_mean = std::move(mean);
    bn.running_var = std::move(var);
  }
  return Checkpoint{std::move(config), std::move(model)};
}

std::string checkpoint_text(const ExperimentConfig& config, const Model& model) {
  return checkpoint_to_json(config, model).dump(1) + "\n";
}

void save_checkpoint(const std::string& path, const ExperimentConfig& config, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << checkpoint_text(config, model);
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace godin
