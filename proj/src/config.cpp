#include "godin/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace godin {

using nlohmann::json;

void ExperimentConfig::sync_seeds() {
  bench.seed = derive_seed(seed, streams::kBench);
  train.seed = train_seed.value_or(seed);
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec;
  spec.backbone.input_dim = bench.input_dim;
  spec.backbone.hidden_dims = hidden_dims;
  spec.backbone.use_batchnorm = use_batchnorm;
  spec.backbone.head_dropout = head_dropout;
  spec.head.variant = head;
  spec.head.num_classes = bench.id_classes;
  spec.head.feature_dim = spec.backbone.feature_dim();
  spec.head.g_batchnorm = g_batchnorm;
  return spec;
}

void ExperimentConfig::validate() const {
  auto wrap = [](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(field, e.what());
    }
  };
  wrap("bench", [&] { bench.validate(); });
  wrap("model", [&] { model_spec().validate(); });
  wrap("train", [&] { train.validate(); });
  if (train.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (scores.empty()) throw ConfigError("eval.scores", "at least one score function is required");
  if (!(temperature > 0.0)) throw ConfigError("eval.temperature", "must be > 0");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

// --- canonical JSON ----------------------------------------------------------

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["bench"] = {
      {"input_dim", c.bench.input_dim},
      {"id_classes", c.bench.id_classes},
      {"heldout_classes", c.bench.heldout_classes},
      {"train_per_class", c.bench.train_per_class},
      {"val_per_class", c.bench.val_per_class},
      {"ood_per_class", c.bench.ood_per_class},
      {"noise_samples", c.bench.noise_samples},
      {"center_radius", c.bench.center_radius},
      {"within_class_std", c.bench.within_class_std},
      {"shift",
       {{"offset_scale", c.bench.shift.offset_scale},
        {"cov_scale", c.bench.shift.cov_scale},
        {"rotation_deg", c.bench.shift.rotation_deg}}},
  };
  j["model"] = {
      {"hidden_dims", c.hidden_dims},
      {"batchnorm", c.use_batchnorm},
      {"head_dropout", c.head_dropout},
      {"head", std::string(to_string(c.head))},
      {"g_batchnorm", c.g_batchnorm},
  };
  j["train"] = {
      {"batch_size", c.train.batch_size},
      {"epochs", c.train.epochs},
      {"lr", c.train.lr0},
      {"momentum", c.train.momentum},
      {"weight_decay", c.train.weight_decay},
      {"lr_drops", c.train.lr_drop_points},
      {"decay_divisor", c.train.decay_divisor},
  };
  if (c.train_seed) j["train"]["seed"] = *c.train_seed;
  std::vector<std::string> scores;
  for (auto k : c.scores) scores.emplace_back(to_string(k));
  j["eval"] = {
      {"scores", scores},
      {"preprocessing", c.preprocessing},
      {"temperature", c.temperature},
  };
  return j;
}

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected a section");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.push_back(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void size(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) out = to_size(*v, path(key));
  }
  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned()) {
        out = v->get<std::uint64_t>();
      } else if (v->is_number_integer() && v->get<std::int64_t>() >= 0) {
        out = static_cast<std::uint64_t>(v->get<std::int64_t>());
      } else {
        throw ConfigError(path(key), "expected a non-negative integer");
      }
    }
  }
  void real(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  // A scalar counts as a one-element list.
  std::optional<std::vector<json>> list(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (v->is_array()) return std::vector<json>(v->begin(), v->end());
    if (v->is_string() && v->get<std::string>().empty()) return std::vector<json>{};
    return std::vector<json>{*v};
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError(path(it.key()), "unknown key");
      }
    }
  }

  static std::size_t to_size(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
    throw ConfigError(where, "expected a non-negative integer");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  root.u64("seed", c.seed);
  root.text("output_dir", c.output_dir);

  if (const json* b = root.find("bench")) {
    Reader r(*b, "bench");
    r.size("input_dim", c.bench.input_dim);
    r.size("id_classes", c.bench.id_classes);
    r.size("heldout_classes", c.bench.heldout_classes);
    r.size("train_per_class", c.bench.train_per_class);
    r.size("val_per_class", c.bench.val_per_class);
    r.size("ood_per_class", c.bench.ood_per_class);
    r.size("noise_samples", c.bench.noise_samples);
    r.real("center_radius", c.bench.center_radius);
    r.real("within_class_std", c.bench.within_class_std);
    if (const json* s = r.find("shift")) {
      Reader rs(*s, "bench.shift");
      rs.real("offset_scale", c.bench.shift.offset_scale);
      rs.real("cov_scale", c.bench.shift.cov_scale);
      rs.real("rotation_deg", c.bench.shift.rotation_deg);
      rs.finish();
    }
    r.finish();
  }

  if (const json* m = root.find("model")) {
    Reader r(*m, "model");
    if (auto dims = r.list("hidden_dims")) {
      c.hidden_dims.clear();
      for (const auto& d : *dims) c.hidden_dims.push_back(Reader::to_size(d, "model.hidden_dims"));
    }
    auto flags = r.list("batchnorm");
    if (flags) {
      c.use_batchnorm.clear();
      for (const auto& f : *flags) {
        if (!f.is_boolean()) throw ConfigError("model.batchnorm", "expected true or false");
        c.use_batchnorm.push_back(f.get<bool>());
      }
    }
    // A single flag applies to every hidden layer.
    if (c.use_batchnorm.size() == 1 && c.hidden_dims.size() != 1) {
      c.use_batchnorm.assign(c.hidden_dims.size(), c.use_batchnorm.front());
    } else if (!flags && c.use_batchnorm.size() != c.hidden_dims.size()) {
      c.use_batchnorm.assign(c.hidden_dims.size(), true);
    }
    r.real("head_dropout", c.head_dropout);
    std::string head;
    r.text("head", head);
    if (!head.empty()) {
      try {
        c.head = parse_head_variant(head);
      } catch (const std::exception& e) {
        throw ConfigError("model.head", e.what());
      }
    }
    r.boolean("g_batchnorm", c.g_batchnorm);
    r.finish();
  }

  if (const json* t = root.find("train")) {
    Reader r(*t, "train");
    r.size("batch_size", c.train.batch_size);
    r.size("epochs", c.train.epochs);
    r.real("lr", c.train.lr0);
    r.real("momentum", c.train.momentum);
    r.real("weight_decay", c.train.weight_decay);
    if (auto drops = r.list("lr_drops")) {
      c.train.lr_drop_points.clear();
      for (const auto& d : *drops) {
        if (!d.is_number()) throw ConfigError("train.lr_drops", "expected numbers");
        c.train.lr_drop_points.push_back(d.get<double>());
      }
    }
    r.boolean("decay_divisor", c.train.decay_divisor);
    if (r.find("seed")) {
      std::uint64_t s = 0;
      r.u64("seed", s);
      c.train_seed = s;
    }
    r.finish();
  }

  if (const json* e = root.find("eval")) {
    Reader r(*e, "eval");
    if (auto scores = r.list("scores")) {
      c.scores.clear();
      for (const auto& s : *scores) {
        if (!s.is_string()) throw ConfigError("eval.scores", "expected score names");
        try {
          c.scores.push_back(parse_score_kind(s.get<std::string>()));
        } catch (const std::exception& ex) {
          throw ConfigError("eval.scores", ex.what());
        }
      }
    }
    r.boolean("preprocessing", c.preprocessing);
    r.real("temperature", c.temperature);
    r.finish();
  }
  root.finish();
  c.sync_seeds();
  return c;
}

// --- INI -------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

json scalar_value(const std::string& raw) {
  if (raw == "true" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "no" || raw == "off") return false;
  if (!raw.empty() && raw.find_first_not_of("0123456789") == std::string::npos) {
    std::uint64_t u = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), u);
    if (ec == std::errc() && p == raw.data() + raw.size()) return u;
  }
  if (!raw.empty() && raw[0] == '-' && raw.size() > 1 &&
      raw.find_first_not_of("0123456789", 1) == std::string::npos) {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
    if (ec == std::errc() && p == raw.data() + raw.size()) return i;
  }
  double d = 0.0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
  if (ec == std::errc() && p == raw.data() + raw.size() && !raw.empty()) return d;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') return raw.substr(1, raw.size() - 2);
  return raw;
}

}  // namespace

json parse_ini(std::string_view text) {
  json root = json::object();
  json* section = &root;
  std::string section_name;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    const std::string s = trim(line);
    if (s.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where, "unterminated section header");
      section_name = trim(std::string_view(s).substr(1, s.size() - 2));
      if (section_name.empty()) throw ConfigError(where, "empty section name");
      section = &root;
      std::string_view rest = section_name;
      while (!rest.empty()) {
        const auto dot = rest.find('.');
        const std::string part(rest.substr(0, dot));
        json& child = (*section)[part];
        if (child.is_null()) child = json::object();
        if (!child.is_object()) throw ConfigError(where, "section '" + part + "' clashes with a key");
        section = &child;
        rest = dot == std::string_view::npos ? std::string_view{} : rest.substr(dot + 1);
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string raw = trim(std::string_view(s).substr(eq + 1));
    if (key.empty()) throw ConfigError(where, "empty key");
    const std::string field = section_name.empty() ? key : section_name + "." + key;
    if (section->contains(key)) throw ConfigError(field, "duplicate key");
    if (raw.find(',') != std::string::npos) {
      json arr = json::array();
      std::string_view rest = raw;
      while (true) {
        const auto comma = rest.find(',');
        const std::string item = trim(rest.substr(0, comma));
        if (item.empty()) throw ConfigError(field, "empty list element");
        arr.push_back(scalar_value(item));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      (*section)[key] = std::move(arr);
    } else {
      (*section)[key] = scalar_value(raw);
    }
  }
  return root;
}

ExperimentConfig parse_config(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<json>", e.what());
    }
    if (j.is_object() && j.contains("config") && j["config"].is_object()) return config_from_json(j["config"]);
    return config_from_json(j);
  }
  return config_from_json(parse_ini(text));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  return j.dump();
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config) {
  return fnv1a64_hex(canonical_text(config));
}

}  // namespace godin
