#include "hit/model/config.h"

#include <cmath>

#include "hit/error.h"

namespace hit {

std::string metric_name(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::kCosine:
      return "cosine";
    case DistanceMetric::kMse:
      return "mse";
    case DistanceMetric::kMae:
      return "mae";
  }
  return "?";
}

DistanceMetric parse_metric(const std::string& name) {
  if (name == "cosine") return DistanceMetric::kCosine;
  if (name == "mse") return DistanceMetric::kMse;
  if (name == "mae") return DistanceMetric::kMae;
  throw ConfigError("distance_metric: expected one of cosine, mse, mae, got '" + name + "'");
}

bool HitConfig::has_generator(GeneratorRole role) const {
  if (!use_generators) return false;
  if (role == GeneratorRole::kTarget) return use_target_gen && num_generators >= 1;
  return use_non_target_gen && num_generators >= 2;
}

std::size_t HitConfig::active_generators() const {
  return (has_generator(GeneratorRole::kTarget) ? 1 : 0) +
         (has_generator(GeneratorRole::kNonTarget) ? 1 : 0);
}

void HitConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("d: must be >= 1");
  if (tower_widths.empty()) throw ConfigError("tower_widths: needs at least one layer");
  for (std::size_t i = 0; i < tower_widths.size(); ++i) {
    if (tower_widths[i] < 1) {
      throw ConfigError("tower_widths[" + std::to_string(i) + "]: must be >= 1");
    }
  }
  for (std::size_t i = 0; i < generator_widths.size(); ++i) {
    if (generator_widths[i] < 1) {
      throw ConfigError("generator_widths[" + std::to_string(i) + "]: must be >= 1");
    }
  }
  // One generator per label type; labels are binary.
  if (num_generators > 2) throw ConfigError("K: at most 2 generators (binary labels)");
  if (num_heads < 1) throw ConfigError("J: must be >= 1");
  if (head_dim < 1) throw ConfigError("z: must be >= 1");
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("alpha: must be finite and >= 0");
}

nlohmann::json HitConfig::to_json() const {
  return {{"d", embedding_dim},
          {"tower_widths", tower_widths},
          {"generator_widths", generator_widths},
          {"K", num_generators},
          {"J", num_heads},
          {"z", head_dim},
          {"p", head_dim * num_heads},
          {"alpha", alpha},
          {"distance_metric", metric_name(distance_metric)},
          {"use_generators", use_generators},
          {"use_representers", use_representers},
          {"use_target_gen", use_target_gen},
          {"use_non_target_gen", use_non_target_gen},
          {"generators_use_dynamic", generators_use_dynamic}};
}

HitConfig read_hit_config(StrictObject& object) {
  HitConfig c;
  object.read("d", c.embedding_dim);
  object.read("tower_widths", c.tower_widths);
  object.read("generator_widths", c.generator_widths);
  object.read("K", c.num_generators);
  object.read("J", c.num_heads);
  object.read("z", c.head_dim);
  object.read("alpha", c.alpha);
  if (object.has("distance_metric")) {
    std::string name;
    object.read("distance_metric", name);
    try {
      c.distance_metric = parse_metric(name);
    } catch (const ConfigError& e) {
      throw ConfigError(object.path("distance_metric") + ": expected cosine, mse or mae, got '" +
                        name + "'");
    }
  }
  object.read("use_generators", c.use_generators);
  object.read("use_representers", c.use_representers);
  object.read("use_target_gen", c.use_target_gen);
  object.read("use_non_target_gen", c.use_non_target_gen);
  object.read("generators_use_dynamic", c.generators_use_dynamic);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(object.path("") + e.what());
  }
  // p is derived; accepted only when it agrees with z*J.
  if (object.has("p")) {
    std::size_t p = 0;
    object.read("p", p);
    if (p != c.head_dim * c.num_heads) {
      throw ConfigError(object.path("p") + ": must equal z*J = " +
                        std::to_string(c.head_dim * c.num_heads));
    }
  }
  return c;
}

HitConfig HitConfig::from_json(const nlohmann::json& j) {
  StrictObject object(j, "config");
  HitConfig c = read_hit_config(object);
  object.finish();
  return c;
}

StrictObject::StrictObject(const nlohmann::json& j, std::string path)
    : json_(j), path_(std::move(path)) {
  if (!json_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
}

std::string StrictObject::path(const std::string& key) const {
  return key.empty() ? path_ + "." : path_ + "." + key;
}

const nlohmann::json& StrictObject::field(const std::string& key) {
  consumed_.insert(key);
  return json_.at(key);
}

void StrictObject::read(const std::string& key, bool& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_boolean()) throw ConfigError(path(key) + ": expected boolean");
  out = v.get<bool>();
}

void StrictObject::read(const std::string& key, double& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_number()) throw ConfigError(path(key) + ": expected number");
  out = v.get<double>();
}

void StrictObject::read(const std::string& key, std::size_t& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(path(key) + ": expected non-negative integer");
  }
  out = v.get<std::size_t>();
}

void StrictObject::read_u64(const std::string& key, std::uint64_t& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_number_unsigned()) throw ConfigError(path(key) + ": expected non-negative integer");
  out = v.get<std::uint64_t>();
}

void StrictObject::read(const std::string& key, std::string& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_string()) throw ConfigError(path(key) + ": expected string");
  out = v.get<std::string>();
}

void StrictObject::read(const std::string& key, std::vector<std::size_t>& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_array()) throw ConfigError(path(key) + ": expected array of integers");
  std::vector<std::size_t> values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0) {
      throw ConfigError(path(key) + "[" + std::to_string(i) + "]: expected non-negative integer");
    }
    values.push_back(v[i].get<std::size_t>());
  }
  out = std::move(values);
}

void StrictObject::read_u64_list(const std::string& key, std::vector<std::uint64_t>& out) {
  if (!has(key)) return;
  const auto& v = field(key);
  if (!v.is_array()) throw ConfigError(path(key) + ": expected array of integers");
  std::vector<std::uint64_t> values;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_unsigned()) {
      throw ConfigError(path(key) + "[" + std::to_string(i) + "]: expected non-negative integer");
    }
    values.push_back(v[i].get<std::uint64_t>());
  }
  out = std::move(values);
}

void StrictObject::finish() const {
  for (const auto& [key, value] : json_.items()) {
    if (!consumed_.count(key)) throw ConfigError(path(key) + ": unknown key");
  }
}

}  // namespace hit
