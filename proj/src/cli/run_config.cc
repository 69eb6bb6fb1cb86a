#include "hit/cli/run_config.h"

#include <fstream>
#include <sstream>

#include "hit/error.h"

namespace hit {

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = model.to_json();
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr"] = adam.lr;
  j["beta1"] = adam.beta1;
  j["beta2"] = adam.beta2;
  j["eps"] = adam.eps;
  j["seed"] = seed;
  j["seeds"] = seeds;
  if (baseline_auc) j["baseline_auc"] = *baseline_auc;
  if (!data_dir.empty()) j["data_dir"] = data_dir;
  if (!out_dir.empty()) j["out_dir"] = out_dir;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  StrictObject object(j, "config");
  RunConfig c;
  c.model = read_hit_config(object);
  object.read("batch_size", c.batch_size);
  object.read("epochs", c.epochs);
  object.read("lr", c.adam.lr);
  object.read("beta1", c.adam.beta1);
  object.read("beta2", c.adam.beta2);
  object.read("eps", c.adam.eps);
  object.read_u64("seed", c.seed);
  object.read_u64_list("seeds", c.seeds);
  if (object.has("baseline_auc")) {
    double b = 0;
    object.read("baseline_auc", b);
    c.baseline_auc = b;
  }
  object.read("data_dir", c.data_dir);
  object.read("out_dir", c.out_dir);
  object.finish();

  if (c.batch_size < 1) throw ConfigError(object.path("batch_size") + ": must be >= 1");
  if (c.epochs < 1) throw ConfigError(object.path("epochs") + ": must be >= 1");
  if (c.seeds.empty()) throw ConfigError(object.path("seeds") + ": needs at least one seed");
  try {
    c.adam.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(object.path("") + e.what());
  }
  if (c.baseline_auc && (*c.baseline_auc <= 0.0 || *c.baseline_auc >= 1.0 || *c.baseline_auc == 0.5)) {
    throw ConfigError(object.path("baseline_auc") + ": must be in (0, 1) and not 0.5");
  }
  return c;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.adam = adam;
  o.batch_size = batch_size;
  o.epochs = epochs;
  o.seed = seed;
  o.baseline_auc = baseline_auc;
  return o;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  RunConfig c = RunConfig::from_json(j);
  if (!c.data_dir.empty() && !std::filesystem::is_directory(c.data_dir)) {
    throw ConfigError("config.data_dir: directory '" + c.data_dir + "' does not exist");
  }
  return c;
}

}  // namespace hit
