#include "a2mae/config.hpp"

#include <fstream>
#include <set>
#include <string>

namespace a2mae::config {
namespace {

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  template <typename T>
  bool get(const std::string& key, T& dst) {
    known_.insert(key);
    if (!j_.contains(key)) return false;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
    return true;
  }

  // Marks a key as handled by the caller.
  const json* child(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!known_.contains(key)) throw ConfigError("unknown key '" + path_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

template <typename F>
auto parse_enum(const std::string& path, const std::string& value, F parse) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

json to_json(const data::GeneratorConfig& c) {
  return {{"common_size", c.common_size},
          {"field_size", c.field_size},
          {"n_latent", c.n_latent},
          {"n_sinusoids", c.n_sinusoids},
          {"n_classes", c.n_classes},
          {"n_label_seeds", c.n_label_seeds},
          {"class_amplitude", c.class_amplitude},
          {"texture_amplitude", c.texture_amplitude},
          {"seasonal_amplitude", c.seasonal_amplitude},
          {"n_hubs", c.n_hubs},
          {"hub_spread_deg", c.hub_spread_deg},
          {"first_year", c.first_year},
          {"seed", c.seed}};
}

data::GeneratorConfig generator_from_json(const json& j, const std::string& path) {
  data::GeneratorConfig c;
  Fields f(j, path);
  f.get("common_size", c.common_size);
  f.get("field_size", c.field_size);
  f.get("n_latent", c.n_latent);
  f.get("n_sinusoids", c.n_sinusoids);
  f.get("n_classes", c.n_classes);
  f.get("n_label_seeds", c.n_label_seeds);
  f.get("class_amplitude", c.class_amplitude);
  f.get("texture_amplitude", c.texture_amplitude);
  f.get("seasonal_amplitude", c.seasonal_amplitude);
  f.get("n_hubs", c.n_hubs);
  f.get("hub_spread_deg", c.hub_spread_deg);
  f.get("first_year", c.first_year);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

json to_json(const model::ModelConfig& c) {
  return {{"image_size", c.image_size},
          {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},
          {"depth", c.depth},
          {"heads", c.heads},
          {"decoder_dim", c.decoder_dim},
          {"decoder_depth", c.decoder_depth},
          {"decoder_heads", c.decoder_heads},
          {"mlp_ratio", c.mlp_ratio},
          {"geo_mode", std::string(model::to_string(c.geo_mode))},
          {"reference_gsd_m", c.reference_gsd_m},
          {"one_hot_bins", c.one_hot_bins},
          {"init_seed", c.init_seed}};
}

model::ModelConfig model_from_json(const json& j, const std::string& path) {
  model::ModelConfig c;
  Fields f(j, path);
  f.get("image_size", c.image_size);
  f.get("patch_size", c.patch_size);
  f.get("embed_dim", c.embed_dim);
  f.get("depth", c.depth);
  f.get("heads", c.heads);
  f.get("decoder_dim", c.decoder_dim);
  f.get("decoder_depth", c.decoder_depth);
  f.get("decoder_heads", c.decoder_heads);
  f.get("mlp_ratio", c.mlp_ratio);
  std::string mode;
  if (f.get("geo_mode", mode)) c.geo_mode = parse_enum(f.path("geo_mode"), mode, model::parse_geo_mode);
  f.get("reference_gsd_m", c.reference_gsd_m);
  f.get("one_hot_bins", c.one_hot_bins);
  f.get("init_seed", c.init_seed);
  f.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json to_json(const pruning::PruningConfig& c) {
  return {{"region_cell_deg", c.region_cell_deg},
          {"k", c.k},
          {"keep_frac", c.keep_frac},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"reserve_only", c.reserve_only}};
}

pruning::PruningConfig pruning_from_json(const json& j, const std::string& path) {
  pruning::PruningConfig c;
  Fields f(j, path);
  f.get("region_cell_deg", c.region_cell_deg);
  f.get("k", c.k);
  f.get("keep_frac", c.keep_frac);
  f.get("max_iters", c.max_iters);
  f.get("tol", c.tol);
  f.get("reserve_only", c.reserve_only);
  f.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json to_json(const train::TrainConfig& c) {
  json phases = json::array();
  for (const auto& p : c.curriculum) {
    json kinds = json::array();
    for (auto k : p.kinds) kinds.push_back(std::string(data::to_string(k)));
    phases.push_back({{"name", p.name}, {"kinds", kinds}, {"epochs", p.epochs}});
  }
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"warmup_steps", c.warmup_steps},
          {"weight_decay", c.weight_decay},
          {"mask_ratio", c.mask_ratio},
          {"mask_strategy", std::string(masking::to_string(c.mask_strategy))},
          {"model", to_json(c.model)},
          {"curriculum", phases},
          {"seed", c.seed}};
}

train::TrainConfig train_from_json(const json& j, const std::string& path) {
  train::TrainConfig c;
  Fields f(j, path);
  const bool has_epochs = f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("base_lr", c.base_lr);
  f.get("warmup_steps", c.warmup_steps);
  f.get("weight_decay", c.weight_decay);
  f.get("mask_ratio", c.mask_ratio);
  std::string strategy;
  if (f.get("mask_strategy", strategy)) {
    c.mask_strategy = parse_enum(f.path("mask_strategy"), strategy, masking::parse_strategy);
  }
  if (const json* m = f.child("model")) c.model = model_from_json(*m, f.path("model"));
  if (const json* cur = f.child("curriculum")) {
    if (!cur->is_array()) throw ConfigError(f.path("curriculum") + ": expected an array");
    c.curriculum.clear();
    for (std::size_t i = 0; i < cur->size(); ++i) {
      const std::string ppath = f.path("curriculum") + "[" + std::to_string(i) + "]";
      Fields pf((*cur)[i], ppath);
      train::CurriculumPhase phase;
      pf.get("name", phase.name);
      pf.get("epochs", phase.epochs);
      std::vector<std::string> kinds;
      pf.get("kinds", kinds);
      for (const auto& k : kinds) phase.kinds.push_back(parse_enum(ppath + ".kinds", k, data::parse_set_kind));
      pf.finish();
      c.curriculum.push_back(std::move(phase));
    }
  } else if (has_epochs) {
    c.curriculum = train::TrainConfig::default_curriculum(c.epochs);
  }
  f.get("seed", c.seed);
  f.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  return {{"generator", to_json(c.generator)}, {"train", to_json(c.train)}, {"pruning", to_json(c.pruning)}};
}

RunConfig run_from_json(const json& j) {
  RunConfig c;
  Fields f(j, "config");
  if (const json* g = f.child("generator")) c.generator = generator_from_json(*g, "generator");
  if (const json* t = f.child("train")) c.train = train_from_json(*t, "train");
  if (const json* p = f.child("pruning")) c.pruning = pruning_from_json(*p, "pruning");
  f.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_from_json(j);
}

}  // namespace a2mae::config
