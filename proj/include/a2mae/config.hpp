#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "a2mae/imageset.hpp"
#include "a2mae/model.hpp"
#include "a2mae/pruning.hpp"
#include "a2mae/trainer.hpp"

namespace a2mae::config {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every *_from_json starts from the defaults, overrides the keys present and
// rejects unknown keys with ConfigError naming the key path.
json to_json(const data::GeneratorConfig& c);
data::GeneratorConfig generator_from_json(const json& j, const std::string& path = "generator");

json to_json(const model::ModelConfig& c);
model::ModelConfig model_from_json(const json& j, const std::string& path = "model");

json to_json(const pruning::PruningConfig& c);
pruning::PruningConfig pruning_from_json(const json& j, const std::string& path = "pruning");

json to_json(const train::TrainConfig& c);
train::TrainConfig train_from_json(const json& j, const std::string& path = "train");

struct RunConfig {
  data::GeneratorConfig generator;
  train::TrainConfig train;
  pruning::PruningConfig pruning;
};

json to_json(const RunConfig& c);
RunConfig run_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace a2mae::config
