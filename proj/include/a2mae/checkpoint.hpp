#pragma once

#include <filesystem>
#include <stdexcept>

#include "a2mae/model.hpp"
#include "a2mae/trainer.hpp"

namespace a2mae::train {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  model::MaskedAutoencoder model;
  TrainConfig config;
};

// DIR/manifest.json (configs, array names and shapes) and DIR/params.a2rs
// (one float32 raster frame per array, manifest order).
void save_checkpoint(const std::filesystem::path& dir, const model::MaskedAutoencoder& model, const TrainConfig& cfg);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace a2mae::train
