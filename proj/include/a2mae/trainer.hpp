#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "a2mae/dataset.hpp"
#include "a2mae/masking.hpp"
#include "a2mae/model.hpp"

namespace a2mae::train {

struct CurriculumPhase {
  std::string name;
  std::vector<data::SetKind> kinds;  // sets this phase draws from
  std::size_t epochs = 0;
  bool operator==(const CurriculumPhase&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double base_lr = 1e-3;
  std::size_t warmup_steps = 0;
  double weight_decay = 0.05;
  double mask_ratio = 0.75;
  masking::Strategy mask_strategy = masking::Strategy::AnchorAware;
  model::ModelConfig model;
  std::vector<CurriculumPhase> curriculum = default_curriculum(20);
  std::uint64_t seed = 0;

  // S2L8 sets for the first 70% of epochs, then GFS2 sets.
  static std::vector<CurriculumPhase> default_curriculum(std::size_t epochs);
  void validate() const;
  bool operator==(const TrainConfig&) const;
};

struct LogEntry {
  std::size_t step = 0;
  std::size_t phase = 0;
  double lr = 0.0;
  double loss = 0.0;
  double baseline = 0.0;  // mean-predictor loss on the same masked patches
  std::vector<data::SetKind> kinds;  // kind of each sampled set in the batch
  bool operator==(const LogEntry&) const = default;
};

struct PretrainResult {
  model::MaskedAutoencoder model;
  std::vector<LogEntry> log;
  std::size_t total_steps = 0;
  // Loss of predicting zero (the per-band dataset mean after normalization)
  // on the same masked patches, averaged over every logged step.
  double mean_predictor_loss = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Number of optimizer steps the curriculum takes on `dataset`.
std::size_t total_steps(const TrainConfig& cfg, const data::Dataset& dataset);

// Runs the curriculum. When `out_dir` is given, writes loss.csv there and a
// checkpoint after each phase (phase-<i>/) and at the end (final/).
PretrainResult pretrain(const TrainConfig& cfg, const data::Dataset& dataset,
                        const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                        const std::set<std::int64_t>* keep_reserve = nullptr);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LogEntry>& log);

struct ProbeConfig {
  bool geo_at_finetune = false;
  std::size_t iterations = 300;
  double lr = 0.5;
  double l2 = 1e-3;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the eval split
  std::size_t n_eval = 0;
  double train_accuracy = 0.0;
};

struct LabeledImages {
  std::vector<data::Image> images;
  std::vector<int> labels;
};

// Trains a softmax classifier on frozen, standardized encoder features of
// `train` and reports accuracy on `eval`. Images with 3 bands go through
// encode, others through multiband_tokenize.
ProbeResult linear_probe(const model::MaskedAutoencoder& model, const LabeledImages& train, const LabeledImages& eval,
                         const ProbeConfig& cfg = {});

struct ProbeSplit {
  LabeledImages train;
  LabeledImages eval;
};

// S2like images of every city set labeled with the location's majority
// class; locations are split train/eval by a seeded shuffle.
ProbeSplit probe_task(const data::Dataset& dataset, double train_fraction, std::uint64_t seed);

}  // namespace a2mae::train
