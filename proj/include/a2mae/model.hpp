#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "a2mae/autodiff.hpp"
#include "a2mae/geo.hpp"
#include "a2mae/imageset.hpp"
#include "a2mae/masking.hpp"

namespace a2mae::model {

// How geography reaches the transformer.
//   None      - standard sinusoidal positions, no geo embedding
//   OneHot    - standard positions + projected one-hot lat/lon bin
//   ScaleOnly - GSD-scaled positions, no geo embedding
//   FullGem   - GSD-scaled positions + projected quadtree corner bits
enum class GeoMode { None, OneHot, ScaleOnly, FullGem };

std::string_view to_string(GeoMode mode);
GeoMode parse_geo_mode(std::string_view name);

struct ModelConfig {
  std::size_t image_size = 64;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t decoder_dim = 32;
  std::size_t decoder_depth = 1;
  std::size_t decoder_heads = 4;
  std::size_t mlp_ratio = 4;
  GeoMode geo_mode = GeoMode::OneHot;
  double reference_gsd_m = 10.0;  // posenc reference; 10 m gives S2L8 sets unit scale
  std::size_t one_hot_bins = 8;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelConfig&) const = default;

  void validate() const;
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t n_patches() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch_size * patch_size * kInputChannels; }
  // Width of the raw geo vector fed to the geo projection (0 when unused).
  std::size_t geo_input_dim() const;
  bool uses_geo_embedding() const { return geo_input_dim() > 0; }

  static constexpr std::size_t kInputChannels = 3;
  static constexpr std::size_t kTimeSlots = 3;
};

// Closed-form parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& cfg);

// Rows are patches in row-major patch order; each row is (py, px, c) row-major.
nn::Tensor patchify(const data::Image& image, std::size_t patch_size);
// Inverse of patchify onto a channels x (grid*p) x (grid*p) raster.
std::vector<double> unpatchify(const nn::Tensor& patches, std::size_t patch_size, std::size_t grid_h,
                               std::size_t grid_w, std::size_t channels);

// Band groups used to tokenize a C-band image three bands at a time; the last
// group repeats its final band to fill three slots.
std::vector<std::array<std::size_t, 3>> band_groups(std::size_t channels);

// Model inputs prepared from a TrainingInput: 3-band patches, reconstruction
// targets, and the masked-row loss mask.
struct PreparedInput {
  std::array<data::ImageMeta, 3> metas;
  std::array<nn::Tensor, 3> patches;  // [N, patch_dim] each
  nn::Tensor targets;                 // [3N, patch_dim], image-major
  nn::Tensor loss_mask;               // same shape, 1 on masked rows
  masking::MaskPlan plan;
};

struct PretrainOutput {
  nn::Var loss;
  nn::Var prediction;                     // [3N, patch_dim]
  std::vector<std::size_t> token_image;   // encoder token -> image index
  std::vector<std::size_t> token_patch;   // encoder token -> patch index
};

struct EncodedFeatures {
  std::vector<double> pooled;  // length embed_dim
  std::size_t n_tokens = 0;
};

class MaskedAutoencoder {
 public:
  explicit MaskedAutoencoder(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<nn::Parameter>& parameters() { return params_; }
  const std::vector<nn::Parameter>& parameters() const { return params_; }
  std::vector<nn::Parameter*> parameter_ptrs();
  nn::Parameter& parameter(std::string_view name);
  const nn::Parameter& parameter(std::string_view name) const;
  std::size_t parameter_count() const;
  void zero_grad();

  PreparedInput prepare(const data::TrainingInput& input, const masking::MaskPlan& plan,
                        const masking::BandSelection& bands) const;

  // Joint encoder over the visible tokens of all three images, decoder over
  // every position, MSE on masked patches only. Gradients flow into the
  // parameters when the tape records gradients.
  PretrainOutput forward(nn::Tape& tape, const PreparedInput& prepared);
  PretrainOutput forward_pretrain(nn::Tape& tape, const data::TrainingInput& input, const masking::MaskPlan& plan,
                                  const masking::BandSelection& bands);

  // Frozen features of a 3-band image: every patch visible, mean-pooled.
  EncodedFeatures encode(const data::Image& image, bool use_geo = false) const;
  // Frozen features of a C >= 3 band image tokenized as 3-band sub-images.
  EncodedFeatures multiband_tokenize(const data::Image& image, bool use_geo = false) const;

 private:
  struct BlockIdx {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };
  struct Layout {
    std::size_t patch_w, patch_b, source, time, geo = SIZE_MAX;
    std::vector<BlockIdx> enc;
    std::size_t enc_norm_g, enc_norm_b;
    std::size_t dec_w, dec_b, mask_token, dec_source, dec_time, dec_geo = SIZE_MAX;
    std::vector<BlockIdx> dec;
    std::size_t dec_norm_g, dec_norm_b, pred_w, pred_b;
  };

  std::size_t add_param(const std::string& name, nn::Tensor value, bool decay);
  BlockIdx add_block(const std::string& prefix, std::size_t dim);
  void init_weights();

  std::vector<nn::Var> bind_trainable(nn::Tape& tape);
  std::vector<nn::Var> bind_frozen(nn::Tape& tape) const;

  nn::Var block(const std::vector<nn::Var>& p, const BlockIdx& b, nn::Var x, std::size_t heads) const;
  nn::Var affine_norm(const std::vector<nn::Var>& p, std::size_t g, std::size_t b, const nn::Var& x) const;
  nn::Tensor position_table(const geo::GeoMetadata& geo, std::size_t dim) const;
  nn::Tensor geo_inputs(std::span<const data::ImageMeta> metas) const;
  EncodedFeatures encode_groups(const data::Image& image, const std::vector<std::array<std::size_t, 3>>& groups,
                                bool use_geo) const;

  ModelConfig cfg_;
  std::vector<nn::Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
  Layout layout_;
};

// Ground size of one model-grid pixel: the footprint's north-south extent
// divided by the grid edge. Scaled positional encodings use this value.
double grid_gsd_m(const geo::GeoMetadata& geo, std::size_t image_size);

// Rank of each image's time tag among the distinct tags of the input.
std::array<std::size_t, 3> time_slots(const std::array<data::ImageMeta, 3>& metas);

}  // namespace a2mae::model
