#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "a2mae/geo.hpp"
#include "a2mae/rng.hpp"
#include "a2mae/sources.hpp"

namespace a2mae::data {

enum class SetKind { S2L8City = 0, S2L8Reserve = 1, GFS2 = 2 };

std::string_view to_string(SetKind kind);  // "s2l8_city", "s2l8_reserve", "gfs2"
SetKind parse_set_kind(std::string_view name);

// Reserve sets carry growth / non-growth tags of one year, encoded year*10+1
// and year*10+2; every other time tag is a plain year.
int reserve_time_tag(int year, bool growth_period);

struct ImageMeta {
  SourceId source = SourceId::S2like;
  int time = 0;
  geo::GeoMetadata geo;
  std::int64_t location_id = 0;
  bool operator==(const ImageMeta&) const = default;
};

// Band-major [C][H][W] raster.
struct Image {
  ImageMeta meta;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(ImageMeta m, std::size_t h, std::size_t w, std::size_t c)
      : meta(std::move(m)), height(h), width(w), channels(c), pixels(h * w * c, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }

  // Copy of the given bands, in the given order.
  Image select_bands(std::span<const std::size_t> bands) const;

  bool operator==(const Image&) const = default;
};

struct ImageSet {
  std::int64_t location_id = 0;
  SetKind kind = SetKind::S2L8City;
  std::vector<Image> images;
  int majority_class = 0;  // dominant land-cover label of the location
};

struct TrainingInput {
  std::array<Image, 3> images;
  std::int64_t set_ref = 0;
  SetKind kind = SetKind::S2L8City;

  std::array<ImageMeta, 3> metas() const { return {images[0].meta, images[1].meta, images[2].meta}; }
};

struct GeneratorConfig {
  std::size_t common_size = 64;   // H = W of every model input
  std::size_t field_size = 64;    // latent raster edge at the set's finest GSD
  std::size_t n_latent = 6;       // latent "material" channels
  std::size_t n_sinusoids = 6;    // texture components per channel
  std::size_t n_classes = 4;      // land-cover classes L
  std::size_t n_label_seeds = 10; // Voronoi sites of the label map
  double class_amplitude = 1.0;
  double texture_amplitude = 0.6;
  double seasonal_amplitude = 0.3;
  std::size_t n_hubs = 8;         // locations cluster around this many centers
  double hub_spread_deg = 0.3;
  int first_year = 2020;
  std::uint64_t seed = 0;
};

// Latent scene of one location at the set's finest GSD.
struct LatentField {
  std::size_t size = 0;
  double cell_gsd_m = 10.0;
  std::size_t n_latent = 0;
  std::vector<double> channels;  // [n_latent][size][size]
  std::vector<int> labels;       // [size][size]
  std::int64_t location_id = 0;
  geo::LatLon center;

  double channel(std::size_t c, std::size_t y, std::size_t x) const {
    return channels[(c * size + y) * size + x];
  }
  int label(std::size_t y, std::size_t x) const { return labels[y * size + x]; }
  int majority_class(std::size_t n_classes) const;
};

// Latent signature of a land-cover class (length n_latent); fixed per class.
std::vector<double> class_signature(int label, std::size_t n_latent);

LatentField generate_location(std::uint64_t seed, const GeneratorConfig& cfg, double cell_gsd_m = 10.0);

// Raw (un-normalized) rendering of `field` as seen by `source` at `time`.
Image render(const LatentField& field, SourceId source, int time, const GeneratorConfig& cfg);

// Per-band spectral response of a source to the latent channels, [n_bands][n_latent].
std::vector<std::vector<double>> spectral_mixing(SourceId source, std::size_t n_latent);

// Per band: (x - mean_b) / std_b with the source's table statistics.
Image normalize(const Image& raw);
Image normalize(const Image& raw, std::span<const BandInfo> stats);
Image denormalize(const Image& normalized);

// Area-weighted downsampling or bilinear upsampling of a square plane.
std::vector<double> resize_plane(std::span<const double> src, std::size_t src_size, std::size_t dst_size);

geo::LatLon location_center(std::int64_t location_id, const GeneratorConfig& cfg);
geo::GeoMetadata footprint(geo::LatLon center, double gsd_m, double ground_extent_m);

class Generator {
 public:
  explicit Generator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {}
  const GeneratorConfig& config() const { return cfg_; }

  LatentField field(std::int64_t location_id, SetKind kind) const;

  // Raw images of the location's set (not normalized).
  ImageSet assemble_raw(std::int64_t location_id, SetKind kind) const;

 private:
  GeneratorConfig cfg_;
};

// Normalized image set with the composition mandated by `kind`.
ImageSet assemble_set(std::int64_t location_id, SetKind kind, const Generator& generator);

// Throws std::invalid_argument if the set breaks its kind's composition.
void validate_set(const ImageSet& set);

bool satisfies_input_constraint(const ImageMeta& a, const ImageMeta& b, const ImageMeta& c);

TrainingInput sample_training_input(const ImageSet& set, Rng& rng);

}  // namespace a2mae::data
