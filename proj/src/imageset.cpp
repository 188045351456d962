#include "a2mae/imageset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

namespace a2mae::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Tap {
  std::size_t index;
  double weight;
};

// 1-D resampling taps for each destination sample.
std::vector<std::vector<Tap>> resample_taps(std::size_t src, std::size_t dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  if (dst <= src) {
    // Exact area coverage of [i*ratio, (i+1)*ratio).
    for (std::size_t i = 0; i < dst; ++i) {
      const double lo = static_cast<double>(i) * ratio;
      const double hi = lo + ratio;
      for (auto j = static_cast<std::size_t>(std::floor(lo)); j < src && static_cast<double>(j) < hi; ++j) {
        const double overlap = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
        if (overlap > 0.0) taps[i].push_back({j, overlap / ratio});
      }
    }
  } else {
    for (std::size_t i = 0; i < dst; ++i) {
      double x = (static_cast<double>(i) + 0.5) * ratio - 0.5;
      x = std::clamp(x, 0.0, static_cast<double>(src - 1));
      const auto j0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t j1 = std::min(j0 + 1, src - 1);
      const double t = x - static_cast<double>(j0);
      taps[i].push_back({j0, 1.0 - t});
      if (j1 != j0 && t > 0.0) taps[i].push_back({j1, t});
    }
  }
  return taps;
}

double season_phase(int time) {
  return kTwoPi * static_cast<double>(Rng::splitmix(static_cast<std::uint64_t>(time)) >> 11) * 0x1.0p-53;
}

double class_texture_gain(int label) {
  Rng rng = Rng::derive(0x7e47u, static_cast<std::uint64_t>(label));
  return rng.uniform(0.3, 1.5);
}

}  // namespace

std::string_view to_string(SetKind kind) {
  switch (kind) {
    case SetKind::S2L8City: return "s2l8_city";
    case SetKind::S2L8Reserve: return "s2l8_reserve";
    case SetKind::GFS2: return "gfs2";
  }
  return "unknown";
}

SetKind parse_set_kind(std::string_view name) {
  for (auto k : {SetKind::S2L8City, SetKind::S2L8Reserve, SetKind::GFS2}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown image-set kind '" + std::string(name) +
                              "' (expected s2l8_city, s2l8_reserve or gfs2)");
}

int reserve_time_tag(int year, bool growth_period) { return year * 10 + (growth_period ? 1 : 2); }

Image Image::select_bands(std::span<const std::size_t> bands) const {
  Image out(meta, height, width, bands.size());
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (bands[i] >= channels) {
      throw std::invalid_argument("band index " + std::to_string(bands[i]) + " out of range for " +
                                  std::to_string(channels) + "-band image");
    }
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(bands[i] * plane), plane,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return out;
}

int LatentField::majority_class(std::size_t n_classes) const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : labels) counts.at(static_cast<std::size_t>(l))++;
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<double> class_signature(int label, std::size_t n_latent) {
  Rng rng = Rng::derive(0x5167u, static_cast<std::uint64_t>(label));
  std::vector<double> sig(n_latent);
  for (auto& v : sig) v = rng.normal();
  return sig;
}

LatentField generate_location(std::uint64_t seed, const GeneratorConfig& cfg, double cell_gsd_m) {
  if (cfg.field_size < cfg.common_size) {
    throw std::invalid_argument("field_size must be at least common_size");
  }
  if (cfg.n_classes == 0 || cfg.n_latent == 0) throw std::invalid_argument("generator needs classes and latents");
  Rng rng(seed);
  const std::size_t n = cfg.field_size;

  LatentField field;
  field.size = n;
  field.cell_gsd_m = cell_gsd_m;
  field.n_latent = cfg.n_latent;
  field.labels.assign(n * n, 0);
  field.channels.assign(cfg.n_latent * n * n, 0.0);

  // Voronoi land-cover map.
  struct Site {
    double y, x;
    int label;
  };
  std::vector<Site> sites(std::max<std::size_t>(1, cfg.n_label_seeds));
  for (auto& s : sites) {
    s.y = rng.uniform(0.0, static_cast<double>(n));
    s.x = rng.uniform(0.0, static_cast<double>(n));
    s.label = static_cast<int>(rng.uniform_index(cfg.n_classes));
  }
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double py = static_cast<double>(y) + 0.5;
      const double px = static_cast<double>(x) + 0.5;
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (const auto& s : sites) {
        const double d = (s.y - py) * (s.y - py) + (s.x - px) * (s.x - px);
        if (d < best) {
          best = d;
          label = s.label;
        }
      }
      field.labels[y * n + x] = label;
    }
  }

  std::vector<std::vector<double>> signatures(cfg.n_classes);
  std::vector<double> gains(cfg.n_classes);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    signatures[c] = class_signature(static_cast<int>(c), cfg.n_latent);
    gains[c] = class_texture_gain(static_cast<int>(c));
  }

  const double max_freq = std::max(1.0, static_cast<double>(n) / 6.0);
  const double amp_norm = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg.n_sinusoids)));
  for (std::size_t c = 0; c < cfg.n_latent; ++c) {
    struct Wave {
      double ky, kx, phase, amp;
    };
    std::vector<Wave> waves(cfg.n_sinusoids);
    for (auto& w : waves) {
      const double f = rng.uniform(1.0, max_freq);
      const double theta = rng.uniform(0.0, kTwoPi);
      w.ky = kTwoPi * f * std::sin(theta) / static_cast<double>(n);
      w.kx = kTwoPi * f * std::cos(theta) / static_cast<double>(n);
      w.phase = rng.uniform(0.0, kTwoPi);
      w.amp = rng.normal() * amp_norm;
    }
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        double texture = 0.0;
        for (const auto& w : waves) {
          texture += w.amp * std::sin(w.ky * static_cast<double>(y) + w.kx * static_cast<double>(x) + w.phase);
        }
        const auto label = static_cast<std::size_t>(field.labels[y * n + x]);
        field.channels[(c * n + y) * n + x] =
            cfg.class_amplitude * signatures[label][c] + cfg.texture_amplitude * gains[label] * texture;
      }
    }
  }
  return field;
}

std::vector<double> resize_plane(std::span<const double> src, std::size_t src_size, std::size_t dst_size) {
  if (src.size() != src_size * src_size || src_size == 0 || dst_size == 0) {
    throw std::invalid_argument("resize_plane: plane does not match its size");
  }
  if (src_size == dst_size) return {src.begin(), src.end()};
  const auto taps = resample_taps(src_size, dst_size);
  // Rows first, then columns.
  std::vector<double> tmp(src_size * dst_size, 0.0);
  for (std::size_t y = 0; y < src_size; ++y) {
    for (std::size_t x = 0; x < dst_size; ++x) {
      double acc = 0.0;
      for (const auto& t : taps[x]) acc += t.weight * src[y * src_size + t.index];
      tmp[y * dst_size + x] = acc;
    }
  }
  std::vector<double> out(dst_size * dst_size, 0.0);
  for (std::size_t y = 0; y < dst_size; ++y) {
    for (const auto& t : taps[y]) {
      for (std::size_t x = 0; x < dst_size; ++x) out[y * dst_size + x] += t.weight * tmp[t.index * dst_size + x];
    }
  }
  return out;
}

std::vector<std::vector<double>> spectral_mixing(SourceId source, std::size_t n_latent) {
  const auto& spec = source_spec(source);
  const double lo = std::log(450.0);
  const double hi = std::log(2200.0);
  std::vector<std::vector<double>> m(spec.n_bands(), std::vector<double>(n_latent, 0.0));
  for (std::size_t b = 0; b < spec.n_bands(); ++b) {
    const double lw = std::log(spec.bands[b].wavelength_nm);
    double norm = 0.0;
    for (std::size_t c = 0; c < n_latent; ++c) {
      const double center = n_latent > 1 ? lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(n_latent - 1)
                                         : 0.5 * (lo + hi);
      const double z = (lw - center) / 0.35;
      m[b][c] = std::exp(-z * z);
      norm += m[b][c] * m[b][c];
    }
    norm = std::sqrt(norm);
    for (auto& v : m[b]) v /= norm;
  }
  return m;
}

Image render(const LatentField& field, SourceId source, int time, const GeneratorConfig& cfg) {
  const auto& spec = source_spec(source);
  const double ratio = spec.gsd_m / field.cell_gsd_m;
  const auto native = static_cast<std::size_t>(
      std::clamp(std::round(static_cast<double>(field.size) / ratio), 1.0, static_cast<double>(field.size)));
  const std::size_t out = cfg.common_size;
  const std::size_t plane = field.size * field.size;
  const double phase = season_phase(time);

  std::vector<std::vector<double>> latent(field.n_latent);
  for (std::size_t c = 0; c < field.n_latent; ++c) {
    std::span<const double> src(field.channels.data() + c * plane, plane);
    auto coarse = resize_plane(src, field.size, native);
    latent[c] = resize_plane(coarse, native, out);
    const double factor =
        1.0 + cfg.seasonal_amplitude *
                  std::sin(phase + kTwoPi * static_cast<double>(c) / static_cast<double>(field.n_latent));
    for (auto& v : latent[c]) v *= factor;
  }

  ImageMeta meta;
  meta.source = source;
  meta.time = time;
  meta.location_id = field.location_id;
  meta.geo = footprint(field.center, spec.gsd_m, static_cast<double>(field.size) * field.cell_gsd_m);

  Image img(meta, out, out, spec.n_bands());
  const auto mixing = spectral_mixing(source, field.n_latent);
  for (std::size_t b = 0; b < spec.n_bands(); ++b) {
    const auto& band = spec.bands[b];
    for (std::size_t i = 0; i < out * out; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < field.n_latent; ++c) z += mixing[b][c] * latent[c][i];
      // Rounded to float32, like stored rasters.
      img.pixels[b * out * out + i] = static_cast<double>(static_cast<float>(band.mean + band.stddev * z));
    }
  }
  return img;
}

Image normalize(const Image& raw, std::span<const BandInfo> stats) {
  if (stats.size() != raw.channels) {
    throw std::invalid_argument("normalize: image has " + std::to_string(raw.channels) + " bands but " +
                                std::to_string(stats.size()) + " band statistics were given");
  }
  Image out = raw;
  const std::size_t plane = raw.height * raw.width;
  for (std::size_t b = 0; b < raw.channels; ++b) {
    if (!(stats[b].stddev > 0.0)) {
      throw std::invalid_argument("normalize: band " + std::string(stats[b].name) + " has non-positive std");
    }
    for (std::size_t i = 0; i < plane; ++i) {
      auto& v = out.pixels[b * plane + i];
      v = (v - stats[b].mean) / stats[b].stddev;
    }
  }
  return out;
}

Image normalize(const Image& raw) { return normalize(raw, source_spec(raw.meta.source).bands); }

Image denormalize(const Image& normalized) {
  const auto& stats = source_spec(normalized.meta.source).bands;
  if (stats.size() != normalized.channels) throw std::invalid_argument("denormalize: band count mismatch");
  Image out = normalized;
  const std::size_t plane = normalized.height * normalized.width;
  for (std::size_t b = 0; b < normalized.channels; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      auto& v = out.pixels[b * plane + i];
      v = v * stats[b].stddev + stats[b].mean;
    }
  }
  return out;
}

geo::LatLon location_center(std::int64_t location_id, const GeneratorConfig& cfg) {
  const auto hubs = std::max<std::size_t>(1, cfg.n_hubs);
  const auto hub = static_cast<std::uint64_t>(location_id) % hubs;
  Rng hub_rng = Rng::derive(cfg.seed, 0xb0b0000u + hub);
  const double hub_lat = hub_rng.uniform(-55.0, 65.0);
  const double hub_lon = hub_rng.uniform(-175.0, 175.0);
  Rng loc_rng = Rng::derive(cfg.seed ^ 0x10ca7e, static_cast<std::uint64_t>(location_id));
  return geo::LatLon{std::clamp(hub_lat + loc_rng.normal(0.0, cfg.hub_spread_deg), -89.0, 89.0),
                     std::clamp(hub_lon + loc_rng.normal(0.0, cfg.hub_spread_deg), -179.0, 179.0)};
}

geo::GeoMetadata footprint(geo::LatLon center, double gsd_m, double ground_extent_m) {
  const double half = 0.5 * ground_extent_m;
  const double dlat = half / geo::kMetersPerDegree;
  const double dlon = half / (geo::kMetersPerDegree * std::max(0.01, std::cos(center.lat_deg * std::numbers::pi / 180.0)));
  auto pt = [](double lat, double lon) {
    return geo::LatLon{std::clamp(lat, -90.0, 90.0), std::clamp(lon, -180.0, 180.0)};
  };
  geo::GeoMetadata g;
  g.gsd_m = gsd_m;
  g.corners = {pt(center.lat_deg + dlat, center.lon_deg - dlon), pt(center.lat_deg + dlat, center.lon_deg + dlon),
               pt(center.lat_deg - dlat, center.lon_deg - dlon), pt(center.lat_deg - dlat, center.lon_deg + dlon)};
  return g;
}

namespace {

SourceId gf_source_for(std::int64_t location_id, const GeneratorConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed ^ 0x6f6f, static_cast<std::uint64_t>(location_id));
  return rng.uniform_index(2) == 0 ? SourceId::GF1like : SourceId::GF2like;
}

}  // namespace

LatentField Generator::field(std::int64_t location_id, SetKind kind) const {
  const double cell_gsd =
      kind == SetKind::GFS2 ? source_spec(gf_source_for(location_id, cfg_)).gsd_m : source_spec(SourceId::S2like).gsd_m;
  const std::uint64_t seed = Rng::derive(cfg_.seed, static_cast<std::uint64_t>(location_id)).next_u64();
  LatentField f = generate_location(seed, cfg_, cell_gsd);
  f.location_id = location_id;
  f.center = location_center(location_id, cfg_);
  return f;
}

ImageSet Generator::assemble_raw(std::int64_t location_id, SetKind kind) const {
  const LatentField f = field(location_id, kind);
  ImageSet set;
  set.location_id = location_id;
  set.kind = kind;
  set.majority_class = f.majority_class(cfg_.n_classes);
  const int y0 = cfg_.first_year;
  switch (kind) {
    case SetKind::S2L8City:
      for (auto s : {SourceId::S2like, SourceId::L8like}) {
        for (int y = y0 + 1; y <= y0 + 3; ++y) set.images.push_back(render(f, s, y, cfg_));
      }
      break;
    case SetKind::S2L8Reserve:
      for (auto s : {SourceId::S2like, SourceId::L8like}) {
        for (bool growth : {true, false}) set.images.push_back(render(f, s, reserve_time_tag(y0, growth), cfg_));
      }
      break;
    case SetKind::GFS2: {
      Rng rng = Rng::derive(cfg_.seed ^ 0x7175, static_cast<std::uint64_t>(location_id));
      const auto years = rng.sample(std::vector<int>{y0, y0 + 1, y0 + 2, y0 + 3}, 2);
      set.images.push_back(render(f, gf_source_for(location_id, cfg_), years[0], cfg_));
      set.images.push_back(render(f, SourceId::S2like, years[0], cfg_));
      set.images.push_back(render(f, SourceId::S2like, years[1], cfg_));
      break;
    }
  }
  return set;
}

ImageSet assemble_set(std::int64_t location_id, SetKind kind, const Generator& generator) {
  ImageSet set = generator.assemble_raw(location_id, kind);
  for (auto& img : set.images) img = normalize(img);
  return set;
}

void validate_set(const ImageSet& set) {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("image set " + std::to_string(set.location_id) + " (" +
                                std::string(to_string(set.kind)) + "): " + what);
  };
  std::map<SourceId, std::set<int>> times_by_source;
  std::set<std::pair<SourceId, int>> seen;
  for (const auto& img : set.images) {
    if (!seen.insert({img.meta.source, img.meta.time}).second) fail("duplicate (source, time) image");
    times_by_source[img.meta.source].insert(img.meta.time);
    if (img.height != set.images.front().height || img.width != set.images.front().width) {
      fail("images do not share one input size");
    }
  }
  if (times_by_source.size() < 2) fail("needs at least 2 distinct sources");
  const auto count = [&](SourceId s) { return times_by_source.contains(s) ? times_by_source.at(s).size() : 0; };

  switch (set.kind) {
    case SetKind::S2L8City:
      if (set.images.size() != 6 || count(SourceId::S2like) != 3 || count(SourceId::L8like) != 3 ||
          times_by_source.at(SourceId::S2like) != times_by_source.at(SourceId::L8like)) {
        fail("expected 3 S2like + 3 L8like images over the same 3 years");
      }
      break;
    case SetKind::S2L8Reserve:
      if (set.images.size() != 4 || count(SourceId::S2like) != 2 || count(SourceId::L8like) != 2 ||
          times_by_source.at(SourceId::S2like) != times_by_source.at(SourceId::L8like)) {
        fail("expected 2 S2like + 2 L8like images over the same 2 time tags");
      }
      break;
    case SetKind::GFS2: {
      const auto gf = count(SourceId::GF1like) + count(SourceId::GF2like);
      if (set.images.size() != 3 || gf != 1 || count(SourceId::S2like) != 2) {
        fail("expected 1 GF-family image + 2 S2like images at distinct times");
      }
      break;
    }
  }
}

bool satisfies_input_constraint(const ImageMeta& a, const ImageMeta& b, const ImageMeta& c) {
  const std::set<SourceId> sources{a.source, b.source, c.source};
  const std::set<int> times{a.time, b.time, c.time};
  return sources.size() >= 2 && times.size() >= 2;
}

TrainingInput sample_training_input(const ImageSet& set, Rng& rng) {
  validate_set(set);
  std::vector<std::size_t> all(set.images.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (;;) {
    auto pick = rng.sample(all, 3);
    std::sort(pick.begin(), pick.end());
    const auto& a = set.images[pick[0]];
    const auto& b = set.images[pick[1]];
    const auto& c = set.images[pick[2]];
    if (satisfies_input_constraint(a.meta, b.meta, c.meta)) {
      return TrainingInput{{a, b, c}, set.location_id, set.kind};
    }
  }
}

}  // namespace a2mae::data
