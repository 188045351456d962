#include "a2mae/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace a2mae::geo {
namespace {

void check_coordinate(double lat_deg, double lon_deg) {
  if (!std::isfinite(lat_deg) || !std::isfinite(lon_deg) || lat_deg < -90.0 || lat_deg > 90.0 ||
      lon_deg < -180.0 || lon_deg > 180.0) {
    std::ostringstream os;
    os << "coordinate (" << lat_deg << ", " << lon_deg << ") outside [-90,90]x[-180,180]";
    throw std::invalid_argument(os.str());
  }
}

void check_level(int level) {
  if (level < 0 || level > kMaxLevel) {
    throw std::invalid_argument("mesh level " + std::to_string(level) + " outside [0, 30]");
  }
}

// floor((deg - origin) / cell_deg) computed with an exact power-of-two scale.
std::uint64_t cell_index(double deg, int level) {
  return static_cast<std::uint64_t>(std::floor(std::ldexp(deg - kRootOriginDeg, level - 9)));
}

std::string to_bits(std::uint64_t value, int width) {
  std::string bits(static_cast<std::size_t>(width), '0');
  for (int b = 0; b < width; ++b) {
    if ((value >> (width - 1 - b)) & 1U) bits[static_cast<std::size_t>(b)] = '1';
  }
  return bits;
}

std::uint64_t from_bits(const std::string& bits) {
  std::uint64_t v = 0;
  for (char c : bits) v = (v << 1) | (c == '1' ? 1U : 0U);
  return v;
}

}  // namespace

void GeoMetadata::validate() const {
  if (!std::isfinite(gsd_m) || gsd_m <= 0.0) {
    throw std::invalid_argument("gsd_m must be positive and finite");
  }
  for (const auto& c : corners) check_coordinate(c.lat_deg, c.lon_deg);
}

LatLon GeoMetadata::center() const {
  LatLon c;
  for (const auto& p : corners) {
    c.lat_deg += p.lat_deg / kNumCorners;
    c.lon_deg += p.lon_deg / kNumCorners;
  }
  return c;
}

MeshLevel::MeshLevel(int level) : level_(level) { check_level(level); }

double MeshLevel::cell_deg() const { return std::ldexp(kRootCellDeg, -level_); }

MeshLevel level_for_gsd(double gsd_m) {
  if (!std::isfinite(gsd_m) || gsd_m <= 0.0) {
    throw std::invalid_argument("gsd_m must be positive and finite");
  }
  int best = 0;
  double best_err = std::abs(MeshLevel(0).cell_m_equator() - gsd_m);
  for (int k = 1; k <= kMaxLevel; ++k) {
    const double err = std::abs(MeshLevel(k).cell_m_equator() - gsd_m);
    if (err < best_err) {
      best = k;
      best_err = err;
    }
  }
  return MeshLevel(best);
}

CornerCode encode_corner(double lat_deg, double lon_deg, int level) {
  check_coordinate(lat_deg, lon_deg);
  check_level(level);
  return CornerCode{level, to_bits(cell_index(lat_deg, level), level), to_bits(cell_index(lon_deg, level), level)};
}

LatLon decode_cell_origin(const CornerCode& code) {
  check_level(code.level);
  if (code.row_bits.size() != static_cast<std::size_t>(code.level) ||
      code.col_bits.size() != static_cast<std::size_t>(code.level)) {
    throw std::invalid_argument("corner code bit length does not match its level");
  }
  const double cell = MeshLevel(code.level).cell_deg();
  return LatLon{kRootOriginDeg + static_cast<double>(from_bits(code.row_bits)) * cell,
                kRootOriginDeg + static_cast<double>(from_bits(code.col_bits)) * cell};
}

GeoEncoding encode_geo(const GeoMetadata& meta) {
  meta.validate();
  GeoEncoding enc;
  enc.level = level_for_gsd(meta.gsd_m);
  enc.padded_bits.assign(kPaddedBits, 0.0);
  std::size_t pos = 0;
  for (std::size_t c = 0; c < kNumCorners; ++c) {
    enc.codes[c] = encode_corner(meta.corners[c].lat_deg, meta.corners[c].lon_deg, enc.level.level());
    for (const auto* bits : {&enc.codes[c].row_bits, &enc.codes[c].col_bits}) {
      for (char b : *bits) enc.padded_bits[pos++] = (b == '1') ? 1.0 : 0.0;
    }
  }
  return enc;
}

std::vector<double> geo_embedding(const GeoMetadata& meta, const PosencConfig& cfg,
                                  std::span<const double> projection) {
  const std::size_t d = cfg.embed_dim;
  if (projection.size() != kPaddedBits * d) {
    throw std::invalid_argument("geo projection must have " + std::to_string(kPaddedBits * d) + " weights, got " +
                                std::to_string(projection.size()));
  }
  const auto enc = encode_geo(meta);
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < kPaddedBits; ++i) {
    if (enc.padded_bits[i] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += projection[i * d + j];
  }
  return out;
}

nn::Tensor scaled_posenc(std::size_t grid_h, std::size_t grid_w, double gsd_m, const PosencConfig& cfg) {
  const std::size_t d = cfg.embed_dim;
  if (d == 0 || d % 2 != 0) {
    throw std::invalid_argument("positional encoding dimension must be even and positive, got " + std::to_string(d));
  }
  if (grid_h == 0 || grid_w == 0) throw std::invalid_argument("positional grid must be at least 1x1");
  if (!std::isfinite(gsd_m) || gsd_m <= 0.0) throw std::invalid_argument("gsd_m must be positive and finite");
  if (!(cfg.reference_gsd_m > 0.0) || !(cfg.base > 0.0)) {
    throw std::invalid_argument("reference GSD and base must be positive");
  }

  const std::size_t pairs = d / 2;
  const std::size_t x_pairs = (pairs + 1) / 2;
  const double scale = cfg.reference_gsd_m / gsd_m;

  nn::Tensor table({grid_h * grid_w, d});
  for (std::size_t r = 0; r < grid_h; ++r) {
    for (std::size_t c = 0; c < grid_w; ++c) {
      auto out = table.row(r * grid_w + c);
      for (std::size_t p = 0; p < pairs; ++p) {
        const bool x_axis = p < x_pairs;
        const auto i = static_cast<double>(x_axis ? p : p - x_pairs);
        const auto pos = static_cast<double>(x_axis ? c : r);
        const double arg = scale * pos / std::pow(cfg.base, 2.0 * i / static_cast<double>(d));
        out[2 * p] = std::sin(arg);
        out[2 * p + 1] = std::cos(arg);
      }
    }
  }
  return table;
}

std::vector<double> one_hot_geo_encoding(const GeoMetadata& meta, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("one-hot geo encoding needs at least one bin");
  for (const auto& c : meta.corners) check_coordinate(c.lat_deg, c.lon_deg);
  const auto center = meta.center();
  const auto b = static_cast<double>(bins);
  const auto row = std::min(bins - 1, static_cast<std::size_t>(std::floor((center.lat_deg + 90.0) / 180.0 * b)));
  const auto col = std::min(bins - 1, static_cast<std::size_t>(std::floor((center.lon_deg + 180.0) / 360.0 * b)));
  std::vector<double> v(bins * bins, 0.0);
  v[row * bins + col] = 1.0;
  return v;
}

}  // namespace a2mae::geo
