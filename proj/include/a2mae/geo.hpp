#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "a2mae/tensor.hpp"

namespace a2mae::geo {

// Level-0 cell edge. The root grid spans [-256, 256] degrees on both axes.
inline constexpr double kRootCellDeg = 512.0;
inline constexpr double kRootOriginDeg = -256.0;
inline constexpr double kMetersPerDegree = 111320.0;
inline constexpr int kMaxLevel = 30;
inline constexpr std::size_t kNumCorners = 4;
// 4 corners x (row bits + col bits) at the deepest level.
inline constexpr std::size_t kPaddedBits = 2 * kNumCorners * kMaxLevel;

enum class Corner { TL = 0, TR = 1, BL = 2, BR = 3 };
inline constexpr std::array<const char*, kNumCorners> kCornerNames{"TL", "TR", "BL", "BR"};

struct LatLon {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct GeoMetadata {
  double gsd_m = 1.0;
  std::array<LatLon, kNumCorners> corners{};  // TL, TR, BL, BR

  void validate() const;
  LatLon center() const;
  bool operator==(const GeoMetadata&) const = default;
};

class MeshLevel {
 public:
  explicit MeshLevel(int level);
  int level() const { return level_; }
  double cell_deg() const;
  double cell_m_equator() const { return cell_deg() * kMetersPerDegree; }
  bool operator==(const MeshLevel&) const = default;

 private:
  int level_;
};

// Big-endian cell indices at one mesh level, stored as '0'/'1' strings.
struct CornerCode {
  int level = 0;
  std::string row_bits;
  std::string col_bits;
  bool operator==(const CornerCode&) const = default;
};

struct PosencConfig {
  std::size_t embed_dim = 64;
  double reference_gsd_m = 1.0;
  double base = 10000.0;
};

struct GeoEncoding {
  MeshLevel level{0};
  std::array<CornerCode, kNumCorners> codes{};
  std::vector<double> padded_bits;  // length kPaddedBits, entries 0/1
};

// Mesh level whose equatorial cell size is nearest to gsd_m; ties go coarser.
MeshLevel level_for_gsd(double gsd_m);

CornerCode encode_corner(double lat_deg, double lon_deg, int level);

// Southwest corner (lat, lon) of the cell a code names; used to verify
// containment and nesting.
LatLon decode_cell_origin(const CornerCode& code);

GeoEncoding encode_geo(const GeoMetadata& meta);

// Linear projection of the padded corner bits. `projection` is row-major
// [kPaddedBits x embed_dim].
std::vector<double> geo_embedding(const GeoMetadata& meta, const PosencConfig& cfg,
                                  std::span<const double> projection);

// Ground-scaled 2-D sinusoidal table, shape [grid_h * grid_w, embed_dim].
// Sin/cos pairs 0..D/4-1 (rounded up) carry the column position, the rest the
// row position; each pair's argument is (ref_gsd / gsd) * pos / base^(2i/D).
nn::Tensor scaled_posenc(std::size_t grid_h, std::size_t grid_w, double gsd_m, const PosencConfig& cfg);

// Ablation baseline: one-hot over a bins x bins lat/lon grid of the image center.
std::vector<double> one_hot_geo_encoding(const GeoMetadata& meta, std::size_t bins);

}  // namespace a2mae::geo
