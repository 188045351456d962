#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace a2mae::data {

enum class SourceId { S2like = 0, L8like = 1, GF1like = 2, GF2like = 3 };
inline constexpr std::size_t kNumSources = 4;
inline constexpr std::array<SourceId, kNumSources> kAllSources{SourceId::S2like, SourceId::L8like, SourceId::GF1like,
                                                               SourceId::GF2like};

struct BandInfo {
  std::string_view name;
  double wavelength_nm;
  double mean;
  double stddev;
};

struct SourceSpec {
  SourceId id;
  std::string_view name;       // canonical id, e.g. "S2like"
  std::string_view short_name; // CLI spelling, e.g. "s2"
  double gsd_m;
  std::vector<BandInfo> bands;

  std::size_t n_bands() const { return bands.size(); }
};

// Per-band statistics of the four sensor families. Sentinel-2 omits B10.
const SourceSpec& source_spec(SourceId id);

std::string_view to_string(SourceId id);
// Accepts canonical names ("S2like") and short names ("s2", "l8", "gf1", "gf2").
SourceId parse_source(std::string_view name);

}  // namespace a2mae::data
