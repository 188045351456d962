#include "a2mae/sources.hpp"

#include <stdexcept>

namespace a2mae::data {
namespace {

const std::array<SourceSpec, kNumSources>& table() {
  static const std::array<SourceSpec, kNumSources> specs{{
      {SourceId::S2like,
       "S2like",
       "s2",
       10.0,
       {
           {"B1", 443, 1161.52, 523.98},
           {"B2", 490, 1399.38, 536.77},
           {"B3", 560, 1455.72, 625.56},
           {"B4", 665, 2761.06, 771.05},
           {"B5", 705, 1815.21, 616.86},
           {"B6", 740, 2465.56, 671.86},
           {"B7", 783, 2722.34, 727.05},
           {"B8", 842, 2867.82, 756.91},
           {"B8a", 865, 2336.82, 683.80},
           {"B9", 940, 1742.15, 629.27},
           {"B11", 1610, 1069.34, 465.96},
           {"B12", 2190, 3128.77, 848.05},
       }},
      {SourceId::L8like,
       "L8like",
       "l8",
       30.0,
       {
           {"B1", 440, 229.17, 262.79},
           {"B2", 480, 277.28, 266.60},
           {"B3", 560, 488.15, 277.24},
           {"B4", 655, 411.19, 305.21},
           {"B5", 865, 2104.24, 612.09},
           {"B6", 1610, 1275.84, 452.19},
           {"B7", 2200, 701.26, 325.94},
       }},
      {SourceId::GF1like,
       "GF1like",
       "gf1",
       2.0,
       {
           {"B1", 485, 96.11, 37.65},
           {"B2", 555, 98.68, 36.20},
           {"B3", 660, 99.79, 35.67},
           {"B4", 830, 99.67, 38.72},
       }},
      {SourceId::GF2like,
       "GF2like",
       "gf2",
       0.8,
       {
           {"B1", 485, 78.67, 33.51},
           {"B2", 555, 81.17, 33.19},
           {"B3", 660, 85.88, 33.76},
           {"B4", 830, 86.31, 36.01},
       }},
  }};
  return specs;
}

}  // namespace

const SourceSpec& source_spec(SourceId id) { return table().at(static_cast<std::size_t>(id)); }

std::string_view to_string(SourceId id) { return source_spec(id).name; }

SourceId parse_source(std::string_view name) {
  for (const auto& spec : table()) {
    if (name == spec.name || name == spec.short_name) return spec.id;
  }
  throw std::invalid_argument("unknown source '" + std::string(name) + "' (expected s2, l8, gf1 or gf2)");
}

}  // namespace a2mae::data
