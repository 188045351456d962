#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "a2mae/imageset.hpp"

namespace a2mae::data {

// Normalized image sets plus the generator settings that produced them.
struct Dataset {
  GeneratorConfig generator;
  std::vector<ImageSet> sets;

  std::vector<const ImageSet*> of_kinds(const std::vector<SetKind>& kinds) const;
};

inline const std::vector<SetKind> kAllKinds{SetKind::S2L8City, SetKind::S2L8Reserve, SetKind::GFS2};

// One set per (location, kind), locations 0..n_locations-1.
Dataset generate_dataset(const GeneratorConfig& cfg, std::size_t n_locations, const std::vector<SetKind>& kinds);

// DIR/dataset.json plus one raw raster (+ sidecar) per image under DIR/images.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
// Reads the manifest and ingests (normalizes) every raster.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace a2mae::data
