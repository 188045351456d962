#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "a2mae/imageset.hpp"
#include "a2mae/rng.hpp"

namespace a2mae::pruning {

struct PruningConfig {
  double region_cell_deg = 1.0;
  std::size_t k = 20;
  double keep_frac = 0.10;
  std::size_t max_iters = 100;
  double tol = 1e-9;
  bool reserve_only = true;  // prune only S2L8 reserve sets; everything else is kept

  void validate() const;
};

// (floor(lat / cell), floor(lon / cell))
using RegionId = std::pair<std::int64_t, std::int64_t>;

struct LocationPoint {
  std::int64_t id = 0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
};

using RegionAssignment = std::map<std::int64_t, RegionId>;

RegionAssignment partition_regions(const std::vector<LocationPoint>& locations, double cell_deg);
RegionId region_of(double lat_deg, double lon_deg, double cell_deg);

// Per-band mean then per-band population standard deviation, length 2*C.
std::vector<double> feature_of(const data::Image& image);

using Feature = std::vector<double>;

struct KMeansResult {
  std::vector<Feature> centroids;
  std::vector<std::size_t> assignments;
  // Sum of squared distances after each assignment step.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
};

// Lloyd iterations from k-means++ seeds. Stops when no centroid moves more
// than tol (Euclidean) or after max_iters.
KMeansResult kmeans(const std::vector<Feature>& features, std::size_t k, std::size_t max_iters, double tol,
                    Rng& rng);

double difficulty(const Feature& feature, const std::vector<Feature>& centroids);

struct Item {
  std::int64_t id = 0;
  Feature feature;
};

struct RegionStats {
  RegionId region;
  std::size_t n = 0;
  std::size_t kept = 0;
  bool global_pool = false;  // clustered in the shared pool of undersized regions
  double min_kept_difficulty = 0.0;
  double max_dropped_difficulty = 0.0;
};

struct PruneResult {
  std::vector<std::int64_t> kept;  // sorted
  std::vector<RegionStats> regions;
  std::map<std::int64_t, double> difficulty;
};

// Number of items kept out of n.
std::size_t keep_count(std::size_t n, double keep_frac);

PruneResult prune(const std::map<RegionId, std::vector<Item>>& regions, const PruningConfig& cfg, std::uint64_t seed);

// Clustering feature of an image set: feature_of its first S2like image.
Feature set_feature(const data::ImageSet& set);

}  // namespace a2mae::pruning
