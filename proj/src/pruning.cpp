#include "a2mae/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace a2mae::pruning {
namespace {

double sq_dist(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::uint64_t region_key(const RegionId& r) {
  return Rng::splitmix(static_cast<std::uint64_t>(r.first) * 0x9e3779b97f4a7c15ull ^
                       static_cast<std::uint64_t>(r.second));
}

// Ids of `items` keeping the ceil(frac*n) largest scores; ties go to the smaller id.
std::vector<std::size_t> hardest(const std::vector<Item>& items, const std::vector<double>& score, std::size_t keep) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return items[a].id < items[b].id;
  });
  order.resize(keep);
  return order;
}

}  // namespace

void PruningConfig::validate() const {
  if (!(keep_frac > 0.0 && keep_frac <= 1.0)) {
    throw std::invalid_argument("keep_frac must be in (0, 1], got " + std::to_string(keep_frac));
  }
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (!(region_cell_deg > 0.0)) throw std::invalid_argument("region_cell_deg must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("tol must be non-negative");
}

RegionId region_of(double lat_deg, double lon_deg, double cell_deg) {
  if (!(cell_deg > 0.0)) throw std::invalid_argument("cell_deg must be positive");
  if (!std::isfinite(lat_deg) || lat_deg < -90.0 || lat_deg > 90.0) {
    throw std::invalid_argument("latitude " + std::to_string(lat_deg) + " outside [-90, 90]");
  }
  if (!std::isfinite(lon_deg) || lon_deg < -180.0 || lon_deg > 180.0) {
    throw std::invalid_argument("longitude " + std::to_string(lon_deg) + " outside [-180, 180]");
  }
  return {static_cast<std::int64_t>(std::floor(lat_deg / cell_deg)),
          static_cast<std::int64_t>(std::floor(lon_deg / cell_deg))};
}

RegionAssignment partition_regions(const std::vector<LocationPoint>& locations, double cell_deg) {
  RegionAssignment out;
  for (const auto& l : locations) out[l.id] = region_of(l.lat_deg, l.lon_deg, cell_deg);
  return out;
}

std::vector<double> feature_of(const data::Image& image) {
  const std::size_t plane = image.height * image.width;
  std::vector<double> f(2 * image.channels, 0.0);
  if (plane == 0) return f;
  for (std::size_t c = 0; c < image.channels; ++c) {
    const auto begin = image.pixels.begin() + static_cast<std::ptrdiff_t>(c * plane);
    const double mean = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(plane), 0.0) / plane;
    double var = 0.0;
    for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(plane); ++it) var += (*it - mean) * (*it - mean);
    f[c] = mean;
    f[image.channels + c] = std::sqrt(var / plane);
  }
  return f;
}

KMeansResult kmeans(const std::vector<Feature>& features, std::size_t k, std::size_t max_iters, double tol,
                    Rng& rng) {
  const std::size_t n = features.size();
  if (k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
  if (n < k) {
    throw std::invalid_argument("kmeans: " + std::to_string(n) + " features for k = " + std::to_string(k));
  }
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) throw std::invalid_argument("kmeans: features have mixed dimensions");
  }

  // k-means++ seeding.
  KMeansResult r;
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.uniform_index(n);
  r.centroids.push_back(features[first]);
  chosen[first] = true;
  while (r.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(features[i], r.centroids.back()));
      if (!chosen[i]) total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        pick = i;
        u -= d2[i];
        if (u < 0.0) break;
      }
    } else {
      // Remaining points coincide with centroids; take any unchosen one.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      pick = rest[rng.uniform_index(rest.size())];
    }
    chosen[pick] = true;
    r.centroids.push_back(features[pick]);
  }

  r.assignments.assign(n, 0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(features[i], r.centroids[c]);
        if (d < best) {
          best = d;
          r.assignments[i] = c;
        }
      }
      objective += best;
    }
    r.objective_history.push_back(objective);
    r.iterations = it + 1;

    std::vector<Feature> next(k, Feature(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[r.assignments[i]];
      for (std::size_t j = 0; j < dim; ++j) c[j] += features[i][j];
      ++count[r.assignments[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        next[c] = r.centroids[c];  // empty cluster keeps its centroid
        continue;
      }
      for (auto& v : next[c]) v /= static_cast<double>(count[c]);
      shift = std::max(shift, std::sqrt(sq_dist(next[c], r.centroids[c])));
    }
    r.centroids = std::move(next);
    if (shift <= tol) break;
  }
  return r;
}

double difficulty(const Feature& feature, const std::vector<Feature>& centroids) {
  if (centroids.empty()) throw std::invalid_argument("difficulty: no centroids");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : centroids) {
    if (c.size() != feature.size()) {
      throw std::invalid_argument("difficulty: feature has " + std::to_string(feature.size()) +
                                  " dims, centroid has " + std::to_string(c.size()));
    }
    best = std::min(best, sq_dist(feature, c));
  }
  return std::sqrt(best);
}

std::size_t keep_count(std::size_t n, double keep_frac) {
  // ceil with a guard so that e.g. 0.1 * 100 stays 10
  const double x = keep_frac * static_cast<double>(n);
  const double c = std::ceil(x - 1e-9 * std::max(1.0, x));
  return std::min(n, static_cast<std::size_t>(std::max(0.0, c)));
}

PruneResult prune(const std::map<RegionId, std::vector<Item>>& regions, const PruningConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PruneResult out;

  std::vector<Item> pool;
  std::vector<RegionId> pooled_regions;
  for (const auto& [region, items] : regions) {
    if (!items.empty() && items.size() < cfg.k) {
      pool.insert(pool.end(), items.begin(), items.end());
      pooled_regions.push_back(region);
    }
  }

  auto score = [&](const std::vector<Item>& items, std::uint64_t key) {
    std::vector<Feature> feats;
    feats.reserve(items.size());
    for (const auto& it : items) feats.push_back(it.feature);
    Rng rng = Rng::derive(seed, key);
    const auto km = kmeans(feats, std::min(cfg.k, feats.size()), cfg.max_iters, cfg.tol, rng);
    std::vector<double> s(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) s[i] = difficulty(items[i].feature, km.centroids);
    return s;
  };

  std::map<std::int64_t, double> pool_score;
  if (!pool.empty()) {
    const auto s = score(pool, 0x9001u);
    for (std::size_t i = 0; i < pool.size(); ++i) pool_score[pool[i].id] = s[i];
  }

  for (const auto& [region, items] : regions) {
    if (items.empty()) continue;
    RegionStats st;
    st.region = region;
    st.n = items.size();
    st.global_pool = items.size() < cfg.k;
    std::vector<double> s;
    if (st.global_pool) {
      for (const auto& it : items) s.push_back(pool_score.at(it.id));
    } else {
      s = score(items, region_key(region));
    }
    const auto keep = hardest(items, s, keep_count(items.size(), cfg.keep_frac));
    std::vector<bool> kept(items.size(), false);
    for (std::size_t i : keep) kept[i] = true;
    st.kept = keep.size();
    st.min_kept_difficulty = std::numeric_limits<double>::infinity();
    st.max_dropped_difficulty = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.difficulty[items[i].id] = s[i];
      if (kept[i]) {
        out.kept.push_back(items[i].id);
        st.min_kept_difficulty = std::min(st.min_kept_difficulty, s[i]);
      } else {
        st.max_dropped_difficulty = std::max(st.max_dropped_difficulty, s[i]);
      }
    }
    out.regions.push_back(st);
  }
  std::sort(out.kept.begin(), out.kept.end());
  return out;
}

Feature set_feature(const data::ImageSet& set) {
  for (const auto& img : set.images) {
    if (img.meta.source == data::SourceId::S2like) return feature_of(img);
  }
  throw std::invalid_argument("set of location " + std::to_string(set.location_id) + " has no S2like image");
}

}  // namespace a2mae::pruning
