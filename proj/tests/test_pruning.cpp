#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "a2mae/pruning.hpp"

using namespace a2mae;
using namespace a2mae::pruning;

namespace {

double sq(const Feature& a, const Feature& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<Feature> random_points(Rng& rng, std::size_t n, std::size_t dim, double spread = 1.0) {
  std::vector<Feature> out(n, Feature(dim));
  for (auto& p : out) {
    for (auto& v : p) v = rng.normal(0.0, spread);
  }
  return out;
}

std::vector<Item> random_items(Rng& rng, std::int64_t first_id, std::size_t n, std::size_t dim) {
  std::vector<Item> out;
  const auto pts = random_points(rng, n, dim);
  for (std::size_t i = 0; i < n; ++i) out.push_back({first_id + static_cast<std::int64_t>(i), pts[i]});
  return out;
}

// Kept ids of one region: sort by difficulty descending, then id ascending.
std::vector<std::int64_t> sort_oracle(const std::vector<Item>& items, const std::map<std::int64_t, double>& score,
                                      std::size_t keep) {
  std::vector<std::int64_t> ids;
  for (const auto& it : items) ids.push_back(it.id);
  std::sort(ids.begin(), ids.end(), [&](auto a, auto b) {
    if (score.at(a) != score.at(b)) return score.at(a) > score.at(b);
    return a < b;
  });
  ids.resize(keep);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

TEST_CASE("partition_regions") {
  CHECK(region_of(0.5, 0.5, 1.0) == RegionId{0, 0});
  CHECK(region_of(0.9, 0.1, 1.0) == RegionId{0, 0});
  CHECK(region_of(1.5, 0.5, 1.0) != region_of(0.5, 0.5, 1.0));
  CHECK(region_of(-0.5, -179.5, 1.0) == RegionId{-1, -180});
  CHECK(region_of(30.2, 120.7, 0.5) == RegionId{60, 241});

  Rng rng(1);
  std::vector<LocationPoint> locs;
  for (std::int64_t i = 0; i < 400; ++i) locs.push_back({i, rng.uniform(-90.0, 90.0), rng.uniform(-180.0, 180.0)});
  const auto once = partition_regions(locs, 1.0);
  CHECK(once.size() == locs.size());
  CHECK(partition_regions(locs, 1.0) == once);
  for (const auto& l : locs) {
    const auto r = once.at(l.id);
    CHECK(static_cast<double>(r.first) <= l.lat_deg);
    CHECK(l.lat_deg < static_cast<double>(r.first) + 1.0);
    CHECK(static_cast<double>(r.second) <= l.lon_deg);
    CHECK(l.lon_deg < static_cast<double>(r.second) + 1.0);
  }
  // A 360 degree cell holds every location of one sign quadrant; floor
  // division splits the globe at the equator and the prime meridian.
  std::vector<LocationPoint> north_east;
  for (std::int64_t i = 0; i < 200; ++i) north_east.push_back({i, rng.uniform(0.0, 90.0), rng.uniform(0.0, 180.0)});
  const auto one = partition_regions(north_east, 360.0);
  for (const auto& l : north_east) CHECK(one.at(l.id) == RegionId{0, 0});
  std::set<RegionId> quadrants;
  for (const auto& [id, r] : partition_regions(locs, 360.0)) quadrants.insert(r);
  CHECK(quadrants == std::set<RegionId>{{-1, -1}, {-1, 0}, {0, -1}, {0, 0}});

  CHECK_THROWS_AS(region_of(91.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(region_of(0.0, -181.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(region_of(std::nan(""), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(region_of(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("feature_of") {
  data::Image flat(data::ImageMeta{}, 5, 4, 3);
  std::fill(flat.pixels.begin(), flat.pixels.end(), 0.7);
  const auto ff = feature_of(flat);
  REQUIRE(ff.size() == 6);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(ff[c] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(ff[3 + c] < 1e-14);
  }

  Rng rng(2);
  data::Image img(data::ImageMeta{}, 6, 7, 4);
  for (auto& v : img.pixels) v = rng.normal(0.2, 1.5);
  const auto f = feature_of(img);
  REQUIRE(f.size() == 8);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0, s = 0;
    for (std::size_t y = 0; y < 6; ++y) {
      for (std::size_t x = 0; x < 7; ++x) m += img.at(c, y, x) / 42.0;
    }
    for (std::size_t y = 0; y < 6; ++y) {
      for (std::size_t x = 0; x < 7; ++x) s += (img.at(c, y, x) - m) * (img.at(c, y, x) - m) / 42.0;
    }
    CHECK(f[c] == doctest::Approx(m).epsilon(1e-12));
    CHECK(f[4 + c] == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
  }

  std::vector<std::size_t> perm(42);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  auto shuffled = img;
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < 42; ++i) shuffled.pixels[c * 42 + i] = img.pixels[c * 42 + perm[i]];
  }
  const auto g = feature_of(shuffled);
  for (std::size_t i = 0; i < 8; ++i) CHECK(g[i] == doctest::Approx(f[i]).epsilon(1e-12));

  data::GeneratorConfig gc;
  gc.common_size = 16;
  gc.field_size = 16;
  const data::Generator gen(gc);
  const auto a = data::assemble_set(3, data::SetKind::S2L8Reserve, gen);
  const auto b = data::assemble_set(3, data::SetKind::S2L8Reserve, gen);
  CHECK(set_feature(a) == set_feature(b));
  CHECK(set_feature(a).size() == 24);
}

TEST_CASE("kmeans closed forms") {
  Rng rng(3);
  const auto pts = random_points(rng, 30, 3);
  Rng r1(1);
  const auto one = kmeans(pts, 1, 50, 0.0, r1);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0;
    for (const auto& p : pts) m += p[j] / 30.0;
    CHECK(one.centroids[0][j] == doctest::Approx(m).epsilon(1e-12));
  }

  Rng r2(2);
  const auto all = kmeans(pts, 30, 50, 0.0, r2);
  CHECK(all.objective_history.front() == 0.0);
  std::vector<std::size_t> sorted = all.assignments;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

  Rng r3(3);
  CHECK_THROWS_AS(kmeans(pts, 31, 10, 0.0, r3), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(pts, 0, 10, 0.0, r3), std::invalid_argument);
}

TEST_CASE("kmeans separates distant clouds like a brute-force optimum") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng.uniform_index(7);
    std::vector<Feature> pts;
    std::vector<int> truth;
    for (std::size_t i = 0; i < n; ++i) {
      const int side = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.uniform_index(2));
      pts.push_back({rng.normal(side * 100.0, 1.0), rng.normal(0.0, 1.0)});
      truth.push_back(side);
    }
    // Exhaustive optimum over all two-way splits.
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_mask = 0;
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
      double cost = 0;
      for (int side = 0; side < 2; ++side) {
        Feature c(2, 0.0);
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
            c[0] += pts[i][0];
            c[1] += pts[i][1];
            ++cnt;
          }
        }
        for (auto& v : c) v /= static_cast<double>(cnt);
        for (std::size_t i = 0; i < n; ++i) {
          if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) cost += sq(pts[i], c);
        }
      }
      if (cost < best) {
        best = cost;
        best_mask = mask;
      }
    }
    Rng km(static_cast<std::uint64_t>(trial));
    const auto r = kmeans(pts, 2, 100, 1e-12, km);
    for (std::size_t i = 0; i < n; ++i) {
      const bool same_truth = truth[i] == truth[0];
      CHECK((r.assignments[i] == r.assignments[0]) == same_truth);
      CHECK((((best_mask >> i) & 1u) == (best_mask & 1u)) == same_truth);
    }
    CHECK(r.objective_history.back() == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("kmeans objective never increases") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(80);
    const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(n, 12));
    auto pts = random_points(rng, n, 1 + rng.uniform_index(6));
    if (trial % 5 == 0) pts[1] = pts[0];
    Rng km(static_cast<std::uint64_t>(trial));
    const auto r = kmeans(pts, k, 100, 1e-9, km);
    REQUIRE(r.objective_history.size() == r.iterations);
    CHECK(r.iterations <= 100);
    CHECK(r.centroids.size() == k);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      CHECK(r.objective_history[i] <= r.objective_history[i - 1] * (1 + 1e-12) + 1e-12);
    }
    Rng again(static_cast<std::uint64_t>(trial));
    CHECK(kmeans(pts, k, 100, 1e-9, again).assignments == r.assignments);
  }
}

TEST_CASE("difficulty") {
  const std::vector<Feature> origin{{0.0, 0.0}};
  CHECK(difficulty({3.0, 4.0}, origin) == 5.0);
  const std::vector<Feature> cs{{1.0, 2.0}, {-3.0, 0.5}};
  CHECK(difficulty({-3.0, 0.5}, cs) == 0.0);

  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + rng.uniform_index(8);
    const auto centroids = random_points(rng, 1 + rng.uniform_index(20), dim);
    const auto f = random_points(rng, 1, dim)[0];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centroids) best = std::min(best, std::sqrt(sq(f, c)));
    CHECK(difficulty(f, centroids) == doctest::Approx(best).epsilon(1e-14));
    CHECK(difficulty(f, centroids) >= 0.0);
  }
  CHECK_THROWS_AS(difficulty({1.0}, cs), std::invalid_argument);
  CHECK_THROWS_AS(difficulty({1.0, 2.0}, {}), std::invalid_argument);
}

TEST_CASE("keep_count is a guarded ceiling") {
  CHECK(keep_count(100, 0.10) == 10);
  CHECK(keep_count(101, 0.10) == 11);
  CHECK(keep_count(7, 1.0) == 7);
  CHECK(keep_count(3, 0.10) == 1);
  CHECK(keep_count(0, 0.5) == 0);
  for (std::size_t n = 1; n <= 300; ++n) {
    for (std::size_t pct = 1; pct <= 100; ++pct) CHECK(keep_count(n, pct / 100.0) == (n * pct + 99) / 100);
  }
}

TEST_CASE("prune") {
  PruningConfig cfg;
  Rng rng(7);

  SUBCASE("keep everything") {
    cfg.keep_frac = 1.0;
    std::map<RegionId, std::vector<Item>> in{{{0, 0}, random_items(rng, 0, 40, 4)}, {{1, 2}, random_items(rng, 40, 5, 4)}};
    const auto r = prune(in, cfg, 1);
    CHECK(r.kept.size() == 45);
  }

  SUBCASE("region of 100 keeps the 10 hardest") {
    const auto items = random_items(rng, 1000, 100, 6);
    const auto r = prune({{{3, 4}, items}}, cfg, 2);
    REQUIRE(r.kept.size() == 10);
    REQUIRE(r.regions.size() == 1);
    CHECK(r.regions[0].kept == 10);
    CHECK_FALSE(r.regions[0].global_pool);
    CHECK(r.regions[0].min_kept_difficulty >= r.regions[0].max_dropped_difficulty);
    CHECK(r.kept == sort_oracle(items, r.difficulty, 10));
    double min_kept = std::numeric_limits<double>::infinity(), max_dropped = 0;
    for (const auto& it : items) {
      const double d = r.difficulty.at(it.id);
      if (std::binary_search(r.kept.begin(), r.kept.end(), it.id)) {
        min_kept = std::min(min_kept, d);
      } else {
        max_dropped = std::max(max_dropped, d);
      }
    }
    CHECK(min_kept >= max_dropped);
  }

  SUBCASE("ties go to the smaller id") {
    std::vector<Item> items;
    for (std::int64_t i = 0; i < 40; ++i) items.push_back({100 - i, {static_cast<double>(i % 2), 0.0}});
    cfg.k = 2;
    const auto r = prune({{{0, 0}, items}}, cfg, 3);
    for (const auto& [id, d] : r.difficulty) CHECK(d == 0.0);
    CHECK(r.kept == std::vector<std::int64_t>{61, 62, 63, 64});
  }

  SUBCASE("regions prune independently") {
    std::map<RegionId, std::vector<Item>> in;
    std::int64_t next = 0;
    for (int r = 0; r < 5; ++r) {
      const std::size_t n = 20 + rng.uniform_index(60);
      in[{r, -r}] = random_items(rng, next, n, 5);
      next += static_cast<std::int64_t>(n);
    }
    const auto whole = prune(in, cfg, 11);
    std::vector<std::int64_t> united;
    for (const auto& [region, items] : in) {
      const auto part = prune({{region, items}}, cfg, 11);
      CHECK(part.kept.size() == keep_count(items.size(), cfg.keep_frac));
      CHECK(part.kept == sort_oracle(items, part.difficulty, part.kept.size()));
      united.insert(united.end(), part.kept.begin(), part.kept.end());
    }
    std::sort(united.begin(), united.end());
    CHECK(united == whole.kept);
    CHECK(prune(in, cfg, 11).kept == whole.kept);
  }

  SUBCASE("undersized regions share a pool") {
    std::map<RegionId, std::vector<Item>> in;
    in[{0, 0}] = random_items(rng, 0, 8, 3);
    in[{0, 1}] = random_items(rng, 8, 9, 3);
    in[{5, 5}] = random_items(rng, 17, 30, 3);
    cfg.k = 10;
    const auto r = prune(in, cfg, 4);
    for (const auto& st : r.regions) {
      CHECK(st.global_pool == (st.n < 10));
      CHECK(st.kept == keep_count(st.n, cfg.keep_frac));
    }
    CHECK(r.kept.size() == 1 + 1 + 3);
    CHECK(r.difficulty.size() == 47);
  }

  SUBCASE("random region sizes keep exact counts and dominate") {
    for (int trial = 0; trial < 30; ++trial) {
      std::map<RegionId, std::vector<Item>> in;
      std::int64_t next = 0;
      const std::size_t n_regions = 1 + rng.uniform_index(6);
      for (std::size_t r = 0; r < n_regions; ++r) {
        const std::size_t n = 1 + rng.uniform_index(60);
        in[{static_cast<std::int64_t>(r), 0}] = random_items(rng, next, n, 4);
        next += static_cast<std::int64_t>(n);
      }
      cfg.k = 1 + rng.uniform_index(20);
      cfg.keep_frac = (1 + rng.uniform_index(100)) / 100.0;
      const auto res = prune(in, cfg, static_cast<std::uint64_t>(trial));
      std::size_t total = 0;
      for (const auto& [region, items] : in) {
        const auto want = keep_count(items.size(), cfg.keep_frac);
        total += want;
        std::vector<std::int64_t> kept;
        for (const auto& it : items) {
          if (std::binary_search(res.kept.begin(), res.kept.end(), it.id)) kept.push_back(it.id);
        }
        CHECK(kept == sort_oracle(items, res.difficulty, want));
      }
      CHECK(res.kept.size() == total);
    }
  }

  SUBCASE("empty input and bad config") {
    CHECK(prune({}, cfg, 1).kept.empty());
    CHECK(prune({{{0, 0}, {}}}, cfg, 1).kept.empty());
    cfg.keep_frac = 0.0;
    CHECK_THROWS_AS(prune({}, cfg, 1), std::invalid_argument);
    cfg.keep_frac = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.keep_frac = 0.1;
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}
