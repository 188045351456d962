#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "a2mae/masking.hpp"
#include "plan_oracle.hpp"

using namespace a2mae;
using namespace a2mae::masking;
using a2mae::testing::oracle_relation;
using a2mae::testing::plan_violations;
using a2mae::testing::random_metas;

namespace {

data::ImageMeta meta(data::SourceId s, int t) {
  data::ImageMeta m;
  m.source = s;
  m.time = t;
  return m;
}

const auto S2 = data::SourceId::S2like;
const auto L8 = data::SourceId::L8like;

}  // namespace

TEST_CASE("relation") {
  CHECK(relation(meta(S2, 2020), meta(L8, 2020)) == Relation::Consistent);
  CHECK(relation(meta(S2, 2020), meta(S2, 2022)) == Relation::MutuallyExclusive);
  CHECK(relation(meta(L8, 2020), meta(S2, 2022)) == Relation::Random);
  CHECK_THROWS_AS(relation(meta(S2, 2020), meta(S2, 2020)), std::invalid_argument);

  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_metas(rng);
    CHECK(relation(m[0], m[1]) == oracle_relation(m[0], m[1]));
    CHECK(relation(m[1], m[0]) == relation(m[0], m[1]));
  }
}

TEST_CASE("choose_anchor") {
  const Metas ex{meta(S2, 2020), meta(L8, 2020), meta(S2, 2022)};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(choose_anchor(ex, rng) == 0);

  SUBCASE("some pair is always non-random on 2 sources x 3 times") {
    std::vector<data::ImageMeta> pool;
    for (auto s : {S2, L8}) {
      for (int t : {2021, 2022, 2023}) pool.push_back(meta(s, t));
    }
    int triples = 0;
    for (std::size_t a = 0; a < pool.size(); ++a) {
      for (std::size_t b = a + 1; b < pool.size(); ++b) {
        for (std::size_t c = b + 1; c < pool.size(); ++c) {
          if (!data::satisfies_input_constraint(pool[a], pool[b], pool[c])) continue;
          ++triples;
          const bool any = oracle_relation(pool[a], pool[b]) != Relation::Random ||
                           oracle_relation(pool[a], pool[c]) != Relation::Random ||
                           oracle_relation(pool[b], pool[c]) != Relation::Random;
          CHECK(any);
        }
      }
    }
    CHECK(triples == 18);
  }

  SUBCASE("maximizes non-random relations, uniform over ties") {
    const Metas tie{meta(S2, 2020), meta(L8, 2020), meta(data::SourceId::GF1like, 2020)};
    std::map<std::size_t, int> counts;
    for (int i = 0; i < 3000; ++i) ++counts[choose_anchor(tie, rng)];
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(counts[k] - 1000) < 120);

    for (int i = 0; i < 500; ++i) {
      const auto m = random_metas(rng);
      const auto a = choose_anchor(m, rng);
      std::array<int, 3> score{};
      for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t y = 0; y < 3; ++y) {
          if (x != y && oracle_relation(m[x], m[y]) != Relation::Random) ++score[x];
        }
      }
      CHECK(score[a] == *std::max_element(score.begin(), score.end()));
    }
  }

  Rng r1(9), r2(9);
  for (int i = 0; i < 20; ++i) CHECK(choose_anchor(ex, r1) == choose_anchor(ex, r2));
}

TEST_CASE("select_bands") {
  data::TrainingInput in;
  const std::array<data::SourceId, 3> srcs{data::SourceId::GF1like, S2, L8};
  for (std::size_t j = 0; j < 3; ++j) {
    in.images[j] = data::Image(meta(srcs[j], 2020 + static_cast<int>(j)), 1, 1, data::source_spec(srcs[j]).n_bands());
  }
  Rng rng(5);
  std::map<std::array<std::size_t, 3>, int> subsets;
  for (int i = 0; i < 4000; ++i) {
    const auto sel = select_bands(in, rng);
    ++subsets[sel.bands[0]];
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& b = sel.bands[j];
      CHECK(b[0] < b[1]);
      CHECK(b[1] < b[2]);
      CHECK(b[2] < in.images[j].channels);
    }
  }
  CHECK(subsets.size() == 4);
  for (const auto& [k, c] : subsets) CHECK(std::fabs(c / 4000.0 - 0.25) < 0.03);

  auto three = in;
  three.images[0].channels = 3;
  for (int i = 0; i < 10; ++i) CHECK(select_bands(three, rng).bands[0] == std::array<std::size_t, 3>{0, 1, 2});

  auto two = in;
  two.images[1].channels = 2;
  CHECK_THROWS_AS(select_bands(two, rng), std::invalid_argument);

  Rng a(4), b(4);
  CHECK(select_bands(in, a).bands == select_bands(in, b).bands);
}

TEST_CASE("plan_masks worked example") {
  const Metas ex{meta(S2, 2020), meta(L8, 2020), meta(S2, 2022)};
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto p = plan_masks(ex, 0, 16, 0.75, rng);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(p.masked[j].size() == 12);
      CHECK(p.visible[j].size() == 4);
    }
    CHECK(p.relations[1] == Relation::Consistent);
    CHECK(p.relations[2] == Relation::MutuallyExclusive);
    CHECK(p.masked[1] == p.masked[0]);
    CHECK(plan_violations(p, ex, 12, true).empty());
  }
}

TEST_CASE("mask counts and invariants on random plans") {
  Rng rng(13);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto metas = random_metas(rng);
    const std::size_t n = 4 + rng.uniform_index(253);
    const std::size_t tenths = 5 + rng.uniform_index(5);
    const double r = static_cast<double>(tenths) / 10.0;
    const auto m = a2mae::testing::floor_tenths(tenths, n);
    CHECK(masked_count(n, r) == m);
    const auto anchor = choose_anchor(metas, rng);
    bool exclusive = false;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j != anchor && oracle_relation(metas[anchor], metas[j]) == Relation::MutuallyExclusive) exclusive = true;
    }
    if (exclusive && 2 * m < n) {
      // Fewer masked than visible patches: disjoint visibility is impossible.
      CHECK_THROWS_AS(plan_masks(metas, anchor, n, r, rng), std::invalid_argument);
      continue;
    }
    const auto p = plan_masks(metas, anchor, n, r, rng);
    CHECK(p.anchor_index == anchor);
    const auto v = plan_violations(p, metas, m, true);
    CHECK_MESSAGE(v.empty(), (v.empty() ? "" : v.front()));
    CHECK(plan_violations(tube_mask(metas, n, r, rng), metas, m, false).empty());
    CHECK(plan_violations(random_mask(metas, n, r, rng), metas, m, false).empty());
  }
}

TEST_CASE("precondition errors") {
  const Metas ex{meta(S2, 2020), meta(L8, 2020), meta(S2, 2022)};
  const Metas no_ex{meta(S2, 2020), meta(L8, 2020), meta(L8, 2022)};
  Rng rng(3);
  CHECK_THROWS_AS(plan_masks(ex, 0, 16, 0.4, rng), std::invalid_argument);
  CHECK_NOTHROW(plan_masks(no_ex, 0, 16, 0.4, rng));
  CHECK_THROWS_AS(plan_masks(ex, 0, 3, 0.75, rng), std::invalid_argument);
  CHECK_THROWS_AS(plan_masks(ex, 0, 16, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(plan_masks(ex, 0, 16, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(plan_masks(ex, 0, 16, 0.05, rng), std::invalid_argument);
  CHECK_THROWS_AS(plan_masks(ex, 3, 16, 0.75, rng), std::invalid_argument);
  CHECK_NOTHROW(tube_mask(ex, 16, 0.4, rng));
  CHECK_NOTHROW(random_mask(ex, 16, 0.4, rng));
  // r = 0.5 with odd N leaves more visible than masked patches.
  CHECK_THROWS_AS(plan_masks(ex, 0, 5, 0.5, rng), std::invalid_argument);

  try {
    plan_masks(ex, 0, 16, 0.3, rng);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("mutually-exclusive") != std::string::npos);
  }
}

TEST_CASE("anchor marginals are uniform") {
  const Metas ex{meta(S2, 2020), meta(L8, 2020), meta(S2, 2022)};
  Rng rng(17);
  const int trials = 10000;
  std::vector<int> hits(16, 0);
  for (int i = 0; i < trials; ++i) {
    const auto plan = plan_masks(ex, 0, 16, 0.75, rng);
    for (auto k : plan.masked[0]) ++hits[k];
  }
  const double p = 12.0 / 16.0;
  const double sigma = std::sqrt(p * (1 - p) / trials);
  for (int h : hits) CHECK(std::fabs(h / static_cast<double>(trials) - p) < 3 * sigma);
}

TEST_CASE("baselines") {
  const Metas ex{meta(S2, 2020), meta(L8, 2020), meta(S2, 2022)};
  Rng rng(19);

  for (int i = 0; i < 200; ++i) {
    const auto t = tube_mask(ex, 16, 0.75, rng);
    CHECK(t.masked[0] == t.masked[1]);
    CHECK(t.masked[1] == t.masked[2]);
    CHECK(t.masked[0].size() == 12);
    const auto a = plan_masks(ex, 0, 16, 0.75, rng);
    // Tube keeps the exclusive pair's visible sets equal; the anchor-aware plan cannot.
    CHECK(t.visible[2] == t.visible[0]);
    CHECK(a.visible[2] != a.visible[0]);
  }

  double overlap = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const auto p = random_mask(ex, 16, 0.75, rng);
    std::vector<std::size_t> both;
    std::set_intersection(p.masked[0].begin(), p.masked[0].end(), p.masked[1].begin(), p.masked[1].end(),
                          std::back_inserter(both));
    overlap += static_cast<double>(both.size()) / trials;
  }
  CHECK(std::fabs(overlap - 9.0) < 0.2);

  Rng a(8), b(8);
  CHECK(random_mask(ex, 16, 0.75, a).masked == random_mask(ex, 16, 0.75, b).masked);

  CHECK(parse_strategy("aam") == Strategy::AnchorAware);
  CHECK(parse_strategy("tube") == Strategy::Tube);
  CHECK(parse_strategy("random") == Strategy::Random);
  CHECK_THROWS_AS(parse_strategy("block"), std::invalid_argument);
}
