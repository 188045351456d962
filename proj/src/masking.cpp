#include "a2mae/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace a2mae::masking {
namespace {

void check_common(std::size_t n_patches, double ratio) {
  if (n_patches < 4) {
    throw std::invalid_argument("mask plan needs n_patches >= 4, got " + std::to_string(n_patches));
  }
  if (!(ratio > 0.0 && ratio < 1.0)) {
    std::ostringstream os;
    os << "mask ratio must lie in (0, 1), got " << ratio;
    throw std::invalid_argument(os.str());
  }
  if (masked_count(n_patches, ratio) < 1) {
    throw std::invalid_argument("floor(ratio * n_patches) must be at least 1");
  }
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& sorted, std::size_t n) {
  std::vector<std::size_t> out;
  out.reserve(n - sorted.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (k < sorted.size() && sorted[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> sorted_sample(const std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
  auto s = rng.sample(pool, k);
  std::sort(s.begin(), s.end());
  return s;
}

void set_masked(MaskPlan& plan, std::size_t j, std::vector<std::size_t> masked) {
  plan.visible[j] = complement(masked, plan.n_patches);
  plan.masked[j] = std::move(masked);
}

MaskPlan empty_plan(const Metas& metas, std::size_t anchor, std::size_t n_patches, double ratio) {
  MaskPlan plan;
  plan.n_patches = n_patches;
  plan.ratio = ratio;
  plan.anchor_index = anchor;
  for (std::size_t j = 0; j < 3; ++j) {
    if (j != anchor) plan.relations[j] = relation(metas[anchor], metas[j]);
  }
  return plan;
}

}  // namespace

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::Consistent: return "Consistent";
    case Relation::MutuallyExclusive: return "MutuallyExclusive";
    case Relation::Random: return "Random";
  }
  return "unknown";
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::AnchorAware: return "aam";
    case Strategy::Tube: return "tube";
    case Strategy::Random: return "random";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::AnchorAware, Strategy::Tube, Strategy::Random}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown mask strategy '" + std::string(name) + "' (expected aam, tube or random)");
}

Relation relation(const data::ImageMeta& a, const data::ImageMeta& b) {
  const bool same_source = a.source == b.source;
  const bool same_time = a.time == b.time;
  if (same_source && same_time) {
    throw std::invalid_argument("relation: images share both source and time (duplicate image)");
  }
  if (same_time) return Relation::Consistent;
  if (same_source) return Relation::MutuallyExclusive;
  return Relation::Random;
}

std::size_t choose_anchor(const Metas& metas, Rng& rng) {
  std::array<int, 3> score{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j && relation(metas[i], metas[j]) != Relation::Random) ++score[i];
    }
  }
  const int best = *std::max_element(score.begin(), score.end());
  std::vector<std::size_t> winners;
  for (std::size_t i = 0; i < 3; ++i) {
    if (score[i] == best) winners.push_back(i);
  }
  return winners[rng.uniform_index(winners.size())];
}

BandSelection select_bands(const data::TrainingInput& input, Rng& rng) {
  BandSelection sel;
  for (std::size_t j = 0; j < 3; ++j) {
    const std::size_t n = input.images[j].channels;
    if (n < 3) {
      throw std::invalid_argument("select_bands: image " + std::to_string(j) + " has only " + std::to_string(n) +
                                  " bands (need 3)");
    }
    auto pick = rng.sample(iota(n), 3);
    std::sort(pick.begin(), pick.end());
    std::copy(pick.begin(), pick.end(), sel.bands[j].begin());
  }
  return sel;
}

std::size_t masked_count(std::size_t n_patches, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_patches) + 1e-9));
}

MaskPlan plan_masks(const Metas& metas, std::size_t anchor, std::size_t n_patches, double ratio, Rng& rng) {
  check_common(n_patches, ratio);
  if (anchor > 2) throw std::invalid_argument("anchor index must be 0, 1 or 2");
  MaskPlan plan = empty_plan(metas, anchor, n_patches, ratio);
  const std::size_t m = masked_count(n_patches, ratio);

  const bool any_exclusive = std::any_of(plan.relations.begin(), plan.relations.end(), [](const auto& r) {
    return r == Relation::MutuallyExclusive;
  });
  if (any_exclusive && (ratio < 0.5 || 2 * m < n_patches)) {
    std::ostringstream os;
    os << "mutually-exclusive masking needs ratio >= 0.5 and masked >= visible (ratio " << ratio << ", " << m
       << " of " << n_patches << " masked)";
    throw std::invalid_argument(os.str());
  }

  set_masked(plan, anchor, sorted_sample(iota(n_patches), m, rng));
  for (std::size_t j = 0; j < 3; ++j) {
    if (j == anchor) continue;
    switch (*plan.relations[j]) {
      case Relation::Consistent:
        set_masked(plan, j, plan.masked[anchor]);
        break;
      case Relation::MutuallyExclusive: {
        auto visible = sorted_sample(plan.masked[anchor], n_patches - m, rng);
        set_masked(plan, j, complement(visible, n_patches));
        break;
      }
      case Relation::Random:
        set_masked(plan, j, sorted_sample(iota(n_patches), m, rng));
        break;
    }
  }
  return plan;
}

MaskPlan tube_mask(const Metas& metas, std::size_t n_patches, double ratio, Rng& rng) {
  check_common(n_patches, ratio);
  MaskPlan plan = empty_plan(metas, 0, n_patches, ratio);
  auto masked = sorted_sample(iota(n_patches), masked_count(n_patches, ratio), rng);
  for (std::size_t j = 0; j < 3; ++j) set_masked(plan, j, masked);
  return plan;
}

MaskPlan random_mask(const Metas& metas, std::size_t n_patches, double ratio, Rng& rng) {
  check_common(n_patches, ratio);
  MaskPlan plan = empty_plan(metas, 0, n_patches, ratio);
  const std::size_t m = masked_count(n_patches, ratio);
  for (std::size_t j = 0; j < 3; ++j) set_masked(plan, j, sorted_sample(iota(n_patches), m, rng));
  return plan;
}

MaskPlan make_plan(Strategy strategy, const Metas& metas, std::size_t anchor, std::size_t n_patches, double ratio,
                   Rng& rng) {
  switch (strategy) {
    case Strategy::AnchorAware: return plan_masks(metas, anchor, n_patches, ratio, rng);
    case Strategy::Tube: return tube_mask(metas, n_patches, ratio, rng);
    case Strategy::Random: return random_mask(metas, n_patches, ratio, rng);
  }
  throw std::invalid_argument("unknown mask strategy");
}

}  // namespace a2mae::masking
