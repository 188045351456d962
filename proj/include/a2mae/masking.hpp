#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "a2mae/imageset.hpp"
#include "a2mae/rng.hpp"

namespace a2mae::masking {

enum class Relation { Consistent, MutuallyExclusive, Random };
enum class Strategy { AnchorAware, Tube, Random };

std::string_view to_string(Relation r);
std::string_view to_string(Strategy s);  // "aam", "tube", "random"
Strategy parse_strategy(std::string_view name);

using Metas = std::array<data::ImageMeta, 3>;

struct MaskPlan {
  std::size_t n_patches = 0;
  double ratio = 0.0;
  std::size_t anchor_index = 0;
  std::array<std::vector<std::size_t>, 3> masked;   // sorted
  std::array<std::vector<std::size_t>, 3> visible;  // sorted complement of masked
  std::array<std::optional<Relation>, 3> relations; // empty for the anchor
};

// Three distinct band indices per image.
struct BandSelection {
  std::array<std::array<std::size_t, 3>, 3> bands{};
};

// Same time, different source -> Consistent; same source, different time ->
// MutuallyExclusive; both differ -> Random.
Relation relation(const data::ImageMeta& a, const data::ImageMeta& b);

// Uniform among the images with the most non-Random relations.
std::size_t choose_anchor(const Metas& metas, Rng& rng);

BandSelection select_bands(const data::TrainingInput& input, Rng& rng);

// floor(ratio * n), guarded against representation error in the product.
std::size_t masked_count(std::size_t n_patches, double ratio);

MaskPlan plan_masks(const Metas& metas, std::size_t anchor, std::size_t n_patches, double ratio, Rng& rng);
MaskPlan tube_mask(const Metas& metas, std::size_t n_patches, double ratio, Rng& rng);
MaskPlan random_mask(const Metas& metas, std::size_t n_patches, double ratio, Rng& rng);

// Dispatch by strategy; the anchor is only used by AnchorAware.
MaskPlan make_plan(Strategy strategy, const Metas& metas, std::size_t anchor, std::size_t n_patches, double ratio,
                   Rng& rng);

}  // namespace a2mae::masking
