#pragma once

#include <cstdint>
#include <vector>

#include "ocda/data/split.hpp"
#include "ocda/data/transforms.hpp"

namespace ocda::data {

// Disjoint pools feeding each role of a compound dataset.
struct BasePools {
  LabeledSplit source_train;
  LabeledSplit source_test;
  LabeledSplit compound;
  LabeledSplit open;
};

// Every compound-pool example is assigned one spec by a seeded draw
// (uniform, or proportional to `mixing` when given) and tagged with the spec
// index. Each open spec transforms the whole open pool and tags it with
// specs.size() + j. Source splits stay untransformed.
CompoundDataset synthesize_compound(const BasePools& pools,
                                    const std::vector<DomainTransformSpec>& specs,
                                    const std::vector<DomainTransformSpec>& open_specs,
                                    std::uint64_t seed, const std::vector<double>& mixing = {});

// Single base split used for every role.
CompoundDataset synthesize_compound(const LabeledSplit& base,
                                    const std::vector<DomainTransformSpec>& specs,
                                    const std::vector<DomainTransformSpec>& open_specs,
                                    std::uint64_t seed);

}  // namespace ocda::data
