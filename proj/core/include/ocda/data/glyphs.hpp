#pragma once

#include <cstddef>
#include <cstdint>

#include "ocda/data/split.hpp"

namespace ocda::data {

// Procedurally rendered handwriting-like digits 0-9: stroke templates under a
// random affine warp, point jitter and stroke width. Single channel, white on
// black, classes balanced to within one example.
LabeledSplit render_digits(std::size_t count, std::uint64_t seed, std::size_t size = 28);

}  // namespace ocda::data
