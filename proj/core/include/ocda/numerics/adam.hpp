#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ocda/numerics/tensor.hpp"

namespace ocda::numerics {

struct AdamHyper {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Moments are created on the first update and must keep their parameter's
// shape afterwards.
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;
};

// Bias-corrected Adam update applied in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state);

}  // namespace ocda::numerics
