#pragma once

#include <span>

#include "ocda/numerics/graph.hpp"

// Compositions of primitives used by the model definitions.
namespace ocda::numerics {

Var scale(Var x, float factor);
Var shift(Var x, float offset);
Var negate(Var x);
Var abs_value(Var x);  // relu(x) + relu(-x)

// x: (B, in), w: (in, out), b: (out)
Var linear(Var x, Var w, Var b);

// 0.5 + 0.499 * tanh(x): strictly inside (0, 1) even in float32.
Var sigmoid_like(Var x);

// cap * tanh(x / cap): smooth bound on logits.
Var soft_cap(Var x, float cap);

Tensor one_hot(std::span<const int> labels, std::size_t classes);

// Mean cross-entropy of (B, C) logits against integer labels.
Var mean_cross_entropy(Var logits, std::span<const int> labels);

// Per-example binary cross-entropy of (B, 1) logits against a fixed label
// in {0, 1}. Expressed as a two-class softmax over (0, logit).
Var binary_cross_entropy(Var logits, int label);

}  // namespace ocda::numerics
