#include "ocda/numerics/nn.hpp"

#include <string>

#include "ocda/error.hpp"

namespace ocda::numerics {

Var scale(Var x, float factor) {
  return mul(x, x.graph()->constant(Tensor::scalar(factor)));
}

Var shift(Var x, float offset) {
  return add(x, x.graph()->constant(Tensor::scalar(offset)));
}

Var negate(Var x) { return sub(x.graph()->constant(Tensor::scalar(0.0f)), x); }

Var abs_value(Var x) { return add(relu(x), relu(negate(x))); }

Var linear(Var x, Var w, Var b) { return add(matmul(x, w), b); }

Var sigmoid_like(Var x) { return shift(scale(tanh(x), 0.499f), 0.5f); }

Var soft_cap(Var x, float cap) { return scale(tanh(scale(x, 1.0f / cap)), cap); }

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor out(Shape{labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw Error("one_hot: label " + std::to_string(labels[i]) +
                  " outside [0, " + std::to_string(classes) + ")");
    }
    out[i * classes + static_cast<std::size_t>(labels[i])] = 1.0f;
  }
  return out;
}

Var mean_cross_entropy(Var logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size()) {
    throw ShapeError("mean_cross_entropy: logits " + to_string(s) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  Var targets = logits.graph()->constant(one_hot(labels, s[1]));
  return mean(cross_entropy_with_logits(logits, targets));
}

Var binary_cross_entropy(Var logits, int label) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] != 1) {
    throw ShapeError("binary_cross_entropy: expects (B, 1) logits, got " + to_string(s));
  }
  if (label != 0 && label != 1) throw Error("binary_cross_entropy: label must be 0 or 1");
  Graph& g = *logits.graph();
  Var pair = concat({g.constant(Tensor::zeros({s[0], 1})), logits}, 1);
  Tensor targets(Shape{s[0], 2});
  for (std::size_t i = 0; i < s[0]; ++i) targets[i * 2 + static_cast<std::size_t>(label)] = 1.0f;
  return cross_entropy_with_logits(pair, g.constant(std::move(targets)));
}

}  // namespace ocda::numerics
