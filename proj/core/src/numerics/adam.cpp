#include "ocda/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "ocda/error.hpp"

namespace ocda::numerics {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i]->shape();
    if (grads[i].shape() != s || state.first_moment[i].shape() != s) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape " +
                       to_string(s) + ", gradient " + to_string(grads[i].shape()) +
                       ", moment " + to_string(state.first_moment[i].shape()));
    }
  }

  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(h.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(h.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<float> p = params[i]->data();
    std::span<const float> g = grads[i].data();
    std::span<float> m = state.first_moment[i].data();
    std::span<float> v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0f - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0f - h.beta2) * g[j] * g[j];
      const float mhat = m[j] / c1;
      const float vhat = v[j] / c2;
      p[j] -= h.lr * mhat / (std::sqrt(vhat) + h.epsilon);
    }
  }
}

}  // namespace ocda::numerics
