#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ocda/numerics/graph.hpp"

namespace ocda::numerics::detail {

template <class T>
struct View {
  const Shape* shape;
  const T* data;
};

// Validates input shapes for a primitive and returns the output shape.
// Throws ShapeError naming the primitive and the offending shapes.
Shape infer_shape(Op op, const OpAttrs& attrs,
                  std::span<const Shape* const> inputs);

template <class T>
void forward(Op op, const OpAttrs& attrs, std::span<const View<T>> inputs,
             const Shape& out_shape, T* out, std::vector<std::uint32_t>* saved,
             std::size_t* degenerate);

// Accumulates input gradients. grads[i] is null when input i does not
// require a gradient.
void backward(Op op, const OpAttrs& attrs, std::span<const View<float>> inputs,
              const Tensor& output, const float* grad_out,
              std::span<float* const> grads,
              const std::vector<std::uint32_t>& saved);

extern template void forward<float>(Op, const OpAttrs&,
                                    std::span<const View<float>>, const Shape&,
                                    float*, std::vector<std::uint32_t>*,
                                    std::size_t*);
extern template void forward<double>(Op, const OpAttrs&,
                                     std::span<const View<double>>,
                                     const Shape&, double*,
                                     std::vector<std::uint32_t>*, std::size_t*);

}  // namespace ocda::numerics::detail
