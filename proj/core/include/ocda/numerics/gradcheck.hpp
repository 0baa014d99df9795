#pragma once

#include <initializer_list>
#include <span>

#include "ocda/numerics/graph.hpp"

namespace ocda::numerics {

// Compares reverse-mode gradients with central differences computed by a
// double-precision replay of the record. Returns
//   max over wrt entries of |analytic - numeric| / max(1, |analytic|).
double finite_difference_check(const Graph& graph, Var output,
                               std::span<const Var> wrt, double step);

inline double finite_difference_check(const Graph& graph, Var output,
                                      std::initializer_list<Var> wrt, double step) {
  return finite_difference_check(graph, output,
                                 std::span<const Var>(wrt.begin(), wrt.size()), step);
}

}  // namespace ocda::numerics
