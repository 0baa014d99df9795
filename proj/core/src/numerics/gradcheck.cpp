#include "ocda/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ocda/error.hpp"

namespace ocda::numerics {

double finite_difference_check(const Graph& graph, Var output,
                               std::span<const Var> wrt, double step) {
  if (!(step > 0.0)) throw Error("finite_difference_check: step must be positive");
  if (!graph.owns(output) || output.value().numel() != 1) {
    throw ShapeError("finite_difference_check: output must be a scalar of this record");
  }
  const std::vector<Tensor> analytic = gradients(graph, output, wrt);

  double worst = 0.0;
  for (std::size_t w = 0; w < wrt.size(); ++w) {
    const Tensor& base = wrt[w].value();
    std::vector<double> point(base.data().begin(), base.data().end());
    std::vector<std::pair<Var, std::vector<double>>> binding{{wrt[w], point}};
    std::vector<double>& probe = binding.front().second;
    for (std::size_t j = 0; j < point.size(); ++j) {
      probe[j] = point[j] + step;
      const double up = evaluate_double(graph, output, binding).front();
      probe[j] = point[j] - step;
      const double down = evaluate_double(graph, output, binding).front();
      probe[j] = point[j];
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[w][j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace ocda::numerics
