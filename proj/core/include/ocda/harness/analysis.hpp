#pragma once

#include <span>
#include <vector>

#include "ocda/numerics/tensor.hpp"

namespace ocda::harness {

using numerics::Tensor;

// 1-based ranks; tied values share the average of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. Needs at least 3 pairs; a constant
// column leaves the correlation undefined and raises NumericError.
double spearman(std::span<const double> x, std::span<const double> y);

// Mean over instances of the fraction of their k nearest neighbors
// (Euclidean, self excluded, ties by index) that share their tag.
double knn_domain_probe(const Tensor& features, std::span<const int> tags, std::size_t k);

struct Pca {
  std::vector<double> mean;        // d
  std::vector<double> components;  // row-major (n_components, d), unit rows
  std::vector<double> variances;   // eigenvalues of the covariance, descending
  std::vector<double> projection;  // row-major (n, n_components)
  std::size_t n_components = 0;
};

// Principal components of the rows of `x` from the eigendecomposition of
// the sample covariance. Component signs are fixed so the largest-magnitude
// loading is positive.
Pca pca(const Tensor& x, std::size_t n_components = 2);

}  // namespace ocda::harness
