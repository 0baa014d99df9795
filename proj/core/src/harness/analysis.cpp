#include "ocda/harness/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "ocda/error.hpp"

namespace ocda::harness {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: columns differ in length");
  if (x.size() < 3) throw DataError("spearman: need at least 3 rows");
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("spearman: non-finite value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericError("spearman: non-finite value");
  }
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericError("spearman: a constant column leaves the correlation undefined");
  }
  return sxy / std::sqrt(sxx * syy);
}

double knn_domain_probe(const Tensor& features, std::span<const int> tags, std::size_t k) {
  if (features.rank() != 2) throw ShapeError("knn_domain_probe: expected (N, d) features");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (tags.size() != n) throw DataError("knn_domain_probe: one tag per feature row is required");
  if (k < 1) throw ConfigError("knn_domain_probe: k must be at least 1");
  if (k >= n) {
    throw ConfigError("knn_domain_probe: k = " + std::to_string(k) + " needs more than " +
                      std::to_string(n) + " points");
  }
  if (std::set<int>(tags.begin(), tags.end()).size() < 2) {
    throw DataError("knn_domain_probe: at least two domains must be present");
  }
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) norms[i] += static_cast<double>(features[i * d + j]) * features[i * d + j];
  }
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == i) continue;
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(features[i * d + j]) - features[o * d + j];
        sq += diff * diff;
      }
      dist[m++] = {sq, o};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    std::size_t same = 0;
    for (std::size_t t = 0; t < k; ++t) same += tags[dist[t].second] == tags[i];
    total += static_cast<double>(same) / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

Pca pca(const Tensor& x, std::size_t n_components) {
  if (x.rank() != 2 || x.dim(0) < 2) throw DataError("pca: need an (N >= 2, d) matrix");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (n_components < 1 || n_components > d) {
    throw ConfigError("pca: n_components must lie in [1, " + std::to_string(d) + "]");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[i * d + j];
  }
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

  Pca out;
  out.n_components = n_components;
  out.mean.assign(mean.data(), mean.data() + d);
  // Eigen sorts ascending.
  for (std::size_t c = 0; c < n_components; ++c) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index peak = 0;
    v.cwiseAbs().maxCoeff(&peak);
    if (v(peak) < 0) v = -v;
    out.components.insert(out.components.end(), v.data(), v.data() + d);
    out.variances.push_back(std::max(0.0, eig.eigenvalues()(col)));
  }
  out.projection.resize(n * n_components);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n_components; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * out.components[c * d + j];
      }
      out.projection[i * n_components + c] = s;
    }
  }
  return out;
}

}  // namespace ocda::harness
