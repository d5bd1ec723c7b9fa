#include "localembed/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace localembed {

OmegaSet OmegaSet::full(const DenseMatrix& gram) {
  if (gram.rows() != gram.cols()) throw DimensionError("Gram matrix must be square");
  const auto n = static_cast<std::size_t>(gram.rows());
  std::vector<std::vector<Index>> pattern(n, std::vector<Index>(n));
  for (auto& row : pattern) std::iota(row.begin(), row.end(), Index{0});
  return from_pattern(gram, pattern);
}

OmegaSet OmegaSet::from_pattern(const DenseMatrix& gram, const std::vector<std::vector<Index>>& pattern) {
  if (gram.rows() != gram.cols() || static_cast<std::size_t>(gram.rows()) != pattern.size())
    throw DimensionError("pattern does not match Gram matrix size");
  OmegaSet omega;
  omega.n = pattern.size();
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    for (std::size_t p = 0; p < pattern[i].size(); ++p) {
      const Index j = pattern[i][p];
      if (j < 0 || static_cast<std::size_t>(j) >= omega.n) throw DimensionError("pattern index out of range");
      if (p > 0 && j <= pattern[i][p - 1]) throw std::invalid_argument("pattern rows must be strictly increasing");
      omega.indices.push_back(j);
      omega.values.push_back(gram(static_cast<Eigen::Index>(i), j));
    }
    omega.offsets.push_back(omega.indices.size());
  }
  return omega;
}

OmegaSet build_omega(const SparseMatrix& labels, std::size_t n_bar) {
  const std::size_t n = labels.rows();
  if (n == 0) throw std::invalid_argument("build_omega: empty label matrix");
  if (n_bar < 1) throw std::invalid_argument("build_omega: n_bar must be >= 1");
  const std::size_t keep = std::min(n_bar, n);

  // Inverted index: label -> points carrying it.
  const SparseMatrix by_label = labels.transpose();

  OmegaSet omega;
  omega.n = n;
  omega.offsets.reserve(n + 1);
  omega.indices.reserve(n * keep);
  omega.values.reserve(n * keep);

  std::vector<double> acc(n, 0.0);
  std::vector<char> touched_flag(n, 0);
  std::vector<Index> touched;
  std::vector<std::pair<double, Index>> ranked;
  std::vector<Index> row_idx;

  for (std::size_t i = 0; i < n; ++i) {
    touched.clear();
    const auto yi = labels.row(i);
    for (std::size_t p = 0; p < yi.size(); ++p) {
      const auto carriers = by_label.row(static_cast<std::size_t>(yi.indices[p]));
      for (std::size_t q = 0; q < carriers.size(); ++q) {
        const auto j = static_cast<std::size_t>(carriers.indices[q]);
        if (!touched_flag[j]) {
          touched_flag[j] = 1;
          touched.push_back(static_cast<Index>(j));
        }
        acc[j] += yi.values[p] * carriers.values[q];
      }
    }

    // Rank touched candidates; untouched points all have inner product 0.
    ranked.clear();
    for (Index j : touched) ranked.emplace_back(acc[j], j);
    auto better = [](const std::pair<double, Index>& a, const std::pair<double, Index>& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    std::sort(ranked.begin(), ranked.end(), better);

    row_idx.clear();
    std::vector<double> row_val;
    std::size_t pos = 0;
    // Positive inner products first.
    while (row_idx.size() < keep && pos < ranked.size() && ranked[pos].first > 0.0) {
      row_idx.push_back(ranked[pos].second);
      row_val.push_back(ranked[pos].first);
      ++pos;
    }
    if (row_idx.size() < keep) {
      // Fill with the smallest-index points whose inner product is exactly 0.
      for (std::size_t j = 0; j < n && row_idx.size() < keep; ++j) {
        if (touched_flag[j] && acc[j] != 0.0) continue;
        row_idx.push_back(static_cast<Index>(j));
        row_val.push_back(0.0);
      }
    }
    if (row_idx.size() < keep) {
      // Only negative inner products remain (non-binary labels).
      std::vector<std::pair<double, Index>> negatives;
      for (const auto& r : ranked)
        if (r.first < 0.0) negatives.push_back(r);
      for (std::size_t p = 0; p < negatives.size() && row_idx.size() < keep; ++p) {
        row_idx.push_back(negatives[p].second);
        row_val.push_back(negatives[p].first);
      }
    }

    std::vector<std::size_t> order(row_idx.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row_idx[a] < row_idx[b]; });
    for (std::size_t o : order) {
      omega.indices.push_back(row_idx[o]);
      omega.values.push_back(row_val[o]);
    }
    omega.offsets.push_back(omega.indices.size());

    for (Index j : touched) {
      acc[j] = 0.0;
      touched_flag[j] = 0;
    }
  }
  return omega;
}

NeighborResult knn(const DenseVector& query, const DenseMatrix& points, std::size_t k, Metric metric) {
  const auto m = static_cast<std::size_t>(points.cols());
  if (m == 0) throw std::invalid_argument("knn: empty point set");
  if (k < 1 || k > m) throw std::invalid_argument("knn: need 1 <= k <= " + std::to_string(m));
  if (query.size() != points.rows()) throw DimensionError("knn: query dimension mismatch");

  std::vector<std::pair<double, Index>> scored(m);
  for (std::size_t c = 0; c < m; ++c) {
    const auto col = points.col(static_cast<Eigen::Index>(c));
    const double key = metric == Metric::euclidean ? (col - query).squaredNorm() : -col.dot(query);
    scored[c] = {key, static_cast<Index>(c)};
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());

  NeighborResult out;
  out.indices.reserve(k);
  out.distances.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.indices.push_back(scored[i].second);
    out.distances.push_back(metric == Metric::euclidean ? std::sqrt(scored[i].first) : scored[i].first);
  }
  return out;
}

}  // namespace localembed
