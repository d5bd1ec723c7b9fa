#pragma once

#include <cstddef>
#include <vector>

#include "localembed/linalg.hpp"

namespace localembed {

/// Observed entries of the label Gram matrix: row i lists N_i, the points
/// whose label vectors have the largest inner products with y_i, together
/// with those inner products. Rows are sorted by column index.
struct OmegaSet {
  std::size_t n = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<Index> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
  std::size_t row_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }

  /// Every pair (i, j), i.e. the full Gram matrix of the given dense n x n G.
  static OmegaSet full(const DenseMatrix& gram);
  /// The entries of G at the listed positions; each row of `pattern` must be sorted.
  static OmegaSet from_pattern(const DenseMatrix& gram, const std::vector<std::vector<Index>>& pattern);
};

/// Builds Omega from the point-major label matrix (n x L). Row i keeps the
/// min(n_bar, n) points j maximizing <y_i, y_j>, ties to the smaller j.
OmegaSet build_omega(const SparseMatrix& labels, std::size_t n_bar);

enum class Metric { euclidean, inner_product };

struct NeighborResult {
  std::vector<Index> indices;
  /// Euclidean distance, or the negated inner product for Metric::inner_product.
  std::vector<double> distances;
};

/// Exact k nearest columns of `points` (dim x m) to `query`; ties to the smaller index.
NeighborResult knn(const DenseVector& query, const DenseMatrix& points, std::size_t k,
                   Metric metric = Metric::euclidean);

}  // namespace localembed
