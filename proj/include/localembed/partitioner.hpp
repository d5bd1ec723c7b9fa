#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "localembed/linalg.hpp"

namespace localembed {

struct KMeansOptions {
  std::size_t max_iters = 50;
  /// k-means++ seeding instead of uniformly sampled distinct points.
  bool plus_plus = false;
  /// Cluster on unit-length feature vectors.
  bool normalize = false;
};

struct Partition {
  DenseMatrix centroids;  // d x C
  std::vector<Index> assignment;
  std::vector<std::size_t> sizes;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> wcss;
  std::size_t iterations = 0;

  std::size_t num_clusters() const { return sizes.size(); }
  std::vector<std::vector<Index>> members() const;
};

/// Lloyd's k-means on point-major features (n x d), deterministic given seed.
Partition kmeans(const SparseMatrix& features, std::size_t clusters, std::uint64_t seed,
                 const KMeansOptions& options = {});

/// argmin_c ||x - centroid_c||, ties to the smaller index.
Index assign_cluster(const SparseRow& x, const DenseMatrix& centroids);

/// Folds clusters smaller than min_size into the nearest surviving cluster
/// (by centroid distance) and recomputes the affected centroids.
Partition merge_small_clusters(const SparseMatrix& features, Partition partition, std::size_t min_size,
                               const KMeansOptions& options = {});

/// Rows scaled to unit Euclidean length; zero rows stay zero.
SparseMatrix normalize_rows(const SparseMatrix& features);

}  // namespace localembed
