#include "localembed/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace localembed {
namespace {

// ||x - c||^2 computed over x's support plus the centroid mass outside it.
double squared_distance(const SparseRow& x, const DenseMatrix& centroids, Eigen::Index c, double centroid_norm2) {
  double on_support = 0.0;
  double centroid_on_support = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p) {
    const double cj = centroids(x.indices[p], c);
    const double diff = x.values[p] - cj;
    on_support += diff * diff;
    centroid_on_support += cj * cj;
  }
  return on_support + std::max(0.0, centroid_norm2 - centroid_on_support);
}

std::pair<Index, double> nearest(const SparseRow& x, const DenseMatrix& centroids, const DenseVector& norms2,
                                 Index skip = -1) {
  Index best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    if (c == skip) continue;
    const double d = squared_distance(x, centroids, c, norms2[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<Index>(c);
    }
  }
  return {best, best_d};
}

void set_column_from_row(DenseMatrix& centroids, Eigen::Index c, const SparseRow& x) {
  centroids.col(c).setZero();
  for (std::size_t p = 0; p < x.size(); ++p) centroids(x.indices[p], c) = x.values[p];
}

DenseMatrix cluster_means(const SparseMatrix& x, const std::vector<Index>& assignment, std::size_t clusters,
                          std::vector<std::size_t>& sizes) {
  DenseMatrix sums = DenseMatrix::Zero(static_cast<Eigen::Index>(x.cols()), static_cast<Eigen::Index>(clusters));
  sizes.assign(clusters, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto c = assignment[i];
    ++sizes[static_cast<std::size_t>(c)];
    const auto row = x.row(i);
    for (std::size_t p = 0; p < row.size(); ++p) sums(row.indices[p], c) += row.values[p];
  }
  for (std::size_t c = 0; c < clusters; ++c)
    if (sizes[c] > 0) sums.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
  return sums;
}

DenseVector column_norms2(const DenseMatrix& m) { return m.colwise().squaredNorm().transpose(); }

}  // namespace

std::vector<std::vector<Index>> Partition::members() const {
  std::vector<std::vector<Index>> out(sizes.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Index>(i));
  return out;
}

SparseMatrix normalize_rows(const SparseMatrix& features) {
  SparseMatrix out(0, features.cols());
  std::vector<double> vals;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto row = features.row(i);
    const double norm = std::sqrt(squared_norm(row));
    vals.assign(row.values.begin(), row.values.end());
    if (norm > 0.0)
      for (double& v : vals) v /= norm;
    out.push_row(row.indices, vals);
  }
  return out;
}

Index assign_cluster(const SparseRow& x, const DenseMatrix& centroids) {
  if (centroids.cols() == 0) throw std::invalid_argument("assign_cluster: no centroids");
  for (std::size_t p = 0; p < x.size(); ++p) {
    if (x.indices[p] >= centroids.rows()) throw DimensionError("assign_cluster: feature index beyond centroid dimension");
  }
  return nearest(x, centroids, column_norms2(centroids)).first;
}

Partition kmeans(const SparseMatrix& features, std::size_t clusters, std::uint64_t seed, const KMeansOptions& options) {
  const std::size_t n = features.rows();
  if (clusters < 1) throw std::invalid_argument("kmeans: need at least one cluster");
  if (clusters > n) {
    throw std::invalid_argument("kmeans: " + std::to_string(clusters) + " clusters for " + std::to_string(n) + " points");
  }
  const SparseMatrix normalized = options.normalize ? normalize_rows(features) : SparseMatrix();
  const SparseMatrix& x = options.normalize ? normalized : features;
  const auto d = static_cast<Eigen::Index>(x.cols());
  const auto k = static_cast<Eigen::Index>(clusters);

  std::mt19937_64 rng(seed);
  Partition part;
  part.centroids = DenseMatrix::Zero(d, k);

  if (!options.plus_plus) {
    // Partial Fisher-Yates: the first `clusters` entries are a uniform sample without replacement.
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    for (std::size_t i = 0; i < clusters; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
      set_column_from_row(part.centroids, static_cast<Eigen::Index>(i), x.row(static_cast<std::size_t>(order[i])));
    }
  } else {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    set_column_from_row(part.centroids, 0, x.row(first(rng)));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 1; c < k; ++c) {
      const double norm2 = part.centroids.col(c - 1).squaredNorm();
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], squared_distance(x.row(i), part.centroids, c - 1, norm2));
        total += d2[i];
      }
      std::size_t chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (chosen = 0; chosen + 1 < n && target >= d2[chosen]; ++chosen) target -= d2[chosen];
      } else {
        chosen = static_cast<std::size_t>(c);
      }
      set_column_from_row(part.centroids, c, x.row(chosen));
    }
  }

  part.assignment.assign(n, -1);
  std::vector<Index> next(n);
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iters, 1); ++iter) {
    const DenseVector norms2 = column_norms2(part.centroids);
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [c, dd] = nearest(x.row(i), part.centroids, norms2);
      next[i] = c;
      dist[i] = dd;
      wcss += dd;
    }
    const bool changed = next != part.assignment;
    part.assignment = next;
    part.wcss.push_back(wcss);
    ++part.iterations;

    part.centroids = cluster_means(x, part.assignment, clusters, part.sizes);
    bool reseeded = false;
    std::vector<char> used(n, 0);
    for (std::size_t c = 0; c < clusters; ++c) {
      if (part.sizes[c] > 0) continue;
      // Re-seed an empty cluster with the point farthest from its centroid.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i] || part.sizes[static_cast<std::size_t>(part.assignment[i])] <= 1) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) continue;
      used[far] = 1;
      --part.sizes[static_cast<std::size_t>(part.assignment[far])];
      part.assignment[far] = static_cast<Index>(c);
      part.sizes[c] = 1;
      dist[far] = 0.0;
      reseeded = true;
    }
    if (reseeded) part.centroids = cluster_means(x, part.assignment, clusters, part.sizes);
    if (!changed && !reseeded) break;
  }
  return part;
}

Partition merge_small_clusters(const SparseMatrix& features, Partition partition, std::size_t min_size,
                               const KMeansOptions& options) {
  const SparseMatrix normalized = options.normalize ? normalize_rows(features) : SparseMatrix();
  const SparseMatrix& x = options.normalize ? normalized : features;
  for (;;) {
    const std::size_t count = partition.sizes.size();
    if (count <= 1) break;
    std::size_t victim = count;
    for (std::size_t c = 0; c < count; ++c) {
      if (partition.sizes[c] < min_size && (victim == count || partition.sizes[c] < partition.sizes[victim])) victim = c;
    }
    if (victim == count) break;

    const DenseVector from = partition.centroids.col(static_cast<Eigen::Index>(victim));
    std::size_t target = count;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < count; ++c) {
      if (c == victim) continue;
      const double dd = (partition.centroids.col(static_cast<Eigen::Index>(c)) - from).squaredNorm();
      if (dd < best) {
        best = dd;
        target = c;
      }
    }
    for (auto& a : partition.assignment) {
      if (static_cast<std::size_t>(a) == victim) a = static_cast<Index>(target);
      if (static_cast<std::size_t>(a) > victim) --a;
    }
    partition.centroids = cluster_means(x, partition.assignment, count - 1, partition.sizes);
  }
  return partition;
}

}  // namespace localembed
