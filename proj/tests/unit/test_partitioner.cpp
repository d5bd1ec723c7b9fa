#include <doctest.h>

#include <random>

#include "localembed/partitioner.hpp"
#include "properties.hpp"

using namespace localembed;
using namespace localembed::testing;

TEST_CASE("one cluster has the mean as centroid") {
  std::mt19937_64 rng(50);
  const SparseMatrix x = random_sparse(25, 6, 0.5, rng);
  const Partition p = kmeans(x, 1, 1);
  const DenseVector mean = x.to_dense().colwise().mean().transpose();
  CHECK((p.centroids.col(0) - mean).norm() < 1e-12);
  CHECK(p.sizes == std::vector<std::size_t>{25});
}

TEST_CASE("separated blobs are split exactly") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> noise(0.0, 1.0);
  SparseMatrix x(0, 3);
  for (int i = 0; i < 40; ++i) {
    const double offset = i < 20 ? 0.0 : 100.0;
    const std::vector<Index> idx{0, 1, 2};
    const std::vector<double> val{offset + noise(rng), offset + noise(rng), 1000.0 + noise(rng)};
    x.push_row(idx, val);
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Partition p = kmeans(x, 2, seed);
    for (int i = 1; i < 20; ++i) CHECK(p.assignment[i] == p.assignment[0]);
    for (int i = 21; i < 40; ++i) CHECK(p.assignment[i] == p.assignment[20]);
    CHECK(p.assignment[0] != p.assignment[20]);
  }
}

TEST_CASE("as many clusters as points gives zero spread") {
  std::mt19937_64 rng(52);
  const DenseMatrix d = random_dense(12, 4, rng);
  const Partition p = kmeans(SparseMatrix::from_dense(d), 12, 3);
  CHECK(p.wcss.back() <= 1e-20);
  for (std::size_t s : p.sizes) CHECK(s == 1);
}

TEST_CASE("assign_cluster exact hits, single centroid and exhaustive scan") {
  std::mt19937_64 rng(53);
  const DenseMatrix c = random_dense(5, 4, rng);
  CHECK(assign_cluster(SparseMatrix::from_dense(c.col(2).transpose()).row(0), c) == 2);
  CHECK(assign_cluster(SparseMatrix(1, 5).row(0), c.leftCols(1)) == 0);
  for (int t = 0; t < 50; ++t) {
    const DenseMatrix cents = random_dense(6, 5, rng);
    const DenseVector x = random_dense(6, 1, rng).col(0);
    Eigen::Index best = 0;
    (cents.colwise() - x).colwise().squaredNorm().minCoeff(&best);
    CHECK(assign_cluster(SparseMatrix::from_dense(x.transpose()).row(0), cents) == best);
  }
  CHECK_THROWS(assign_cluster(SparseMatrix(1, 5).row(0), DenseMatrix(5, 0)));
  CHECK_THROWS(assign_cluster(SparseMatrix::from_dense(DenseMatrix::Ones(1, 7)).row(0), c));
}

TEST_CASE("ties in assignment go to the smaller index") {
  DenseMatrix c = DenseMatrix::Zero(2, 3);
  c(0, 1) = 1.0;
  c(0, 2) = -1.0;
  CHECK(assign_cluster(SparseMatrix(1, 2).row(0), c.rightCols(2)) == 0);
}

TEST_CASE("descent, reproducibility and fixed point") {
  CHECK(check_kmeans_descent().empty());
  std::mt19937_64 rng(54);
  const SparseMatrix x = random_sparse(200, 15, 0.3, rng);
  KMeansOptions opts;
  opts.max_iters = 300;
  const Partition a = kmeans(x, 6, 9, opts);
  const Partition b = kmeans(x, 6, 9, opts);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  const Partition c = kmeans(x, 6, 10, opts);
  CHECK(c.assignment != a.assignment);
  if (a.iterations < opts.max_iters) {
    for (std::size_t i = 0; i < x.rows(); ++i) CHECK(assign_cluster(x.row(i), a.centroids) == a.assignment[i]);
  }
}

TEST_CASE("k-means++ and normalized variants produce valid partitions") {
  std::mt19937_64 rng(55);
  const SparseMatrix x = random_sparse(80, 10, 0.3, rng);
  KMeansOptions opts;
  opts.plus_plus = true;
  opts.normalize = true;
  const Partition p = kmeans(x, 5, 2, opts);
  CHECK(p.num_clusters() == 5);
  std::size_t total = 0;
  for (std::size_t s : p.sizes) total += s;
  CHECK(total == 80);
  const SparseMatrix nx = normalize_rows(x);
  for (std::size_t i = 0; i < nx.rows(); ++i) {
    const double norm = squared_norm(nx.row(i));
    CHECK((norm == 0.0 || std::abs(norm - 1.0) < 1e-12));
  }
}

TEST_CASE("small clusters are merged into the nearest sibling") {
  std::mt19937_64 rng(56);
  const SparseMatrix x = random_sparse(60, 8, 0.4, rng);
  const Partition p = kmeans(x, 12, 4);
  const Partition m = merge_small_clusters(x, p, 8);
  std::size_t total = 0;
  for (std::size_t s : m.sizes) {
    CHECK(s >= 8);
    total += s;
  }
  CHECK(total == 60);
  const auto members = m.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    DenseVector mean = DenseVector::Zero(8);
    for (Index i : members[c]) mean += x.to_dense().row(i).transpose();
    mean /= static_cast<double>(members[c].size());
    CHECK((m.centroids.col(static_cast<Eigen::Index>(c)) - mean).norm() < 1e-10);
  }
  // a threshold above n leaves a single cluster
  CHECK(merge_small_clusters(x, p, 100).num_clusters() == 1);
}

TEST_CASE("invalid cluster counts are rejected") {
  std::mt19937_64 rng(57);
  const SparseMatrix x = random_sparse(5, 3, 0.5, rng);
  CHECK_THROWS(kmeans(x, 6, 0));
  CHECK_THROWS(kmeans(x, 0, 0));
}
