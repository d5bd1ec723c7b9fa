#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace localembed {

using Index = std::int32_t;
using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Read-only view of one row of a SparseMatrix.
struct SparseRow {
  std::span<const Index> indices;
  std::span<const double> values;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix.
///
/// Data sets are stored point-major: the feature matrix is n x d and the
/// label matrix n x L, one row per data point.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
               std::vector<Index> col_indices, std::vector<double> values);

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix from_dense(const DenseMatrix& dense, double drop_below = 0.0);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  SparseRow row(std::size_t i) const;
  std::size_t row_nnz(std::size_t i) const { return row_offsets_[i + 1] - row_offsets_[i]; }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  /// Appends a row; indices must be strictly increasing and < cols().
  void push_row(std::span<const Index> indices, std::span<const double> values);

  SparseMatrix transpose() const;
  SparseMatrix select_rows(std::span<const Index> rows) const;
  DenseMatrix to_dense() const;

  /// Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<Index> col_indices_;
  std::vector<double> values_;
};

DenseVector spmv(const SparseMatrix& a, const DenseVector& x);

/// A * B for dense B (a.cols() x m).
DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b);

double sparse_dot(const SparseRow& a, const SparseRow& b);
double squared_norm(const SparseRow& a);

/// dense * sparse_row^T, i.e. sum_j dense.col(j) * x_j.
DenseVector dense_times_row(const DenseMatrix& dense, const SparseRow& x);

/// Symmetric linear operator known only through its action on blocks of
/// vectors. `apply` maps a dim x b block to M times that block.
struct SymmetricOperator {
  std::size_t dim = 0;
  std::function<DenseMatrix(const DenseMatrix&)> apply;

  DenseVector operator()(const DenseVector& v) const { return apply(v); }

  static SymmetricOperator from_dense(const DenseMatrix& m);
  static SymmetricOperator from_vector_fn(std::size_t dim, std::function<DenseVector(const DenseVector&)> fn);
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 300;       // restart cycles
  std::size_t block_size = 0;  // 0 picks from k
  std::uint64_t seed = 0x5eed;
  /// When > 0, pairs whose Ritz value plus residual norm falls below
  /// negligible * (top Ritz value) need not meet tol. For callers that
  /// discard such pairs anyway; their vectors are returned unconverged.
  double negligible = 0.0;
};

struct EigenResult {
  DenseMatrix vectors;  // dim x r, orthonormal columns
  DenseVector values;   // length r, descending
  int restarts = 0;
  std::size_t matvecs = 0;
};

/// Algebraically largest k eigenpairs of a symmetric operator by block
/// Lanczos with full reorthogonalization and thick restarts.
///
/// `warm_start` (dim x s, any s) seeds the Krylov basis; it need not be
/// orthonormal. Throws ConvergenceError when max_iter restarts do not bring
/// every residual below tol * max(1, |lambda|).
EigenResult top_eig(const SymmetricOperator& op, std::size_t k, const EigenOptions& options = {},
                    const DenseMatrix* warm_start = nullptr);

}  // namespace localembed
