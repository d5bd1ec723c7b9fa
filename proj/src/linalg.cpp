#include "localembed/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace localembed {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols) : rows_(0), cols_(cols) {
  // Rows are appended through push_row; an explicit size creates empty rows.
  row_offsets_.assign(rows + 1, 0);
  rows_ = rows;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                           std::vector<Index> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  validate();
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || static_cast<std::size_t>(t.row) >= rows || t.col < 0 ||
        static_cast<std::size_t>(t.col) >= cols) {
      throw DimensionError("triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<Index> cols_out;
  std::vector<double> vals_out;
  cols_out.reserve(triplets.size());
  vals_out.reserve(triplets.size());
  std::size_t t = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (t < triplets.size() && static_cast<std::size_t>(triplets[t].row) == r) {
      if (!cols_out.empty() && offsets[r] < cols_out.size() && cols_out.back() == triplets[t].col) {
        vals_out.back() += triplets[t].value;
      } else {
        cols_out.push_back(triplets[t].col);
        vals_out.push_back(triplets[t].value);
      }
      ++t;
    }
    offsets[r + 1] = cols_out.size();
  }
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals_out));
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense, double drop_below) {
  SparseMatrix out(0, static_cast<std::size_t>(dense.cols()));
  std::vector<Index> idx;
  std::vector<double> val;
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    idx.clear();
    val.clear();
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      const double v = dense(i, j);
      if (v != 0.0 && std::abs(v) >= drop_below) {
        idx.push_back(static_cast<Index>(j));
        val.push_back(v);
      }
    }
    out.push_row(idx, val);
  }
  return out;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::iota(offsets.begin(), offsets.end(), std::size_t{0});
  std::vector<Index> cols(n);
  std::iota(cols.begin(), cols.end(), Index{0});
  return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

SparseRow SparseMatrix::row(std::size_t i) const {
  const auto b = row_offsets_[i];
  const auto e = row_offsets_[i + 1];
  return {std::span<const Index>(col_indices_.data() + b, e - b), std::span<const double>(values_.data() + b, e - b)};
}

void SparseMatrix::push_row(std::span<const Index> indices, std::span<const double> values) {
  if (indices.size() != values.size()) throw DimensionError("push_row: index/value length mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || static_cast<std::size_t>(indices[k]) >= cols_)
      throw DimensionError("push_row: column " + std::to_string(indices[k]) + " out of range");
    if (k > 0 && indices[k] <= indices[k - 1]) throw std::invalid_argument("push_row: columns not strictly increasing");
  }
  col_indices_.insert(col_indices_.end(), indices.begin(), indices.end());
  values_.insert(values_.end(), values.begin(), values.end());
  row_offsets_.push_back(col_indices_.size());
  ++rows_;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::size_t> offsets(cols_ + 1, 0);
  for (Index c : col_indices_) ++offsets[static_cast<std::size_t>(c) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<Index> cols(nnz());
  std::vector<double> vals(nnz());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      const auto dst = cursor[static_cast<std::size_t>(col_indices_[p])]++;
      cols[dst] = static_cast<Index>(r);
      vals[dst] = values_[p];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(offsets), std::move(cols), std::move(vals));
}

SparseMatrix SparseMatrix::select_rows(std::span<const Index> rows) const {
  SparseMatrix out(0, cols_);
  std::size_t total = 0;
  for (Index r : rows) total += row_nnz(static_cast<std::size_t>(r));
  out.col_indices_.reserve(total);
  out.values_.reserve(total);
  out.row_offsets_.reserve(rows.size() + 1);
  for (Index r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= rows_) throw DimensionError("select_rows: row out of range");
    const auto view = row(static_cast<std::size_t>(r));
    out.col_indices_.insert(out.col_indices_.end(), view.indices.begin(), view.indices.end());
    out.values_.insert(out.values_.end(), view.values.begin(), view.values.end());
    out.row_offsets_.push_back(out.col_indices_.size());
    ++out.rows_;
  }
  return out;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) out(r, col_indices_[p]) = values_[p];
  }
  return out;
}

void SparseMatrix::validate() const {
  if (row_offsets_.size() != rows_ + 1) throw std::invalid_argument("row_offsets length must be rows+1");
  if (row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size())
    throw std::invalid_argument("row_offsets do not span the index array");
  if (col_indices_.size() != values_.size()) throw std::invalid_argument("index/value length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r + 1] < row_offsets_[r]) throw std::invalid_argument("row_offsets not monotone");
    for (std::size_t p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      const Index c = col_indices_[p];
      if (c < 0 || static_cast<std::size_t>(c) >= cols_)
        throw std::invalid_argument("column index out of range in row " + std::to_string(r));
      if (p > row_offsets_[r] && c <= col_indices_[p - 1])
        throw std::invalid_argument("column indices not strictly increasing in row " + std::to_string(r));
      if (!std::isfinite(values_[p])) throw std::invalid_argument("non-finite value in row " + std::to_string(r));
    }
  }
}

DenseVector spmv(const SparseMatrix& a, const DenseVector& x) {
  if (static_cast<std::size_t>(x.size()) != a.cols()) {
    throw DimensionError("spmv: vector length " + std::to_string(x.size()) + " != matrix cols " +
                         std::to_string(a.cols()));
  }
  DenseVector y(static_cast<Eigen::Index>(a.rows()));
  const auto& off = a.row_offsets();
  const auto& idx = a.col_indices();
  const auto& val = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t p = off[r]; p < off[r + 1]; ++p) acc += val[p] * x[idx[p]];
    y[static_cast<Eigen::Index>(r)] = acc;
  }
  return y;
}

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b) {
  if (static_cast<std::size_t>(b.rows()) != a.cols()) throw DimensionError("spmm: inner dimension mismatch");
  // Row-major accumulation keeps the inner loop contiguous over b's columns.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> br = b;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(
          static_cast<Eigen::Index>(a.rows()), b.cols());
  const auto& off = a.row_offsets();
  const auto& idx = a.col_indices();
  const auto& val = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t p = off[r]; p < off[r + 1]; ++p) out.row(r).noalias() += val[p] * br.row(idx[p]);
  }
  return out;
}

double sparse_dot(const SparseRow& a, const SparseRow& b) {
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a.indices[i] == b.indices[j]) {
      acc += a.values[i++] * b.values[j++];
    } else if (a.indices[i] < b.indices[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return acc;
}

double squared_norm(const SparseRow& a) {
  double acc = 0.0;
  for (double v : a.values) acc += v * v;
  return acc;
}

DenseVector dense_times_row(const DenseMatrix& dense, const SparseRow& x) {
  DenseVector out = DenseVector::Zero(dense.rows());
  for (std::size_t p = 0; p < x.size(); ++p) {
    const auto j = x.indices[p];
    if (j >= dense.cols()) throw DimensionError("dense_times_row: feature index beyond matrix width");
    out.noalias() += x.values[p] * dense.col(j);
  }
  return out;
}

SymmetricOperator SymmetricOperator::from_dense(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("operator matrix must be square");
  return {static_cast<std::size_t>(m.rows()), [m](const DenseMatrix& v) -> DenseMatrix { return m * v; }};
}

SymmetricOperator SymmetricOperator::from_vector_fn(std::size_t dim,
                                                    std::function<DenseVector(const DenseVector&)> fn) {
  return {dim, [dim, fn = std::move(fn)](const DenseMatrix& block) -> DenseMatrix {
            DenseMatrix out(static_cast<Eigen::Index>(dim), block.cols());
            for (Eigen::Index c = 0; c < block.cols(); ++c) out.col(c) = fn(block.col(c));
            return out;
          }};
}

}  // namespace localembed
