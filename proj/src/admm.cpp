#include "localembed/admm.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace localembed {

void AdmmConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("admm: lambda must be >= 0");
  if (!(mu >= 0.0)) throw std::invalid_argument("admm: mu must be >= 0");
  if (!(rho > 0.0)) throw std::invalid_argument("admm: rho must be > 0");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("admm: rel_tol must be >= 0");
}

std::vector<double> soft_threshold(std::span<const double> v, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("soft_threshold: threshold must be >= 0");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = std::max(0.0, std::abs(v[i]) - t);
    out[i] = v[i] > 0.0 ? mag : (v[i] < 0.0 ? -mag : 0.0);
  }
  return out;
}

void soft_threshold_inplace(Eigen::Ref<DenseMatrix> v, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("soft_threshold: threshold must be >= 0");
  if (t == 0.0) return;
  v = v.unaryExpr([t](double x) {
    const double mag = std::max(0.0, std::abs(x) - t);
    return x > 0.0 ? mag : (x < 0.0 ? -mag : 0.0);
  });
}

DenseMatrix project_points(const DenseMatrix& v, const SparseMatrix& features) {
  if (static_cast<std::size_t>(v.cols()) != features.cols()) throw DimensionError("project_points: V width != d");
  DenseMatrix out(v.rows(), static_cast<Eigen::Index>(features.rows()));
  for (std::size_t i = 0; i < features.rows(); ++i) out.col(static_cast<Eigen::Index>(i)) = dense_times_row(v, features.row(i));
  return out;
}

namespace {

// A X^T for point-major X: column j accumulates A.col(i) * x_ij.
DenseMatrix times_features_transpose(const DenseMatrix& a, const SparseMatrix& features) {
  DenseMatrix out = DenseMatrix::Zero(a.rows(), static_cast<Eigen::Index>(features.cols()));
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto x = features.row(i);
    for (std::size_t p = 0; p < x.size(); ++p) out.col(x.indices[p]).noalias() += x.values[p] * a.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

DenseMatrix feature_gram(const SparseMatrix& features) {
  const auto d = static_cast<Eigen::Index>(features.cols());
  DenseMatrix g = DenseMatrix::Zero(d, d);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto x = features.row(i);
    for (std::size_t p = 0; p < x.size(); ++p) {
      for (std::size_t q = p; q < x.size(); ++q) g(x.indices[p], x.indices[q]) += x.values[p] * x.values[q];
    }
  }
  g.triangularView<Eigen::StrictlyLower>() = g.transpose();
  return g;
}

// Solves V K = Q with K = (1 + rho) XX^T + lambda I.
class NormalSolver {
 public:
  NormalSolver(const SparseMatrix& features, const AdmmConfig& cfg) : features_(features), cfg_(cfg) {
    const std::size_t d = features.cols();
    direct_ = d <= cfg.direct_solve_max_dim;
    if (direct_) {
      DenseMatrix k = (1.0 + cfg.rho) * feature_gram(features);
      k.diagonal().array() += cfg.lambda;
      if (cfg.lambda == 0.0) {
        Eigen::LDLT<DenseMatrix> ldlt(k);
        const DenseVector piv = ldlt.vectorD();
        const double top = piv.cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || !(piv.minCoeff() > 1e-12 * std::max(top, 1e-300))) {
          throw std::invalid_argument("admm: XX^T is singular; use lambda > 0");
        }
      }
      llt_.compute(k);
      if (llt_.info() != Eigen::Success) throw std::invalid_argument("admm: normal matrix is not positive definite");
    } else {
      if (cfg.lambda <= 0.0) throw std::invalid_argument("admm: iterative solve requires lambda > 0");
      transposed_ = features.transpose();
    }
  }

  void solve(const DenseMatrix& q, DenseMatrix& v) const {
    if (direct_) {
      v = llt_.solve(q.transpose()).transpose();
      return;
    }
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      DenseVector w = v.row(r).transpose();
      conjugate_gradient(q.row(r).transpose(), w);
      v.row(r) = w.transpose();
    }
  }

 private:
  DenseVector apply(const DenseVector& w) const {
    // XX^T w = X_pm^T (X_pm w) for the point-major matrix X_pm.
    return (1.0 + cfg_.rho) * spmv(transposed_, spmv(features_, w)) + cfg_.lambda * w;
  }

  void conjugate_gradient(const DenseVector& b, DenseVector& x) const {
    DenseVector r = b - apply(x);
    DenseVector p = r;
    double rs = r.squaredNorm();
    const double stop = cfg_.cg_tol * cfg_.cg_tol * std::max(b.squaredNorm(), 1e-300);
    for (std::size_t it = 0; it < cfg_.cg_max_iters && rs > stop; ++it) {
      const DenseVector ap = apply(p);
      const double alpha = rs / p.dot(ap);
      x += alpha * p;
      r -= alpha * ap;
      const double rs_next = r.squaredNorm();
      p = r + (rs_next / rs) * p;
      rs = rs_next;
    }
  }

  const SparseMatrix& features_;
  AdmmConfig cfg_;
  bool direct_ = true;
  Eigen::LLT<DenseMatrix> llt_;
  SparseMatrix transposed_;
};

}  // namespace

AdmmResult solve_regressors(const SparseMatrix& features, const DenseMatrix& embeddings, const AdmmConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(features.rows());
  if (n < 1) throw std::invalid_argument("admm: need at least one point");
  if (embeddings.cols() != n) {
    throw DimensionError("admm: embeddings have " + std::to_string(embeddings.cols()) + " columns, expected " +
                         std::to_string(n));
  }
  const Eigen::Index l_hat = embeddings.rows();
  const auto d = static_cast<Eigen::Index>(features.cols());

  const NormalSolver solver(features, config);
  const double threshold = config.mu / config.rho;

  AdmmResult result;
  result.v = DenseMatrix::Zero(l_hat, d);
  DenseMatrix alpha = DenseMatrix::Zero(l_hat, n);
  DenseMatrix beta = DenseMatrix::Zero(l_hat, n);
  DenseMatrix alpha_prev;

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const DenseMatrix q = times_features_transpose(embeddings + config.rho * (alpha - beta), features);
    solver.solve(q, result.v);
    const DenseMatrix vx = project_points(result.v, features);
    alpha_prev = alpha;
    alpha = vx + beta;
    soft_threshold_inplace(alpha, threshold);
    beta += vx - alpha;
    ++result.iterations;

    const double primal = (vx - alpha).norm() / std::max(1.0, vx.norm());
    const double dual = (alpha - alpha_prev).norm() / std::max(1.0, alpha.norm());
    result.primal_residuals.push_back(primal);
    if (!std::isfinite(primal)) throw std::runtime_error("admm: iterate became non-finite");
    if (primal < config.rel_tol && dual < config.rel_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace localembed
