#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "localembed/linalg.hpp"

namespace localembed {

struct AdmmConfig {
  double lambda = 1.0;  // ridge weight on V
  double mu = 0.1;      // L1 weight on VX
  double rho = 1.0;     // augmented-Lagrangian penalty
  std::size_t max_iters = 100;
  double rel_tol = 1e-4;
  /// Feature dimensions up to this size use a cached Cholesky factor;
  /// beyond it each row of V is solved by conjugate gradients.
  std::size_t direct_solve_max_dim = 20000;
  double cg_tol = 1e-10;
  std::size_t cg_max_iters = 1000;

  void validate() const;
};

struct AdmmResult {
  DenseMatrix v;  // l_hat x d
  std::size_t iterations = 0;
  bool converged = false;
  /// ||VX - alpha||_F / max(1, ||VX||_F) after each iteration.
  std::vector<double> primal_residuals;
};

/// sign(v_i) * max(0, |v_i| - t)
std::vector<double> soft_threshold(std::span<const double> v, double t);
void soft_threshold_inplace(Eigen::Ref<DenseMatrix> v, double t);

/// Regressors V minimizing ||Z - VX||_F^2 + lambda ||V||_F^2 + mu ||VX||_1 by
/// ADMM on the split alpha = VX. `features` is point-major (n x d) and
/// `embeddings` is l_hat x n.
///
/// Throws std::invalid_argument when lambda = 0 and XX^T is singular. A run
/// that hits max_iters returns its last iterate with converged = false.
AdmmResult solve_regressors(const SparseMatrix& features, const DenseMatrix& embeddings, const AdmmConfig& config);

/// V X as an l_hat x n matrix, X point-major.
DenseMatrix project_points(const DenseMatrix& v, const SparseMatrix& features);

}  // namespace localembed
