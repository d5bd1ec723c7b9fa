#pragma once

#include <cstddef>
#include <vector>

#include "localembed/linalg.hpp"
#include "localembed/neighbors.hpp"

namespace localembed {

struct SvpConfig {
  std::size_t l_hat = 100;
  double eta = 1.0;
  std::size_t max_iters = 150;
  double rel_tol = 1e-5;
  /// Halve eta (at most 10 times) when an iteration would raise the objective.
  bool step_backoff = true;
  /// Tighter than the eigensolver's own default: the error of M scales
  /// linearly with it and 1e-8 leaves up to ~1e-7 Frobenius error in M.
  double eig_tol = 1e-10;
  int eig_max_iter = 300;

  void validate() const;
};

/// M = U diag(sigma) U^T with orthonormal U and positive sigma (descending).
struct Factor {
  DenseMatrix u;
  DenseVector sigma;

  std::size_t rank() const { return static_cast<std::size_t>(sigma.size()); }
};

struct SvpResult {
  Factor factor;
  /// objective[0] is the value at M = 0; one entry per accepted iteration after that.
  std::vector<double> objective;
  std::size_t iterations = 0;
  double final_eta = 1.0;
  std::size_t matvecs = 0;
  /// Flops spent inside the structured operator, for cost accounting.
  std::size_t matvec_flops = 0;
};

/// sum over listed (i, j) of (G_ij - M_ij)^2 with M = U diag(sigma) U^T.
double observed_objective(const OmegaSet& omega, const Factor& factor);

/// Rank-l_hat PSD completion of the observed Gram entries by singular value
/// projection: M <- P_lhat(M + eta * sym(P_Omega(G - M))), starting at M = 0.
SvpResult svp_complete(const OmegaSet& omega, const SvpConfig& config);

/// Z = (U diag(sigma)^{1/2})^T padded with zero rows to l_hat x n.
DenseMatrix embeddings_from_factor(const Factor& factor, std::size_t l_hat);

/// Builds the structured operator v -> U diag(sigma) U^T v + eta * sym(P_Omega(G - M)) v
/// without materializing any n x n matrix. Exposed for testing.
SymmetricOperator svp_step_operator(const OmegaSet& omega, const Factor& current, double eta,
                                    std::size_t* flop_counter = nullptr);

}  // namespace localembed
