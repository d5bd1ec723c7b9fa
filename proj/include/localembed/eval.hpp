#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "localembed/linalg.hpp"
#include "localembed/neighbors.hpp"
#include "localembed/pipeline.hpp"
#include "localembed/svp.hpp"

namespace localembed {

/// (1/k) * |top-k labels of `scores` intersected with `truth`|. Ties go to the
/// smaller label index and unlisted labels score 0. `truth` must be sorted.
double precision_at_k(const SparseScores& scores, std::span<const Index> truth, std::size_t k,
                      std::size_t label_count);

struct EvalReport {
  std::map<std::size_t, double> precision;
  /// per_point[i][j] is the precision of point i at the j-th requested k.
  std::vector<std::vector<double>> per_point;
  std::size_t points = 0;
  double predict_seconds = 0.0;
};

/// Mean P@k over all points of a test set (point-major features and labels).
EvalReport evaluate(const Ensemble& ensemble, const SparseMatrix& features, const SparseMatrix& labels,
                    std::span<const std::size_t> ks, bool keep_per_point = false);

enum class ApproxMode { global_svd, nn_objective };

/// Relative error of a rank-l_hat approximation of the label matrix
/// (point-major, n x L):
///   global_svd:   ||Y - Y_lhat||_F^2 / ||Y||_F^2 with Y_lhat the truncated SVD;
///   nn_objective: ||P_Omega(Y^T Y) - P_Omega(Z^T Z)||_F^2 / ||P_Omega(Y^T Y)||_F^2
///                 with Z from svp_complete over `omega`.
double approximation_error(const SparseMatrix& labels, std::size_t l_hat, ApproxMode mode,
                           const OmegaSet* omega = nullptr, const SvpConfig& svp = {});

/// Number of points carrying each label.
std::vector<std::size_t> label_frequencies(const SparseMatrix& labels);

}  // namespace localembed
