#include "localembed/eval.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include <Eigen/Eigenvalues>

#include "localembed/parallel.hpp"

namespace localembed {

double precision_at_k(const SparseScores& scores, std::span<const Index> truth, std::size_t k,
                      std::size_t label_count) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  if (k > label_count) {
    throw std::invalid_argument("precision_at_k: k=" + std::to_string(k) + " exceeds label count " +
                                std::to_string(label_count));
  }
  const Prediction top = top_labels(scores, k, label_count);
  std::size_t hits = 0;
  for (Index label : top.labels)
    if (std::binary_search(truth.begin(), truth.end(), label)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

EvalReport evaluate(const Ensemble& ensemble, const SparseMatrix& features, const SparseMatrix& labels,
                    std::span<const std::size_t> ks, bool keep_per_point) {
  if (features.rows() != labels.rows()) throw DimensionError("evaluate: feature and label row counts differ");
  if (features.cols() > ensemble.feature_dim) {
    throw DimensionError("evaluate: test features have dimension " + std::to_string(features.cols()) +
                         ", model expects " + std::to_string(ensemble.feature_dim));
  }
  if (labels.cols() > ensemble.label_count) {
    throw DimensionError("evaluate: test labels have " + std::to_string(labels.cols()) + " classes, model knows " +
                         std::to_string(ensemble.label_count));
  }
  if (ks.empty()) throw std::invalid_argument("evaluate: no k requested");
  const std::size_t n = features.rows();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::vector<double>> per_point(n, std::vector<double>(ks.size()));
  parallel_for(n, ensemble.hyper.threads, [&](std::size_t i) {
    const SparseScores scores = predict_scores(ensemble, features.row(i));
    const auto truth = labels.row(i).indices;
    for (std::size_t j = 0; j < ks.size(); ++j) per_point[i][j] = precision_at_k(scores, truth, ks[j], ensemble.label_count);
  });

  EvalReport report;
  report.points = n;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += per_point[i][j];
    report.precision[ks[j]] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  if (keep_per_point) report.per_point = std::move(per_point);
  report.predict_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

// Largest l_hat eigenvalues of the smaller of Y^T Y and Y Y^T.
double top_gram_mass(const SparseMatrix& labels, std::size_t l_hat) {
  const std::size_t n = labels.rows();
  const std::size_t num_labels = labels.cols();
  const bool label_side = num_labels <= n;
  const std::size_t dim = label_side ? num_labels : n;
  constexpr std::size_t dense_limit = 4000;

  if (dim <= dense_limit) {
    DenseMatrix gram = DenseMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    if (label_side) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = labels.row(i);
        for (std::size_t p = 0; p < y.size(); ++p)
          for (std::size_t q = 0; q < y.size(); ++q) gram(y.indices[p], y.indices[q]) += y.values[p] * y.values[q];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
          const double v = sparse_dot(labels.row(i), labels.row(j));
          gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
          gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(gram, Eigen::EigenvaluesOnly);
    double mass = 0.0;
    for (std::size_t i = 0; i < l_hat; ++i) mass += std::max(0.0, es.eigenvalues()[static_cast<Eigen::Index>(dim - 1 - i)]);
    return mass;
  }

  const SparseMatrix transposed = labels.transpose();
  SymmetricOperator op{dim, [&](const DenseMatrix& v) -> DenseMatrix {
                         return label_side ? spmm(transposed, spmm(labels, v)) : spmm(labels, spmm(transposed, v));
                       }};
  const EigenResult eig = top_eig(op, l_hat);
  return eig.values.cwiseMax(0.0).sum();
}

}  // namespace

double approximation_error(const SparseMatrix& labels, std::size_t l_hat, ApproxMode mode, const OmegaSet* omega,
                           const SvpConfig& svp) {
  const std::size_t limit = std::min(labels.rows(), labels.cols());
  if (l_hat < 1 || l_hat > limit) {
    throw std::invalid_argument("approximation_error: l_hat must be in [1, " + std::to_string(limit) + "]");
  }
  if (mode == ApproxMode::global_svd) {
    double total = 0.0;
    for (double v : labels.values()) total += v * v;
    if (total == 0.0) return 0.0;
    return std::max(0.0, 1.0 - top_gram_mass(labels, l_hat) / total);
  }

  if (!omega) throw std::invalid_argument("approximation_error: nn_objective needs an observation set");
  if (omega->n != labels.rows()) throw DimensionError("approximation_error: observation set size mismatch");
  double observed = 0.0;
  for (double v : omega->values) observed += v * v;
  if (observed == 0.0) return 0.0;
  SvpConfig cfg = svp;
  cfg.l_hat = l_hat;
  const SvpResult res = svp_complete(*omega, cfg);
  return res.objective.back() / observed;
}

std::vector<std::size_t> label_frequencies(const SparseMatrix& labels) {
  std::vector<std::size_t> freq(labels.cols(), 0);
  for (Index c : labels.col_indices()) ++freq[static_cast<std::size_t>(c)];
  return freq;
}

}  // namespace localembed
