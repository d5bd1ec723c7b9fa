#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "localembed/admm.hpp"
#include "localembed/linalg.hpp"
#include "localembed/neighbors.hpp"
#include "localembed/partitioner.hpp"
#include "localembed/svp.hpp"

namespace localembed {

struct HyperParams {
  std::size_t l_hat = 100;
  std::size_t n_bar = 10;
  /// 0 selects max(1, floor(n / 6000)).
  std::size_t clusters = 0;
  std::size_t k_nn = 10;
  std::size_t num_learners = 1;
  SvpConfig svp;    // svp.l_hat is overwritten by l_hat
  AdmmConfig admm;  // lambda, mu, rho live here
  KMeansOptions kmeans;
  Metric metric = Metric::euclidean;
  /// Regressor entries below this fraction of max|V| are dropped after training.
  double sparsify_threshold = 1e-6;
  std::size_t threads = 1;

  void validate() const;
  std::size_t cluster_count(std::size_t n) const;
};

/// One cluster's local model.
struct LocalModel {
  std::vector<Index> members;  // training point ids, ascending
  SparseMatrix regressor;      // V^T stored feature-major, d x l_hat
  DenseMatrix embeddings;      // l_hat x members.size(), equal to V * X_members
};

struct Learner {
  DenseMatrix centroids;  // d x C
  std::vector<LocalModel> clusters;
};

struct Ensemble {
  HyperParams hyper;
  std::size_t feature_dim = 0;
  std::size_t label_count = 0;
  SparseMatrix train_labels;  // n x L
  std::vector<Learner> learners;

  bool trained() const { return !learners.empty(); }
};

/// Training-time diagnostics; wall-clock seconds summed over work units.
struct TrainStats {
  double clustering_seconds = 0.0;
  double svp_seconds = 0.0;
  double admm_seconds = 0.0;
  std::size_t svp_iterations = 0;
  std::size_t admm_iterations = 0;
  std::size_t admm_unconverged = 0;

  TrainStats& operator+=(const TrainStats& o);
};

/// First half of training: the partition and the per-cluster SVP embeddings.
/// Depends only on (l_hat, n_bar, clusters, svp, kmeans) and the seed, so a
/// grid search over the regression parameters can reuse it.
struct LearnerEmbedding {
  Partition partition;
  std::vector<std::vector<Index>> members;
  std::vector<DenseMatrix> embeddings;  // l_hat x n_c from SVP
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

LearnerEmbedding embed_learner(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                               std::uint64_t seed, TrainStats* stats = nullptr);

Learner fit_learner(const SparseMatrix& features, const LearnerEmbedding& embedding, const HyperParams& hyper,
                    TrainStats* stats = nullptr);

Learner train_learner(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                      std::uint64_t seed, TrainStats* stats = nullptr);

/// Learner t uses derive_seed(master_seed, t).
Ensemble train_ensemble(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                        std::uint64_t master_seed, TrainStats* stats = nullptr);

/// Assembles an ensemble from already-fitted learners.
Ensemble make_ensemble(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                       std::vector<Learner> learners);

struct SparseScores {
  std::vector<Index> labels;  // ascending
  std::vector<double> scores;
};

struct Prediction {
  std::vector<Index> labels;
  std::vector<double> scores;  // descending
};

struct PredictStats {
  /// Embedding columns scanned by kNN, summed over learners.
  std::size_t columns_scanned = 0;
  std::size_t max_columns_per_learner = 0;
};

/// Mean over learners of the neighbors' empirical label distribution.
SparseScores predict_scores(const Ensemble& ensemble, const SparseRow& x, PredictStats* stats = nullptr);

/// Top-p labels by score, ties to the smaller label index.
Prediction predict(const Ensemble& ensemble, const SparseRow& x, std::size_t p, PredictStats* stats = nullptr);

/// Top-p entries of a sparse score vector; labels without a score count as 0.
Prediction top_labels(const SparseScores& scores, std::size_t p, std::size_t label_count);

}  // namespace localembed
