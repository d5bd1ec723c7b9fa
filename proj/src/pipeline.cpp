#include "localembed/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "localembed/parallel.hpp"

namespace localembed {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// z = V x for a regressor stored transposed (d x l_hat).
DenseVector embed_point(const SparseMatrix& regressor_t, const SparseRow& x, std::size_t l_hat) {
  DenseVector z = DenseVector::Zero(static_cast<Eigen::Index>(l_hat));
  for (std::size_t p = 0; p < x.size(); ++p) {
    const auto j = static_cast<std::size_t>(x.indices[p]);
    if (j >= regressor_t.rows()) continue;
    const auto w = regressor_t.row(j);
    for (std::size_t q = 0; q < w.size(); ++q) z[w.indices[q]] += x.values[p] * w.values[q];
  }
  return z;
}

std::vector<std::pair<Index, double>> reduce_by_label(std::vector<std::pair<Index, double>> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<Index, double>> out;
  for (const auto& e : entries) {
    if (!out.empty() && out.back().first == e.first) {
      out.back().second += e.second;
    } else {
      out.push_back(e);
    }
  }
  return out;
}

std::runtime_error annotate(const std::string& where, const std::exception& e) {
  return std::runtime_error(where + ": " + e.what());
}

}  // namespace

void HyperParams::validate() const {
  if (l_hat < 1) throw std::invalid_argument("l_hat must be >= 1");
  if (n_bar < 1) throw std::invalid_argument("n_bar must be >= 1");
  if (k_nn < 1) throw std::invalid_argument("k_nn must be >= 1");
  if (num_learners < 1) throw std::invalid_argument("num_learners must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (!(sparsify_threshold >= 0.0 && sparsify_threshold < 1.0))
    throw std::invalid_argument("sparsify_threshold must be in [0, 1)");
  SvpConfig s = svp;
  s.l_hat = l_hat;
  s.validate();
  admm.validate();
}

std::size_t HyperParams::cluster_count(std::size_t n) const {
  if (clusters > 0) return clusters;
  return std::max<std::size_t>(1, n / 6000);
}

TrainStats& TrainStats::operator+=(const TrainStats& o) {
  clustering_seconds += o.clustering_seconds;
  svp_seconds += o.svp_seconds;
  admm_seconds += o.admm_seconds;
  svp_iterations += o.svp_iterations;
  admm_iterations += o.admm_iterations;
  admm_unconverged += o.admm_unconverged;
  return *this;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 over the combined key
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

LearnerEmbedding embed_learner(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                               std::uint64_t seed, TrainStats* stats) {
  hyper.validate();
  const std::size_t n = features.rows();
  if (labels.rows() != n) throw DimensionError("features and labels have different point counts");
  if (n == 0) throw std::invalid_argument("no training points");

  TrainStats local;
  LearnerEmbedding out;
  auto start = Clock::now();
  out.partition = kmeans(features, hyper.cluster_count(n), seed, hyper.kmeans);
  out.partition = merge_small_clusters(features, std::move(out.partition), hyper.n_bar + 1, hyper.kmeans);
  out.members = out.partition.members();
  local.clustering_seconds = seconds_since(start);

  const std::size_t count = out.members.size();
  out.embeddings.resize(count);
  std::vector<TrainStats> per_cluster(count);
  SvpConfig svp = hyper.svp;
  svp.l_hat = hyper.l_hat;
  parallel_for(count, hyper.threads, [&](std::size_t c) {
    try {
      const auto t0 = Clock::now();
      const SparseMatrix cluster_labels = labels.select_rows(out.members[c]);
      const OmegaSet omega = build_omega(cluster_labels, hyper.n_bar);
      const SvpResult res = svp_complete(omega, svp);
      out.embeddings[c] = embeddings_from_factor(res.factor, hyper.l_hat);
      per_cluster[c].svp_seconds = seconds_since(t0);
      per_cluster[c].svp_iterations = res.iterations;
    } catch (const std::exception& e) {
      throw annotate("cluster " + std::to_string(c), e);
    }
  });
  for (const auto& s : per_cluster) local += s;
  if (stats) *stats += local;
  return out;
}

Learner fit_learner(const SparseMatrix& features, const LearnerEmbedding& embedding, const HyperParams& hyper,
                    TrainStats* stats) {
  hyper.validate();
  const std::size_t count = embedding.members.size();
  Learner learner;
  learner.centroids = embedding.partition.centroids;
  learner.clusters.resize(count);
  std::vector<TrainStats> per_cluster(count);
  parallel_for(count, hyper.threads, [&](std::size_t c) {
    try {
      const auto t0 = Clock::now();
      const auto& members = embedding.members[c];
      const SparseMatrix cluster_features = features.select_rows(members);
      const AdmmResult fit = solve_regressors(cluster_features, embedding.embeddings[c], hyper.admm);

      const double scale = fit.v.cwiseAbs().maxCoeff();
      const double drop = hyper.sparsify_threshold * scale;
      LocalModel& model = learner.clusters[c];
      model.members = members;
      model.regressor = SparseMatrix::from_dense(fit.v.transpose(), drop);
      model.embeddings.resize(static_cast<Eigen::Index>(hyper.l_hat), static_cast<Eigen::Index>(members.size()));
      for (std::size_t i = 0; i < members.size(); ++i) {
        model.embeddings.col(static_cast<Eigen::Index>(i)) =
            embed_point(model.regressor, cluster_features.row(i), hyper.l_hat);
      }
      per_cluster[c].admm_seconds = seconds_since(t0);
      per_cluster[c].admm_iterations = fit.iterations;
      per_cluster[c].admm_unconverged = fit.converged ? 0 : 1;
    } catch (const std::exception& e) {
      throw annotate("cluster " + std::to_string(c), e);
    }
  });
  TrainStats local;
  for (const auto& s : per_cluster) local += s;
  if (stats) *stats += local;
  return learner;
}

Learner train_learner(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                      std::uint64_t seed, TrainStats* stats) {
  const LearnerEmbedding emb = embed_learner(features, labels, hyper, seed, stats);
  return fit_learner(features, emb, hyper, stats);
}

Ensemble make_ensemble(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                       std::vector<Learner> learners) {
  if (features.rows() != labels.rows()) throw DimensionError("features and labels have different point counts");
  Ensemble e;
  e.hyper = hyper;
  e.feature_dim = features.cols();
  e.label_count = labels.cols();
  e.train_labels = labels;
  e.learners = std::move(learners);
  return e;
}

Ensemble train_ensemble(const SparseMatrix& features, const SparseMatrix& labels, const HyperParams& hyper,
                        std::uint64_t master_seed, TrainStats* stats) {
  hyper.validate();
  const std::size_t t = hyper.num_learners;
  std::vector<Learner> learners(t);
  std::vector<TrainStats> per_learner(t);
  // Parallelize across learners when there are several, otherwise across clusters.
  HyperParams inner = hyper;
  const std::size_t outer_threads = t > 1 ? hyper.threads : 1;
  if (t > 1) inner.threads = 1;
  parallel_for(t, outer_threads, [&](std::size_t i) {
    try {
      learners[i] = train_learner(features, labels, inner, derive_seed(master_seed, i), &per_learner[i]);
    } catch (const std::exception& e) {
      throw annotate("learner " + std::to_string(i), e);
    }
  });
  if (stats)
    for (const auto& s : per_learner) *stats += s;
  return make_ensemble(features, labels, hyper, std::move(learners));
}

SparseScores predict_scores(const Ensemble& ensemble, const SparseRow& x, PredictStats* stats) {
  if (!ensemble.trained()) throw std::invalid_argument("predict: ensemble has no trained learners");
  for (std::size_t p = 0; p < x.size(); ++p) {
    if (x.indices[p] < 0 || static_cast<std::size_t>(x.indices[p]) >= ensemble.feature_dim)
      throw DimensionError("predict: feature index " + std::to_string(x.indices[p]) + " out of range");
  }
  const HyperParams& hyper = ensemble.hyper;

  std::vector<double> unit_values;
  SparseRow cluster_view = x;
  if (hyper.kmeans.normalize) {
    const double norm = std::sqrt(squared_norm(x));
    unit_values.assign(x.values.begin(), x.values.end());
    if (norm > 0.0)
      for (double& v : unit_values) v /= norm;
    cluster_view = {x.indices, unit_values};
  }

  std::vector<std::pair<Index, double>> combined;
  for (const Learner& learner : ensemble.learners) {
    const Index tau = assign_cluster(cluster_view, learner.centroids);
    const LocalModel& model = learner.clusters[static_cast<std::size_t>(tau)];
    const DenseVector z = embed_point(model.regressor, x, hyper.l_hat);
    const std::size_t k = std::min(hyper.k_nn, model.members.size());
    const NeighborResult nn = knn(z, model.embeddings, k, hyper.metric);
    if (stats) {
      stats->columns_scanned += model.members.size();
      stats->max_columns_per_learner = std::max(stats->max_columns_per_learner, model.members.size());
    }

    std::vector<std::pair<Index, double>> votes;
    for (Index local : nn.indices) {
      const auto row = ensemble.train_labels.row(static_cast<std::size_t>(model.members[static_cast<std::size_t>(local)]));
      for (std::size_t p = 0; p < row.size(); ++p) votes.emplace_back(row.indices[p], row.values[p]);
    }
    for (auto& [label, value] : reduce_by_label(std::move(votes))) combined.emplace_back(label, value / static_cast<double>(k));
  }

  const auto reduced = reduce_by_label(std::move(combined));
  const auto learners = static_cast<double>(ensemble.learners.size());
  SparseScores out;
  out.labels.reserve(reduced.size());
  out.scores.reserve(reduced.size());
  for (const auto& [label, value] : reduced) {
    out.labels.push_back(label);
    out.scores.push_back(value / learners);
  }
  return out;
}

Prediction top_labels(const SparseScores& scores, std::size_t p, std::size_t label_count) {
  p = std::min(p, label_count);
  std::vector<std::size_t> order(scores.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return scores.labels[a] < scores.labels[b];
  });

  Prediction out;
  std::size_t pos = 0;
  while (out.labels.size() < p && pos < order.size() && scores.scores[order[pos]] > 0.0) {
    out.labels.push_back(scores.labels[order[pos]]);
    out.scores.push_back(scores.scores[order[pos]]);
    ++pos;
  }
  if (out.labels.size() < p) {
    // Zero-score labels, explicit or absent, tie and are taken by index.
    std::size_t cursor = 0;  // into scores.labels, which is ascending
    for (std::size_t label = 0; label < label_count && out.labels.size() < p; ++label) {
      while (cursor < scores.labels.size() && static_cast<std::size_t>(scores.labels[cursor]) < label) ++cursor;
      const bool listed = cursor < scores.labels.size() && static_cast<std::size_t>(scores.labels[cursor]) == label;
      if (listed && scores.scores[cursor] != 0.0) continue;
      out.labels.push_back(static_cast<Index>(label));
      out.scores.push_back(0.0);
    }
  }
  for (; out.labels.size() < p && pos < order.size(); ++pos) {
    if (scores.scores[order[pos]] < 0.0) {
      out.labels.push_back(scores.labels[order[pos]]);
      out.scores.push_back(scores.scores[order[pos]]);
    }
  }
  return out;
}

Prediction predict(const Ensemble& ensemble, const SparseRow& x, std::size_t p, PredictStats* stats) {
  if (p < 1) throw std::invalid_argument("predict: p must be >= 1");
  return top_labels(predict_scores(ensemble, x, stats), p, ensemble.label_count);
}

}  // namespace localembed
