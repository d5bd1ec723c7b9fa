#include "localembed/tuning.hpp"

#include <cmath>
#include <stdexcept>

#include "localembed/eval.hpp"

namespace localembed {

GridResult grid_search(const Dataset& train, const GridSpec& grid, const HyperParams& base, std::uint64_t seed,
                       double valid_fraction) {
  if (grid.lambda.empty() || grid.mu.empty() || grid.k_nn.empty() || grid.n_bar.empty())
    throw std::invalid_argument("grid_search: every grid axis needs at least one value");
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
    throw std::invalid_argument("grid_search: valid_fraction must be in (0, 1)");
  const std::size_t n = train.num_points();
  const auto held_out = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
  if (held_out < 1 || held_out >= n) throw std::invalid_argument("grid_search: too few points to hold out");

  const SplitIndices split = random_split(n, n - held_out, derive_seed(seed, 0xA11D));
  const Dataset fit = train.subset(split.train);
  const Dataset valid = train.subset(split.test);
  const std::vector<std::size_t> ks{1, 3, 5};

  GridResult result;
  double best_score = -1.0;
  for (std::size_t n_bar : grid.n_bar) {
    HyperParams h = base;
    h.n_bar = n_bar;
    std::vector<LearnerEmbedding> embeddings;
    for (std::size_t t = 0; t < h.num_learners; ++t)
      embeddings.push_back(embed_learner(fit.features, fit.labels, h, derive_seed(seed, t)));

    for (double lambda : grid.lambda) {
      for (double mu : grid.mu) {
        h.admm.lambda = lambda;
        h.admm.mu = mu;
        std::vector<Learner> learners;
        for (const auto& emb : embeddings) learners.push_back(fit_learner(fit.features, emb, h));
        Ensemble model = make_ensemble(fit.features, fit.labels, h, std::move(learners));
        for (std::size_t k : grid.k_nn) {
          model.hyper.k_nn = k;
          const EvalReport report = evaluate(model, valid.features, valid.labels,
                                             std::span<const std::size_t>(ks.data(), std::min(ks.size(), model.label_count)));
          GridPoint point{lambda, mu, k, n_bar, report.precision.at(1), 0.0, 0.0};
          if (report.precision.count(3)) point.p_at_3 = report.precision.at(3);
          if (report.precision.count(5)) point.p_at_5 = report.precision.at(5);
          result.table.push_back(point);
          if (point.p_at_1 > best_score) {
            best_score = point.p_at_1;
            result.best = model.hyper;
          }
        }
      }
    }
  }
  return result;
}

}  // namespace localembed
