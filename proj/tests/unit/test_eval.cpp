#include <doctest.h>

#include <random>

#include "localembed/eval.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace localembed;
using namespace localembed::testing;

namespace {

SparseScores scores_of(std::vector<Index> labels, std::vector<double> values) { return {std::move(labels), std::move(values)}; }

}  // namespace

TEST_CASE("precision at k examples") {
  const std::vector<Index> truth{1, 4};
  const SparseScores s = scores_of({0, 1, 3, 4}, {0.2, 0.9, 0.5, 0.7});
  CHECK(precision_at_k(s, truth, 1, 6) == 1.0);
  CHECK(precision_at_k(s, truth, 2, 6) == 1.0);
  CHECK(precision_at_k(s, truth, 3, 6) == doctest::Approx(2.0 / 3.0));
  // ties at zero resolve to the smallest absent label index
  const SparseScores one = scores_of({4}, {0.3});
  CHECK(precision_at_k(one, truth, 2, 6) == 0.5);
  CHECK(precision_at_k(one, std::vector<Index>{0}, 2, 6) == 0.5);
  CHECK(precision_at_k(SparseScores{}, std::vector<Index>{}, 3, 6) == 0.0);
  CHECK_THROWS(precision_at_k(s, truth, 0, 6));
  CHECK_THROWS(precision_at_k(s, truth, 7, 6));
}

TEST_CASE("precision matches a full sort") { CHECK(check_precision_full_sort() == ""); }

TEST_CASE("evaluate agrees with a per-point loop") {
  const Ensemble e = small_model(81);
  std::mt19937_64 rng(81);
  const Dataset d = make_topic_data({.n = 80, .d = 60, .labels = 16, .topics = 4, .seed = 82});
  const std::vector<std::size_t> ks{1, 3, 5};
  const EvalReport r = evaluate(e, d.features, d.labels, ks, true);
  REQUIRE(r.points == 80);
  REQUIRE(r.per_point.size() == 80);
  for (std::size_t j = 0; j < ks.size(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 80; ++i) {
      const SparseScores s = predict_scores(e, d.features.row(i));
      std::vector<double> dense(e.label_count, 0.0);
      for (std::size_t p = 0; p < s.labels.size(); ++p) dense[s.labels[p]] = s.scores[p];
      const auto t = d.labels.row(i).indices;
      const double expected = full_sort_precision(dense, std::vector<Index>(t.begin(), t.end()), ks[j]);
      CHECK(r.per_point[i][j] == expected);
      sum += expected;
    }
    CHECK(r.precision.at(ks[j]) == doctest::Approx(sum / 80.0).epsilon(1e-14));
  }
  // P@1 is the fraction of points whose first predicted label is correct
  std::size_t hits = 0;
  for (std::size_t i = 0; i < 80; ++i) {
    const Prediction p = predict(e, d.features.row(i), 1);
    const auto t = d.labels.row(i).indices;
    if (std::binary_search(t.begin(), t.end(), p.labels[0])) ++hits;
  }
  CHECK(r.precision.at(1) == doctest::Approx(hits / 80.0));
}

TEST_CASE("evaluate rejects mismatched inputs") {
  const Ensemble e = small_model(83, 1);
  const SparseMatrix x(2, e.feature_dim + 1), y(2, e.label_count);
  const std::vector<std::size_t> ks{1};
  CHECK_THROWS_AS(evaluate(e, x, y, ks), DimensionError);
  CHECK_THROWS_AS(evaluate(e, SparseMatrix(3, e.feature_dim), y, ks), DimensionError);
  CHECK_THROWS(evaluate(e, SparseMatrix(2, e.feature_dim), y, std::vector<std::size_t>{}));
  // narrower test files are accepted
  CHECK(evaluate(e, SparseMatrix(2, 3), SparseMatrix(2, 2), ks).points == 2);
}

TEST_CASE("global svd error of a rank-two label matrix") {
  std::mt19937_64 rng(84);
  // every row is one of two label patterns
  SparseMatrix y(0, 10);
  for (int i = 0; i < 40; ++i) {
    const std::vector<Index> a{0, 2, 5}, b{1, 2, 7, 9};
    const auto& li = (rng() % 2) ? a : b;
    y.push_row(li, std::vector<double>(li.size(), 1.0));
  }
  CHECK(approximation_error(y, 2, ApproxMode::global_svd) <= 1e-10);
  CHECK(approximation_error(y, 1, ApproxMode::global_svd) > 0.01);
}

TEST_CASE("global svd error is non-increasing in l_hat and matches a dense SVD") {
  std::mt19937_64 rng(85);
  for (auto [n, l] : {std::pair{50, 12}, std::pair{9, 30}}) {
    const SparseMatrix y = random_sparse(n, l, 0.3, rng, true);
    const DenseMatrix dense = y.to_dense();
    Eigen::JacobiSVD<DenseMatrix> svd(dense);
    const double total = dense.squaredNorm();
    double prev = 1.0;
    for (std::size_t r = 1; r <= static_cast<std::size_t>(std::min(n, l)); ++r) {
      const double err = approximation_error(y, r, ApproxMode::global_svd);
      double tail = 0.0;
      for (Eigen::Index i = static_cast<Eigen::Index>(r); i < svd.singularValues().size(); ++i)
        tail += svd.singularValues()[i] * svd.singularValues()[i];
      CHECK(err == doctest::Approx(tail / total).epsilon(1e-9).scale(1.0));
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("nn objective error at full observation") {
  std::mt19937_64 rng(86);
  const SparseMatrix y = random_sparse(30, 8, 0.3, rng, true);
  const OmegaSet omega = build_omega(y, 30);
  SvpConfig svp;
  svp.max_iters = 5;
  // the full Gram matrix has rank <= 8 so l_hat = 8 reproduces it
  CHECK(approximation_error(y, 8, ApproxMode::nn_objective, &omega, svp) <= 1e-8);
  CHECK_THROWS(approximation_error(y, 8, ApproxMode::nn_objective));
}

TEST_CASE("l_hat outside the label matrix rank bound is rejected") {
  std::mt19937_64 rng(87);
  const SparseMatrix y = random_sparse(6, 4, 0.5, rng, true);
  CHECK_THROWS(approximation_error(y, 5, ApproxMode::global_svd));
  CHECK_THROWS(approximation_error(y, 0, ApproxMode::global_svd));
  CHECK_NOTHROW(approximation_error(y, 4, ApproxMode::global_svd));
}

TEST_CASE("label frequencies") {
  SparseMatrix y(0, 4);
  for (const auto& li : {std::vector<Index>{0, 3}, std::vector<Index>{3}, std::vector<Index>{}}) {
    y.push_row(li, std::vector<double>(li.size(), 1.0));
  }
  CHECK(label_frequencies(y) == std::vector<std::size_t>{1, 0, 0, 2});
}
