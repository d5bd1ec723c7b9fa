#include "localembed/svp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace localembed {

void SvpConfig::validate() const {
  if (l_hat < 1) throw std::invalid_argument("svp: l_hat must be >= 1");
  if (!(eta > 0.0)) throw std::invalid_argument("svp: eta must be > 0");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("svp: rel_tol must be >= 0");
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows are the points' current embeddings, so M_ij = <rows_i, rows_j>.
RowMajor scaled_rows(const Factor& f) {
  RowMajor w = f.u * f.sigma.cwiseSqrt().asDiagonal();
  return w;
}

// sym(P_Omega(G - M)) as a sparse n x n matrix: each listed (i, j) contributes
// half its residual at (i, j) and half at (j, i).
SparseMatrix symmetric_residual(const OmegaSet& omega, const Factor& current) {
  const RowMajor w = scaled_rows(current);
  const bool has_rank = w.cols() > 0;
  std::vector<Triplet> trips;
  trips.reserve(2 * omega.size());
  for (std::size_t i = 0; i < omega.n; ++i) {
    for (std::size_t p = omega.offsets[i]; p < omega.offsets[i + 1]; ++p) {
      const Index j = omega.indices[p];
      const double m_ij = has_rank ? w.row(static_cast<Eigen::Index>(i)).dot(w.row(j)) : 0.0;
      const double half = 0.5 * (omega.values[p] - m_ij);
      if (!std::isfinite(half)) {
        throw std::runtime_error("svp: non-finite residual at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      trips.push_back({static_cast<Index>(i), j, half});
      trips.push_back({j, static_cast<Index>(i), half});
    }
  }
  return SparseMatrix::from_triplets(omega.n, omega.n, std::move(trips));
}

constexpr double kClampRelative = 1e-10;

Factor clamp_spectrum(const EigenResult& eig) {
  const double top = eig.values.size() > 0 ? eig.values[0] : 0.0;
  Eigen::Index r = 0;
  while (r < eig.values.size() && eig.values[r] > 0.0 && eig.values[r] >= kClampRelative * top) ++r;
  return {eig.vectors.leftCols(r), eig.values.head(r)};
}

}  // namespace

double observed_objective(const OmegaSet& omega, const Factor& factor) {
  const RowMajor w = scaled_rows(factor);
  const bool has_rank = w.cols() > 0;
  double total = 0.0;
  for (std::size_t i = 0; i < omega.n; ++i) {
    for (std::size_t p = omega.offsets[i]; p < omega.offsets[i + 1]; ++p) {
      const double m_ij = has_rank ? w.row(static_cast<Eigen::Index>(i)).dot(w.row(omega.indices[p])) : 0.0;
      const double d = omega.values[p] - m_ij;
      total += d * d;
    }
  }
  return total;
}

SymmetricOperator svp_step_operator(const OmegaSet& omega, const Factor& current, double eta,
                                    std::size_t* flop_counter) {
  SparseMatrix residual = symmetric_residual(omega, current);
  const DenseMatrix u = current.u;
  const DenseVector sigma = current.sigma;
  const std::size_t n = omega.n;
  return {n, [residual = std::move(residual), u, sigma, eta, flop_counter, n](const DenseMatrix& v) -> DenseMatrix {
            DenseMatrix out = eta * spmm(residual, v);
            if (u.cols() > 0) out.noalias() += u * (sigma.asDiagonal() * (u.transpose() * v));
            if (flop_counter) {
              const auto b = static_cast<std::size_t>(v.cols());
              const auto r = static_cast<std::size_t>(u.cols());
              *flop_counter += b * (4 * n * r + r + 2 * residual.nnz() + n);
            }
            return out;
          }};
}

SvpResult svp_complete(const OmegaSet& omega, const SvpConfig& config) {
  config.validate();
  if (omega.n == 0 || omega.size() == 0) throw std::invalid_argument("svp: empty observation set");

  SvpResult result;
  result.factor = {DenseMatrix(static_cast<Eigen::Index>(omega.n), 0), DenseVector(0)};
  double objective = observed_objective(omega, result.factor);
  result.objective.push_back(objective);
  double eta = config.eta;
  const std::size_t rank_request = std::min(config.l_hat, omega.n);

  EigenOptions eig_options;
  eig_options.tol = config.eig_tol;
  eig_options.max_iter = config.eig_max_iter;
  // pairs this small are clamped away below, so their accuracy is irrelevant
  eig_options.negligible = kClampRelative;

  for (std::size_t iter = 0; iter < config.max_iters && objective > 0.0; ++iter) {
    Factor candidate;
    double candidate_objective = 0.0;
    bool accepted = false;
    for (int halvings = 0; halvings <= 10; ++halvings) {
      const SymmetricOperator op = svp_step_operator(omega, result.factor, eta, &result.matvec_flops);
      // Cold starts measured several times cheaper than warm-starting from the
      // previous U: a random Krylov block finds the dominant subspace in one pass.
      const EigenResult eig = top_eig(op, rank_request, eig_options);
      result.matvecs += eig.matvecs;
      candidate = clamp_spectrum(eig);
      candidate_objective = observed_objective(omega, candidate);
      if (!std::isfinite(candidate_objective)) throw std::runtime_error("svp: objective became non-finite");
      if (!config.step_backoff || candidate_objective <= objective + 1e-9 * std::max(1.0, objective)) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;

    const double change = (objective - candidate_objective) / std::max(objective, 1e-300);
    result.factor = std::move(candidate);
    objective = candidate_objective;
    result.objective.push_back(objective);
    ++result.iterations;
    if (std::abs(change) < config.rel_tol) break;
  }
  result.final_eta = eta;
  return result;
}

DenseMatrix embeddings_from_factor(const Factor& factor, std::size_t l_hat) {
  const auto r = static_cast<Eigen::Index>(factor.rank());
  if (factor.u.cols() != r) throw DimensionError("factor: U columns do not match sigma length");
  if (static_cast<std::size_t>(r) > l_hat) throw DimensionError("factor rank exceeds l_hat");
  if ((factor.sigma.array() < 0.0).any()) throw std::invalid_argument("factor: negative eigenvalue");
  DenseMatrix z = DenseMatrix::Zero(static_cast<Eigen::Index>(l_hat), factor.u.rows());
  if (r > 0) z.topRows(r) = factor.sigma.cwiseSqrt().asDiagonal() * factor.u.transpose();
  return z;
}

}  // namespace localembed
