#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "localembed/linalg.hpp"

namespace localembed {
namespace {

using Rng = std::mt19937_64;

DenseMatrix random_block(Eigen::Index n, Eigen::Index b, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix out(n, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index r = 0; r < n; ++r) out(r, c) = normal(rng);
  return out;
}

// Orthonormalizes the columns of `block` against `basis` and each other with
// classical Gram-Schmidt: two blocked passes against the basis, then per
// column against the accepted columns. A column that loses more than half its
// norm in a pass gets another full pass, since the round-off left behind is
// no longer small relative to what remains. Columns that vanish are replaced
// by random directions when `fill_random` is set, dropped otherwise. Stops
// early once the whole space is spanned.
DenseMatrix orthonormalize(const DenseMatrix& basis, const DenseMatrix& block, Rng& rng, bool fill_random) {
  const Eigen::Index n = block.rows();
  const Eigen::Index room = n - basis.cols();
  DenseMatrix out(n, std::min<Eigen::Index>(block.cols(), std::max<Eigen::Index>(room, 0)));
  if (out.cols() == 0) return out;
  const DenseVector before = block.colwise().norm().transpose();
  DenseMatrix projected = block;
  DenseVector mid = before;  // norms ahead of the last basis pass
  if (basis.cols() > 0) {
    projected.noalias() -= basis * (basis.transpose() * projected);
    mid = projected.colwise().norm().transpose();
    projected.noalias() -= basis * (basis.transpose() * projected);
  }

  Eigen::Index kept = 0;
  auto full_pass = [&](DenseVector& v) {
    if (basis.cols() > 0) v.noalias() -= basis * (basis.transpose() * v);
    if (kept > 0) v.noalias() -= out.leftCols(kept) * (out.leftCols(kept).transpose() * v);
  };

  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < block.cols() && kept < out.cols(); ++c) {
    DenseVector v = projected.col(c);
    double norm0 = before[c];
    double prev = mid[c];
    for (int attempt = 0; attempt < 5; ++attempt) {
      if (attempt > 0) {
        if (!fill_random) break;
        for (Eigen::Index r = 0; r < n; ++r) v[r] = normal(rng);
        norm0 = v.norm();
        if (basis.cols() > 0) v.noalias() -= basis * (basis.transpose() * v);
        prev = v.norm();
        if (basis.cols() > 0) v.noalias() -= basis * (basis.transpose() * v);
      }
      if (!(norm0 > 0.0) || !std::isfinite(norm0)) continue;
      if (kept > 0) {
        for (int pass = 0; pass < 2; ++pass) v.noalias() -= out.leftCols(kept) * (out.leftCols(kept).transpose() * v);
      }
      double after = v.norm();
      for (int extra = 0; extra < 3 && after < 0.5 * prev && after > 1e-300; ++extra) {
        prev = after;
        full_pass(v);
        after = v.norm();
      }
      if (after > 1e-8 * norm0 && after > 1e-300) {
        out.col(kept++) = v / after;
        break;
      }
    }
  }
  return out.leftCols(kept);
}

// Picks at most `b` dominant directions of `candidates` orthogonal to `basis`
// and returns them orthonormalized, padded with random directions.
DenseMatrix expansion_block(const DenseMatrix& basis, const DenseMatrix& candidates, Eigen::Index b, Rng& rng) {
  if (b <= 0) return DenseMatrix(basis.rows(), 0);
  if (candidates.cols() <= b) {
    // nothing to select; orthonormalize projects and refills vanished columns
    DenseMatrix padded(candidates.rows(), b);
    padded.leftCols(candidates.cols()) = candidates;
    padded.rightCols(b - candidates.cols()) = random_block(candidates.rows(), b - candidates.cols(), rng);
    return orthonormalize(basis, padded, rng, true);
  }
  DenseMatrix r = candidates;
  for (int pass = 0; pass < 2; ++pass) r.noalias() -= basis * (basis.transpose() * r);
  DenseMatrix picked;
  if (r.cols() <= b) {
    picked = r;
  } else {
    const DenseMatrix gram = r.transpose() * r;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(gram);
    const Eigen::Index s = gram.rows();
    const double top = std::max(es.eigenvalues()[s - 1], 0.0);
    picked.resize(r.rows(), b);
    Eigen::Index used = 0;
    for (Eigen::Index i = s - 1; i >= 0 && used < b; --i) {
      const double ev = es.eigenvalues()[i];
      if (ev <= 1e-20 * top || ev <= 0.0) break;
      picked.col(used++) = r * es.eigenvectors().col(i) / std::sqrt(ev);
    }
    picked.conservativeResize(Eigen::NoChange, used);
  }
  if (picked.cols() < b) {
    DenseMatrix padded(r.rows(), b);
    padded.leftCols(picked.cols()) = picked;
    padded.rightCols(b - picked.cols()) = random_block(r.rows(), b - picked.cols(), rng);
    picked = std::move(padded);
  }
  return orthonormalize(basis, picked, rng, true);
}

}  // namespace

EigenResult top_eig(const SymmetricOperator& op, std::size_t k, const EigenOptions& options,
                    const DenseMatrix* warm_start) {
  const auto n = static_cast<Eigen::Index>(op.dim);
  if (k < 1 || static_cast<Eigen::Index>(k) > n) {
    throw std::invalid_argument("top_eig: need 1 <= k <= dim (k=" + std::to_string(k) +
                                ", dim=" + std::to_string(n) + ")");
  }
  if (warm_start && warm_start->rows() != n) throw DimensionError("top_eig: warm start has wrong row count");

  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::Index block = options.block_size > 0 ? static_cast<Eigen::Index>(options.block_size)
                                              : std::max<Eigen::Index>(std::min<Eigen::Index>(kk, 4), kk / 4);
  block = std::min(block, n);
  const Eigen::Index keep = std::min(n, kk + block);
  const Eigen::Index capacity = std::min(n, 2 * kk + 2 * block);

  Rng rng(options.seed);
  EigenResult result;
  DenseMatrix basis(n, capacity);
  DenseMatrix image(n, capacity);
  // basis^T * image, kept current as columns are added
  DenseMatrix projected = DenseMatrix::Zero(capacity, capacity);
  Eigen::Index filled = 0;

  auto extend_projection = [&](Eigen::Index from, Eigen::Index to) {
    const DenseMatrix c = basis.leftCols(to).transpose() * image.middleCols(from, to - from);
    projected.block(0, from, from, to - from) = c.topRows(from);
    projected.block(from, 0, to - from, from) = c.topRows(from).transpose();
    const DenseMatrix d = c.bottomRows(to - from);
    projected.block(from, from, to - from, to - from) = 0.5 * (d + d.transpose());
  };

  auto apply = [&](const DenseMatrix& block_in) {
    DenseMatrix out = op.apply(block_in);
    if (out.rows() != n || out.cols() != block_in.cols()) throw DimensionError("operator returned wrong shape");
    result.matvecs += static_cast<std::size_t>(block_in.cols());
    return out;
  };

  DenseMatrix next;
  if (warm_start && warm_start->cols() > 0) {
    const DenseMatrix seed_cols = warm_start->leftCols(std::min(warm_start->cols(), keep));
    const DenseMatrix w = orthonormalize(DenseMatrix(n, 0), seed_cols, rng, false);
    if (w.cols() > 0) {
      basis.leftCols(w.cols()) = w;
      image.leftCols(w.cols()) = apply(w);
      filled = w.cols();
      extend_projection(0, filled);
      next = expansion_block(basis.leftCols(filled), image.leftCols(filled),
                             std::min(w.cols(), capacity - filled), rng);
    }
  }
  if (filled == 0) next = orthonormalize(DenseMatrix(n, 0), random_block(n, block, rng), rng, true);

  for (int restart = 0;; ++restart) {
    while (filled < capacity && next.cols() > 0) {
      const Eigen::Index add = std::min<Eigen::Index>(next.cols(), capacity - filled);
      basis.middleCols(filled, add) = next.leftCols(add);
      const DenseMatrix img = apply(next.leftCols(add));
      image.middleCols(filled, add) = img;
      extend_projection(filled, filled + add);
      filled += add;
      if (filled >= capacity) break;
      next = expansion_block(basis.leftCols(filled), img, std::min(block, capacity - filled), rng);
    }

    // Rayleigh-Ritz on the current basis.
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(projected.topLeftCorner(filled, filled));
    const Eigen::Index retain = std::min(keep, filled);
    DenseMatrix coeffs(filled, retain);
    DenseVector theta(retain);
    for (Eigen::Index i = 0; i < retain; ++i) {
      coeffs.col(i) = es.eigenvectors().col(filled - 1 - i);
      theta[i] = es.eigenvalues()[filled - 1 - i];
    }
    DenseMatrix ritz = basis.leftCols(filled) * coeffs;
    DenseMatrix ritz_image = image.leftCols(filled) * coeffs;
    DenseMatrix residual = ritz_image - ritz * theta.asDiagonal();

    bool converged = retain >= kk;
    double worst = 0.0;
    const double floor = options.negligible * std::max(0.0, theta[0]);
    for (Eigen::Index i = 0; i < std::min(kk, retain); ++i) {
      const double res = residual.col(i).norm();
      if (options.negligible > 0.0 && theta[i] + res < floor) continue;
      const double rel = res / std::max(1.0, std::abs(theta[i]));
      worst = std::max(worst, rel);
      if (rel > options.tol) converged = false;
    }
    if (converged || filled == n) {
      result.vectors = ritz.leftCols(kk);
      result.values = theta.head(kk);
      result.restarts = restart;
      return result;
    }
    if (restart >= options.max_iter) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3e", worst);
      throw ConvergenceError("top_eig: no convergence after " + std::to_string(restart) +
                             " restarts (worst relative residual " + buf + ")");
    }

    // Expanding with every wanted residual direction, not just a block's worth,
    // keeps restarts from stalling when many pairs are almost converged.
    basis.leftCols(retain) = ritz;
    image.leftCols(retain) = ritz_image;
    projected.topLeftCorner(retain, retain) = theta.asDiagonal();
    filled = retain;
    next = expansion_block(basis.leftCols(filled), residual, std::min(kk, capacity - filled), rng);
  }
}

}  // namespace localembed
