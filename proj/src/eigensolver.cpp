#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "metahom/error.hpp"
#include "metahom/solvers.hpp"

namespace metahom {

void EigenSolveOptions::check() const {
  if (num_eigenpairs < 1)
    throw Error(ErrorCode::config, fmt::format("num_eigenpairs must be >= 1, got {}", num_eigenpairs));
  if (!(tolerance > 0.0))
    throw Error(ErrorCode::config, fmt::format("eigen tolerance must be positive, got {}", tolerance));
  if (max_restarts < 0) throw Error(ErrorCode::config, "max_restarts must be >= 0");
  if (block_size < 0 || max_basis < 0) throw Error(ErrorCode::config, "block_size and max_basis must be >= 0");
  if (!(cluster_tolerance >= 0.0)) throw Error(ErrorCode::config, "cluster_tolerance must be >= 0");
}

namespace {

using Eigen::MatrixXd;

// Applies (A - sigma M)^{-1}.
class ShiftedSolver {
 public:
  ShiftedSolver(const SparseMatrix<double>& shifted, const EigenSolveOptions& opts) : opts_(opts.inner) {
    if (shifted.rows() <= opts.direct_solver_limit) {
      direct_ = std::make_unique<SparseCholesky>(shifted);
    } else {
      op_.matrix = shifted;
      op_.symmetry = Symmetry::symmetric;
      op_.definiteness = Definiteness::positive_definite;
      pc_ = make_preconditioner(shifted, opts_.preconditioner);
    }
  }

  MatrixXd solve(const MatrixXd& b) const {
    MatrixXd x(b.rows(), b.cols());
    for (Index c = 0; c < b.cols(); ++c) {
      if (direct_)
        x.col(c) = direct_->solve(b.col(c));
      else
        x.col(c) = cg_solve<double>(op_, b.col(c), opts_, pc_.get()).x;
    }
    return x;
  }

 private:
  LinearSolveOptions opts_;
  std::unique_ptr<SparseCholesky> direct_;
  SparseOperator<double> op_;
  std::unique_ptr<Preconditioner> pc_;
};

MatrixXd random_block(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  MatrixXd w(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) w(r, c) = dist(rng);
  return w;
}

// M-orthonormalizes the columns of W against V (given MV) and among themselves,
// two passes of classical Gram-Schmidt; columns that lose more than a factor
// drop_tol of their norm are discarded.
MatrixXd orthonormalize(const SparseMatrix<double>& m, const MatrixXd& v, const MatrixXd& mv, MatrixXd w,
                        double drop_tol) {
  std::vector<Index> keep;
  MatrixXd out(w.rows(), w.cols());
  Index kept = 0;
  for (Index c = 0; c < w.cols(); ++c) {
    Vector<double> x = w.col(c);
    const double norm0 = std::sqrt(std::max(x.dot(m * x), 0.0));
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (v.cols() > 0) x -= v * (mv.transpose() * x);
      for (Index k = 0; k < kept; ++k) {
        const Vector<double> mk = m * out.col(k);
        x -= out.col(k) * mk.dot(x);
      }
    }
    const double norm1 = std::sqrt(std::max(x.dot(m * x), 0.0));
    if (norm1 <= drop_tol * norm0) continue;
    out.col(kept++) = x / norm1;
  }
  return out.leftCols(kept);
}

}  // namespace


EigenResult eigs_smallest(const SparseOperator<double>& a, const SparseOperator<double>& m,
                          const EigenSolveOptions& opts, const Eigen::MatrixXd& start_block) {
  opts.check();
  const Index n = a.rows();
  if (a.cols() != n || m.rows() != n || m.cols() != n)
    throw Error(ErrorCode::dimension_mismatch, "eigs_smallest: A and M must be square of equal size");
  const int nev = static_cast<int>(std::min<Index>(opts.num_eigenpairs, n));
  int bs = opts.block_size > 0 ? opts.block_size : std::min(12, nev + 2);
  if (opts.start != EigenStart::random) {
    if (start_block.rows() != n || start_block.cols() == 0)
      throw Error(ErrorCode::dimension_mismatch, "eigs_smallest: start block does not match the operator");
    bs = static_cast<int>(start_block.cols());
  }
  bs = static_cast<int>(std::min<Index>(bs, n));
  Index max_basis = opts.max_basis > 0 ? opts.max_basis : std::max(3 * nev, nev + 8 * bs);
  max_basis = std::max<Index>(std::min(max_basis, n), std::min<Index>(n, nev + 2 * bs));

  EigenResult res;
  if (opts.shift) {
    res.shift = *opts.shift;
  } else if (a.definiteness == Definiteness::positive_definite) {
    res.shift = 0.0;
  } else {
    res.shift = -1e-3 * a.matrix.diagonal().sum() / std::max(m.matrix.diagonal().sum(), 1e-300);
  }
  const SparseMatrix<double> shifted = a.matrix - res.shift * m.matrix;
  ShiftedSolver inverse(shifted, opts);
  auto apply_t = [&](const MatrixXd& x) {
    res.operator_applications += static_cast<int>(x.cols());
    return inverse.solve(m.matrix * x);
  };

  std::mt19937_64 rng(opts.seed);
  MatrixXd w;
  switch (opts.start) {
    case EigenStart::random: w = random_block(n, bs, rng); break;
    case EigenStart::given: w = start_block; break;
    case EigenStart::given_load:
      res.operator_applications += bs;
      w = inverse.solve(start_block);
      break;
  }

  MatrixXd v(n, 0), av(n, 0), mv(n, 0);
  Vector<double> theta;
  MatrixXd y;
  Vector<double> resid;
  constexpr double drop_tol = 1e-8;

  auto rayleigh_ritz = [&]() {
    const MatrixXd h = v.transpose() * av;
    const MatrixXd g = v.transpose() * mv;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()), 0.5 * (g + g.transpose()));
    if (es.info() != Eigen::Success) throw Error(ErrorCode::no_convergence, "Rayleigh-Ritz step failed");
    theta = es.eigenvalues();
    y = es.eigenvectors();
  };

  auto residuals = [&](Index count) {
    Vector<double> r(count);
    for (Index k = 0; k < count; ++k) {
      const Vector<double> mx = mv * y.col(k);
      const Vector<double> rv = av * y.col(k) - theta[k] * mx;
      r[k] = rv.norm() / (std::max(mx.norm(), 1e-300) * std::max(1.0, std::abs(theta[k])));
    }
    return r;
  };

  const bool purging = opts.purge_functionals.size() > 0;
  if (purging && opts.purge_functionals.rows() != n)
    throw Error(ErrorCode::dimension_mismatch, "eigs_smallest: purge functionals do not match the operator");
  MatrixXd locked(n, 0), mlocked(n, 0);
  std::vector<double> locked_values;

  auto append = [n](MatrixXd& dst, const MatrixXd& cols) {
    const Index old = dst.cols();
    dst.conservativeResize(n, old + cols.cols());
    dst.rightCols(cols.cols()) = cols;
  };
  auto against = [&](const MatrixXd& x) {
    if (locked.cols() == 0) return orthonormalize(m.matrix, v, mv, x, drop_tol);
    MatrixXd vv(n, v.cols() + locked.cols()), mm(n, v.cols() + locked.cols());
    vv << v, locked;
    mm << mv, mlocked;
    return orthonormalize(m.matrix, vv, mm, x, drop_tol);
  };
  // Keeps the Ritz vectors selected by `cols` as the new basis.
  auto compress = [&](const std::vector<Index>& cols) {
    MatrixXd yk(y.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) yk.col(static_cast<Index>(c)) = y.col(cols[c]);
    v = v * yk;
    av = av * yk;
    mv = mv * yk;
    rayleigh_ritz();
  };

  const bool confined = opts.confine_to_start && opts.start != EigenStart::random;
  MatrixXd last_block;
  std::vector<Index> active;      // Ritz indices reported as the wanted pairs
  std::vector<Index> candidates;  // unconverged Ritz indices usable for expansion
  int converged_count = 0;

  // Residuals of all Ritz pairs; the wanted pairs are the lowest ones, or the
  // lowest ones seen by the purge functionals when purging.
  auto classify = [&]() {
    resid = residuals(v.cols());
    std::vector<char> visible(static_cast<std::size_t>(v.cols()), 1);
    if (purging) {
      const MatrixXd seen = opts.purge_functionals.transpose() * (v * y);
      for (Index k = 0; k < v.cols(); ++k) visible[static_cast<std::size_t>(k)] = seen.col(k).norm() > opts.purge_tolerance;
    }
    active.clear();
    candidates.clear();
    for (Index k = 0; k < v.cols(); ++k) {
      if (!visible[static_cast<std::size_t>(k)]) continue;
      if (static_cast<int>(active.size()) < nev) {
        active.push_back(k);
      } else if (!active.empty()) {
        const double last = theta[active.back()];
        if (theta[k] - last <= opts.cluster_tolerance * std::max(1.0, std::abs(last))) active.push_back(k);
      }
      if (resid[k] > opts.tolerance) candidates.push_back(k);
    }
    converged_count = 0;
    while (converged_count < static_cast<int>(active.size()) && resid[active[static_cast<std::size_t>(converged_count)]] <= opts.tolerance)
      ++converged_count;
  };

  MatrixXd ready;  // expansion block already projected and orthonormalized
  for (;;) {
    MatrixXd q;
    if (ready.cols() > 0) {
      q.swap(ready);
    } else {
      if (opts.project) opts.project(w);
      q = against(w);
    }
    if (q.cols() == 0 && !confined && v.cols() + locked.cols() < n) q = against(random_block(n, bs, rng));
    if (q.cols() > 0) {
      last_block = q;
      append(v, q);
      append(av, a.matrix * q);
      append(mv, m.matrix * q);
    } else if (!confined || v.cols() == 0) {
      res.exhausted = true;
    }
    if (v.cols() == 0) break;
    rayleigh_ritz();

    if (purging) {
      // Converged pairs invisible to the functionals are locked away so that
      // rounding cannot feed them back into the search space.
      const Vector<double> r = residuals(v.cols());
      const MatrixXd seen = opts.purge_functionals.transpose() * (v * y);
      std::vector<Index> keep;
      for (Index k = 0; k < v.cols(); ++k) {
        if (r[k] <= opts.tolerance && seen.col(k).norm() <= opts.purge_tolerance) {
          append(locked, v * y.col(k));
          append(mlocked, mv * y.col(k));
          locked_values.push_back(theta[k]);
        } else {
          keep.push_back(k);
        }
      }
      if (static_cast<Index>(keep.size()) < v.cols()) compress(keep);
      if (v.cols() == 0) {
        if (confined) {
          res.exhausted = true;
          break;
        }
        w = random_block(n, bs, rng);
        continue;
      }
    }

    classify();
    if (converged_count >= static_cast<int>(active.size()) && converged_count >= nev) break;
    if (res.exhausted) {
      if (converged_count == static_cast<int>(active.size())) break;
      throw Error(ErrorCode::no_convergence,
                  fmt::format("eigs_smallest: search space exhausted with {} of {} pairs converged", converged_count,
                              nev));
    }

    if (v.cols() + bs > max_basis) {
      if (res.restarts >= opts.max_restarts)
        throw Error(ErrorCode::no_convergence,
                    fmt::format("eigs_smallest: {} of {} pairs converged after {} restarts (worst residual {:.3e})",
                                converged_count, nev, res.restarts,
                                active.empty() ? 0.0 : resid[active.back()]));
      // Thick restart: keep the lowest Ritz vectors and every wanted pair.
      std::vector<Index> keep;
      const Index lead = std::min<Index>(v.cols(), nev + bs);
      for (Index k = 0; k < lead; ++k) keep.push_back(k);
      for (Index k : active)
        if (k >= lead) keep.push_back(k);
      for (Index k : candidates)
        if (k >= lead && static_cast<Index>(keep.size()) < nev + 2 * bs &&
            std::find(keep.begin(), keep.end(), k) == keep.end())
          keep.push_back(k);
      std::sort(keep.begin(), keep.end());
      compress(keep);
      ++res.restarts;
      classify();
      if (!confined) {
        // Unconfined restarts continue from the leading unconverged Ritz vectors.
        const Index block = std::min<Index>(bs, v.cols());
        const Index first = std::min<Index>(converged_count, v.cols() - block);
        w = apply_t(v * y.middleCols(first, block));
        continue;
      }
    }

    if (!confined) {
      // Krylov continuation from the newest block.
      w = apply_t(last_block.cols() > 0 ? last_block : MatrixXd(v.leftCols(std::min<Index>(bs, v.cols()))));
      continue;
    }
    // Confined spaces grow from the unconverged wanted Ritz vectors; batches
    // whose images already lie in the basis are skipped.
    for (std::size_t start = 0; start < candidates.size(); start += static_cast<std::size_t>(bs)) {
      const std::size_t stop = std::min(candidates.size(), start + static_cast<std::size_t>(bs));
      MatrixXd x(n, static_cast<Index>(stop - start));
      for (std::size_t c = start; c < stop; ++c) x.col(static_cast<Index>(c - start)) = v * y.col(candidates[c]);
      MatrixXd t = apply_t(x);
      if (opts.project) opts.project(t);
      ready = against(t);
      if (ready.cols() > 0) break;
    }
    if (ready.cols() == 0 && last_block.cols() > 0) {
      MatrixXd t = apply_t(last_block);
      if (opts.project) opts.project(t);
      ready = against(t);
    }
    if (ready.cols() == 0) res.exhausted = true;
  }

  res.purged = static_cast<int>(locked_values.size());
  res.purged_eigenvalues = Eigen::Map<const Vector<double>>(locked_values.data(),
                                                            static_cast<Index>(locked_values.size()));
  if (v.cols() == 0 || active.empty()) {
    res.converged = true;
    return res;
  }
  const Index count = static_cast<Index>(active.size());
  res.eigenvalues.resize(count);
  res.eigenvectors.resize(n, count);
  res.residuals.resize(count);
  for (Index c = 0; c < count; ++c) {
    const Index k = active[static_cast<std::size_t>(c)];
    res.eigenvalues[c] = theta[k];
    res.eigenvectors.col(c) = v * y.col(k);
    res.residuals[c] = resid[k];
  }
  res.converged = true;
  const Index last_index = active.back();
  Index next = -1;
  for (Index k = last_index + 1; k < v.cols() && next < 0; ++k) {
    if (!purging) {
      next = k;
    } else if ((opts.purge_functionals.transpose() * (v * y.col(k))).norm() > opts.purge_tolerance) {
      next = k;
    }
  }
  if (next >= 0) {
    res.next_eigenvalue = theta[next];
    const double last = theta[last_index];
    if (theta[next] - last <= opts.tolerance * std::max(1.0, std::abs(last))) {
      res.cluster_warning = true;
      res.warnings.push_back(fmt::format("eigenvalue {} ({:.12g}) is within tolerance of the next ({:.12g})", count,
                                         last, theta[next]));
    }
  }
  return res;
}

}  // namespace metahom
