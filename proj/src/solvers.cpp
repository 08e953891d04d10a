#include "metahom/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "metahom/error.hpp"

namespace metahom {

const char* to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::none: return "none";
    case PreconditionerKind::diagonal: return "diagonal";
    case PreconditionerKind::multigrid: return "multigrid";
  }
  return "none";
}

PreconditionerKind preconditioner_from_string(const std::string& name) {
  if (name == "none") return PreconditionerKind::none;
  if (name == "diagonal") return PreconditionerKind::diagonal;
  if (name == "multigrid") return PreconditionerKind::multigrid;
  throw Error(ErrorCode::config, fmt::format("unknown preconditioner '{}'", name));
}

void LinearSolveOptions::check() const {
  if (!(tolerance > 0.0 && tolerance < 1.0))
    throw Error(ErrorCode::config, fmt::format("tolerance must lie in (0, 1), got {}", tolerance));
  if (max_iterations < 1)
    throw Error(ErrorCode::config, fmt::format("max_iterations must be >= 1, got {}", max_iterations));
}

void Preconditioner::apply(const Vector<cplx>& r, Vector<cplx>& z) const {
  Vector<double> zr, zi;
  apply(Vector<double>(r.real()), zr);
  apply(Vector<double>(r.imag()), zi);
  z.resize(r.size());
  z.real() = zr;
  z.imag() = zi;
}

DiagonalPreconditioner::DiagonalPreconditioner(const SparseMatrix<double>& a) {
  inv_diag_ = a.diagonal();
  for (Index i = 0; i < inv_diag_.size(); ++i) inv_diag_[i] = inv_diag_[i] != 0.0 ? 1.0 / inv_diag_[i] : 1.0;
}

void DiagonalPreconditioner::apply(const Vector<double>& r, Vector<double>& z) const {
  z = inv_diag_.cwiseProduct(r);
}

struct SparseCholesky::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

SparseCholesky::SparseCholesky(const SparseMatrix<double>& a) : impl_(std::make_unique<Impl>()) {
  impl_->ldlt.compute(Eigen::SparseMatrix<double>(a));
  if (impl_->ldlt.info() != Eigen::Success)
    throw Error(ErrorCode::no_convergence, "sparse factorization failed");
  const auto d = impl_->ldlt.vectorD();
  if (d.size() > 0 && !(d.minCoeff() > 0.0))
    throw Error(ErrorCode::no_convergence,
                fmt::format("matrix is not positive definite (pivot {:.3e})", d.minCoeff()));
}

SparseCholesky::~SparseCholesky() = default;

void SparseCholesky::apply(const Vector<double>& r, Vector<double>& z) const { z = impl_->ldlt.solve(r); }

Vector<double> SparseCholesky::solve(const Vector<double>& b) const { return impl_->ldlt.solve(b); }

std::unique_ptr<Preconditioner> make_preconditioner(const SparseMatrix<double>& a, PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::none: return nullptr;
    case PreconditionerKind::diagonal: return std::make_unique<DiagonalPreconditioner>(a);
    case PreconditionerKind::multigrid: return std::make_unique<MultigridPreconditioner>(a);
  }
  return nullptr;
}

namespace {

template <class Scalar>
double inf_norm(const SparseMatrix<Scalar>& a) {
  double best = 0.0;
  for (Index i = 0; i < a.outerSize(); ++i) {
    double s = 0.0;
    for (typename SparseMatrix<Scalar>::InnerIterator it(a, i); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

template <class Scalar>
void finish(SolveReport& rep, const LinearSolveOptions& opts) {
  if (rep.converged || !opts.throw_on_failure) return;
  throw Error(ErrorCode::no_convergence,
              fmt::format("{} did not converge: relative residual {:.3e} after {} iterations (tolerance {:.1e})",
                          rep.method, rep.relative_residual, rep.iterations, opts.tolerance));
}

template <class Scalar>
void apply_pc(const Preconditioner* pc, const Vector<Scalar>& r, Vector<Scalar>& z) {
  if (pc)
    pc->apply(r, z);
  else
    z = r;
}

// Stagnation: no 1% improvement of the best residual over this many iterations.
constexpr int kStagnationWindow = 200;

}  // namespace

template <class Scalar>
LinearSolveResult<Scalar> cg_solve(const SparseOperator<Scalar>& a, const Vector<Scalar>& b,
                                   const LinearSolveOptions& opts, const Preconditioner* pc) {
  opts.check();
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("cg: matrix {}x{} with right-hand side of size {}", a.rows(), a.cols(), b.size()));

  std::unique_ptr<Preconditioner> owned;
  if (!pc && opts.preconditioner != PreconditionerKind::none) {
    if constexpr (std::is_same_v<Scalar, double>)
      owned = make_preconditioner(a.matrix, opts.preconditioner);
    else
      owned = make_preconditioner(SparseMatrix<double>(a.matrix.real()), opts.preconditioner);
    pc = owned.get();
  }

  LinearSolveResult<Scalar> out;
  SolveReport& rep = out.report;
  rep.method = "cg";
  out.x = Vector<Scalar>::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return out;
  }
  const double anorm = inf_norm(a.matrix);

  Vector<Scalar> r = b, z, p, ap;
  apply_pc(pc, r, z);
  p = z;
  Scalar rz = r.dot(z);
  double best = 1.0;
  int best_at = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    ap = a.matrix * p;
    const double curvature = std::real(p.dot(ap));
    if (curvature <= 1e-12 * anorm * p.squaredNorm()) {
      rep.iterations = it - 1;
      rep.relative_residual = r.norm() / bnorm;
      rep.converged = rep.relative_residual <= opts.tolerance;
      if (rep.converged) return out;
      if (!opts.throw_on_failure) return out;
      throw Error(ErrorCode::incompatible_rhs,
                  fmt::format("cg: zero curvature with relative residual {:.3e} after {} iterations",
                              rep.relative_residual, rep.iterations));
    }
    const Scalar alpha = rz / curvature;
    out.x += alpha * p;
    r -= alpha * ap;
    const double res = r.norm() / bnorm;
    rep.iterations = it;
    rep.relative_residual = res;
    if (opts.record_history) {
      rep.residual_history.push_back(res);
      rep.energy_history.push_back(-0.5 * std::real(out.x.dot(b + r)));
    }
    if (res <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    if (res < 0.99 * best) {
      best = res;
      best_at = it;
    } else if (it - best_at > kStagnationWindow) {
      if (!opts.throw_on_failure) return out;
      throw Error(ErrorCode::incompatible_rhs,
                  fmt::format("cg: residual stagnated at {:.3e} after {} iterations", res, it));
    }
    apply_pc(pc, r, z);
    const Scalar rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  finish<Scalar>(rep, opts);
  return out;
}

template LinearSolveResult<double> cg_solve<double>(const SparseOperator<double>&, const Vector<double>&,
                                                    const LinearSolveOptions&, const Preconditioner*);
template LinearSolveResult<cplx> cg_solve<cplx>(const SparseOperator<cplx>&, const Vector<cplx>&,
                                                const LinearSolveOptions&, const Preconditioner*);

LinearSolveResult<cplx> cgnr_solve(const SparseMatrix<cplx>& a, const Vector<cplx>& b,
                                   const LinearSolveOptions& opts) {
  opts.check();
  LinearSolveResult<cplx> out;
  SolveReport& rep = out.report;
  rep.method = "cgnr";
  out.x = Vector<cplx>::Zero(a.cols());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return out;
  }
  const SparseMatrix<cplx> ah = a.adjoint();
  Vector<cplx> r = b;
  Vector<cplx> s = ah * r;
  Vector<cplx> p = s, q;
  double gamma = s.squaredNorm();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    q = a * p;
    const double qq = q.squaredNorm();
    if (qq == 0.0) break;
    const double alpha = gamma / qq;
    out.x += alpha * p;
    r -= alpha * q;
    rep.iterations = it;
    rep.relative_residual = r.norm() / bnorm;
    if (opts.record_history) rep.residual_history.push_back(rep.relative_residual);
    if (rep.relative_residual <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    s = ah * r;
    const double gamma_new = s.squaredNorm();
    p = s + (gamma_new / gamma) * p;
    gamma = gamma_new;
  }
  finish<cplx>(rep, opts);
  return out;
}

LinearSolveResult<cplx> cocg_solve(const SparseMatrix<cplx>& a, const Vector<cplx>& b,
                                   const LinearSolveOptions& opts, const Preconditioner* pc) {
  opts.check();
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("cocg: matrix {}x{} with right-hand side of size {}", a.rows(), a.cols(), b.size()));
  LinearSolveResult<cplx> out;
  SolveReport& rep = out.report;
  rep.method = "cocg";
  out.x = Vector<cplx>::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    return out;
  }
  constexpr double tiny = 1e-14;
  Vector<cplx> r = b, z, p, ap;
  apply_pc(pc, r, z);
  p = z;
  cplx rho = r.transpose() * z;
  double best = 1.0;
  int best_at = 0;
  bool breakdown = false;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    ap = a * p;
    const cplx mu = p.transpose() * ap;
    if (std::abs(mu) <= tiny * p.norm() * ap.norm()) {
      breakdown = true;
      break;
    }
    const cplx alpha = rho / mu;
    out.x += alpha * p;
    r -= alpha * ap;
    const double res = r.norm() / bnorm;
    rep.iterations = it;
    rep.relative_residual = res;
    if (opts.record_history) rep.residual_history.push_back(res);
    if (res <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    if (res < 0.99 * best) {
      best = res;
      best_at = it;
    } else if (it - best_at > kStagnationWindow) {
      breakdown = true;
      break;
    }
    apply_pc(pc, r, z);
    const cplx rho_new = r.transpose() * z;
    if (std::abs(rho_new) <= tiny * r.norm() * z.norm()) {
      breakdown = true;
      break;
    }
    p = z + (rho_new / rho) * p;
    rho = rho_new;
  }

  // The recursive residual can drift from the true one; report the true value.
  if (rep.converged) {
    const double true_res = (b - a * out.x).norm() / bnorm;
    rep.relative_residual = true_res;
    rep.converged = true_res <= 10.0 * opts.tolerance;
    if (!rep.converged) breakdown = true;
  }
  if (breakdown) {
    LinearSolveOptions inner = opts;
    inner.throw_on_failure = false;
    const Vector<cplx> residual = b - a * out.x;
    inner.tolerance = std::min(0.5, opts.tolerance * bnorm / std::max(residual.norm(), 1e-300));
    auto fix = cgnr_solve(a, residual, inner);
    out.x += fix.x;
    rep.method = "cocg+cgnr";
    rep.iterations += fix.report.iterations;
    rep.relative_residual = (b - a * out.x).norm() / bnorm;
    rep.converged = rep.relative_residual <= opts.tolerance;
  }
  finish<cplx>(rep, opts);
  return out;
}

DenseEigen dense_generalized_eigs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m) {
  if (a.rows() != a.cols() || m.rows() != m.cols() || a.rows() != m.rows())
    throw Error(ErrorCode::dimension_mismatch, "dense eigensolve: matrix shapes differ");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, m);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::no_convergence, "dense eigensolve failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace metahom
