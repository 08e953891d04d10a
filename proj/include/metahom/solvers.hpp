#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metahom/discretization.hpp"

namespace metahom {

enum class PreconditionerKind { none, diagonal, multigrid };

const char* to_string(PreconditionerKind kind);
PreconditionerKind preconditioner_from_string(const std::string& name);

struct LinearSolveOptions {
  double tolerance = 1e-10;  // relative residual |b - Ax| / |b|
  int max_iterations = 20000;
  PreconditionerKind preconditioner = PreconditionerKind::multigrid;
  bool record_history = false;
  bool throw_on_failure = true;

  /// Throws ErrorCode::config when a field is out of range.
  void check() const;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
  /// Values of the quadratic energy x^T A x / 2 - b^T x; non-increasing for CG.
  std::vector<double> energy_history;
};

template <class Scalar>
struct LinearSolveResult {
  Vector<Scalar> x;
  SolveReport report;
};

/// Approximate inverse of a real symmetric positive (semi)definite matrix.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const Vector<double>& r, Vector<double>& z) const = 0;

  void apply(const Vector<cplx>& r, Vector<cplx>& z) const;
};

class DiagonalPreconditioner final : public Preconditioner {
 public:
  explicit DiagonalPreconditioner(const SparseMatrix<double>& a);
  using Preconditioner::apply;
  void apply(const Vector<double>& r, Vector<double>& z) const override;

 private:
  Vector<double> inv_diag_;
};

struct MultigridOptions {
  double strength_threshold = 0.25;
  double smoother_weight = 4.0 / 3.0;
  int max_levels = 12;
  Index coarse_size = 400;
};

/// Smoothed-aggregation algebraic multigrid, one symmetric V-cycle per application.
class MultigridPreconditioner final : public Preconditioner {
 public:
  explicit MultigridPreconditioner(const SparseMatrix<double>& a, const MultigridOptions& opts = {});
  ~MultigridPreconditioner() override;
  using Preconditioner::apply;
  void apply(const Vector<double>& r, Vector<double>& z) const override;

  int num_levels() const;
  /// Sum of nonzeros over all levels divided by nonzeros of the fine matrix.
  double operator_complexity() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sparse LDL^T factorization of a symmetric positive definite matrix, usable
/// as an exact preconditioner or solver.
class SparseCholesky final : public Preconditioner {
 public:
  explicit SparseCholesky(const SparseMatrix<double>& a);
  ~SparseCholesky() override;
  using Preconditioner::apply;
  void apply(const Vector<double>& r, Vector<double>& z) const override;
  Vector<double> solve(const Vector<double>& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Preconditioner> make_preconditioner(const SparseMatrix<double>& a, PreconditionerKind kind);

/// Preconditioned conjugate gradients for symmetric (Hermitian) positive
/// semidefinite systems, starting from x = 0. When `pc` is null a
/// preconditioner of kind opts.preconditioner is built for real systems.
template <class Scalar>
LinearSolveResult<Scalar> cg_solve(const SparseOperator<Scalar>& a, const Vector<Scalar>& b,
                                   const LinearSolveOptions& opts, const Preconditioner* pc = nullptr);

/// Conjugate orthogonal conjugate gradients for complex symmetric (non-Hermitian)
/// systems, falling back to CGNR on breakdown or stagnation.
LinearSolveResult<cplx> cocg_solve(const SparseMatrix<cplx>& a, const Vector<cplx>& b,
                                   const LinearSolveOptions& opts, const Preconditioner* pc = nullptr);

/// Conjugate gradients on the normal equations A^H A x = A^H b.
LinearSolveResult<cplx> cgnr_solve(const SparseMatrix<cplx>& a, const Vector<cplx>& b,
                                   const LinearSolveOptions& opts);

enum class EigenStart {
  random,     // seeded Gaussian block
  given,      // opts-supplied block used as the first basis block
  given_load  // supplied block is a load; the first basis block is (A - shift M)^{-1} load
};

struct EigenSolveOptions {
  int num_eigenpairs = 10;
  /// Shift of the spectral transformation; unset picks 0 for definite A and a
  /// small negative value otherwise.
  std::optional<double> shift;
  /// Bound on |A x - lambda M x| / (|M x| max(1, |lambda|)) for every returned pair.
  double tolerance = 1e-8;
  int max_restarts = 60;
  int block_size = 0;  // 0: min(12, num_eigenpairs + 2)
  int max_basis = 0;   // 0: max(3 num_eigenpairs, num_eigenpairs + 8 block_size)
  std::uint64_t seed = 20240611;
  EigenStart start = EigenStart::random;
  /// When the start block is supplied, stay inside the invariant subspace it
  /// generates: no random vectors are injected and the solve ends early,
  /// returning fewer pairs, when that subspace is exhausted.
  bool confine_to_start = false;
  /// Converged pairs x with |F^T x| below purge_tolerance (F = these columns)
  /// are removed from the result and kept out of the search space.
  Eigen::MatrixXd purge_functionals;
  double purge_tolerance = 1e-10;
  /// The wanted set grows past num_eigenpairs over Ritz values within this
  /// relative distance of the last wanted one, so degenerate clusters are
  /// returned whole.
  double cluster_tolerance = 1e-4;
  /// Applied to every new block before orthogonalization, e.g. a projector
  /// onto a known invariant subspace.
  std::function<void(Eigen::MatrixXd&)> project;
  /// Inner solves use a sparse factorization up to this dimension and
  /// multigrid-preconditioned CG above it.
  Index direct_solver_limit = 5000;
  LinearSolveOptions inner{1e-12, 20000, PreconditionerKind::multigrid, false, true};

  void check() const;
};

struct EigenResult {
  Vector<double> eigenvalues;    // ascending
  Eigen::MatrixXd eigenvectors;  // M-orthonormal columns
  Vector<double> residuals;      // |A x - lambda M x| / (|M x| max(1, |lambda|))
  double shift = 0.0;
  int restarts = 0;
  int operator_applications = 0;
  bool converged = false;
  bool exhausted = false;  // invariant subspace of the start block fully explored
  bool cluster_warning = false;
  std::optional<double> next_eigenvalue;  // Ritz value just beyond the returned ones
  int purged = 0;
  Vector<double> purged_eigenvalues;
  std::vector<std::string> warnings;
};

/// Smallest eigenpairs of A x = lambda M x by block shift-and-invert subspace
/// iteration with full M-reorthogonalization and Rayleigh-Ritz on A.
EigenResult eigs_smallest(const SparseOperator<double>& a, const SparseOperator<double>& m,
                          const EigenSolveOptions& opts, const Eigen::MatrixXd& start_block = {});

/// Dense generalized symmetric eigensolve, ascending.
struct DenseEigen {
  Vector<double> eigenvalues;
  Eigen::MatrixXd eigenvectors;
};
DenseEigen dense_generalized_eigs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m);

}  // namespace metahom
