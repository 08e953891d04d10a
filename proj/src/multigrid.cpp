#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "metahom/error.hpp"
#include "metahom/solvers.hpp"

namespace metahom {

namespace {

using Mat = SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr Index kUnassigned = -1;

// Greedy aggregation over the strength-of-connection graph. A connection is
// strong when it is within a factor theta of the largest off-diagonal in its row.
std::vector<Index> aggregate(const Mat& a, double theta, Index& num_aggregates) {
  const Index n = a.rows();
  std::vector<std::vector<Index>> strong(n);
  for (Index i = 0; i < n; ++i) {
    double row_max = 0.0;
    for (Mat::InnerIterator it(a, i); it; ++it)
      if (it.col() != i) row_max = std::max(row_max, std::abs(it.value()));
    if (row_max == 0.0) continue;
    for (Mat::InnerIterator it(a, i); it; ++it)
      if (it.col() != i && std::abs(it.value()) >= theta * row_max) strong[i].push_back(it.col());
  }

  std::vector<Index> agg(n, kUnassigned);
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    if (agg[i] != kUnassigned || strong[i].empty()) continue;
    const bool free = std::all_of(strong[i].begin(), strong[i].end(), [&](Index j) { return agg[j] == kUnassigned; });
    if (!free) continue;
    agg[i] = count;
    for (Index j : strong[i]) agg[j] = count;
    ++count;
  }
  const std::vector<Index> first = agg;
  for (Index i = 0; i < n; ++i) {
    if (agg[i] != kUnassigned) continue;
    for (Index j : strong[i])
      if (first[j] != kUnassigned) {
        agg[i] = first[j];
        break;
      }
  }
  for (Index i = 0; i < n; ++i) {
    if (agg[i] != kUnassigned) continue;
    agg[i] = count;
    for (Index j : strong[i])
      if (agg[j] == kUnassigned) agg[j] = count;
    ++count;
  }
  num_aggregates = count;
  return agg;
}

double spectral_radius_estimate(const Mat& a, const Vector<double>& inv_diag) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist;
  Vector<double> v(a.rows());
  for (Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
  double rho = 1.0;
  for (int k = 0; k < 15; ++k) {
    v /= v.norm();
    Vector<double> w = inv_diag.cwiseProduct(a * v);
    rho = w.norm();
    v = w;
  }
  return rho;
}

}  // namespace

struct MultigridPreconditioner::Impl {
  struct Level {
    Mat a;
    Vector<double> inv_diag;
    Mat p;  // prolongation to this level from the next coarser one
    Mat r;  // restriction, transpose of p
  };
  std::vector<Level> levels;
  Eigen::MatrixXd coarse_pinv;
  bool dense_coarse = true;
  double complexity = 1.0;

  void smooth_forward(const Level& l, const Vector<double>& b, Vector<double>& x) const {
    for (Index i = 0; i < l.a.rows(); ++i) {
      double s = b[i];
      for (Mat::InnerIterator it(l.a, i); it; ++it)
        if (it.col() != i) s -= it.value() * x[it.col()];
      x[i] = s * l.inv_diag[i];
    }
  }

  void smooth_backward(const Level& l, const Vector<double>& b, Vector<double>& x) const {
    for (Index i = l.a.rows() - 1; i >= 0; --i) {
      double s = b[i];
      for (Mat::InnerIterator it(l.a, i); it; ++it)
        if (it.col() != i) s -= it.value() * x[it.col()];
      x[i] = s * l.inv_diag[i];
    }
  }

  void cycle(std::size_t k, const Vector<double>& b, Vector<double>& x) const {
    if (k + 1 == levels.size()) {
      if (dense_coarse) {
        x = coarse_pinv * b;
      } else {
        x = Vector<double>::Zero(b.size());
        for (int s = 0; s < 4; ++s) {
          smooth_forward(levels[k], b, x);
          smooth_backward(levels[k], b, x);
        }
      }
      return;
    }
    const Level& l = levels[k];
    x = Vector<double>::Zero(b.size());
    smooth_forward(l, b, x);
    const Vector<double> rc = levels[k + 1].r * (b - l.a * x);
    Vector<double> xc;
    cycle(k + 1, rc, xc);
    x += levels[k + 1].p * xc;
    smooth_backward(l, b, x);
  }
};

MultigridPreconditioner::MultigridPreconditioner(const SparseMatrix<double>& a, const MultigridOptions& opts)
    : impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::dimension_mismatch, "multigrid: matrix is not square");
  const double fine_nnz = static_cast<double>(a.nonZeros());
  double total_nnz = fine_nnz;

  Impl::Level fine;
  fine.a = a;
  impl_->levels.push_back(std::move(fine));

  while (static_cast<int>(impl_->levels.size()) < opts.max_levels) {
    Impl::Level& cur = impl_->levels.back();
    const Vector<double> diag = cur.a.diagonal();
    cur.inv_diag = diag.unaryExpr([](double d) { return d != 0.0 ? 1.0 / d : 0.0; });
    if (cur.a.rows() <= opts.coarse_size) break;

    Index nagg = 0;
    const std::vector<Index> agg = aggregate(cur.a, opts.strength_threshold, nagg);
    if (nagg == 0 || nagg >= cur.a.rows() * 9 / 10) break;

    std::vector<Index> sizes(nagg, 0);
    for (Index g : agg) ++sizes[g];
    std::vector<Triplet> t;
    t.reserve(agg.size());
    for (Index i = 0; i < static_cast<Index>(agg.size()); ++i)
      t.emplace_back(i, agg[i], 1.0 / std::sqrt(static_cast<double>(sizes[agg[i]])));
    Mat tentative(cur.a.rows(), nagg);
    tentative.setFromTriplets(t.begin(), t.end());

    const double rho = spectral_radius_estimate(cur.a, cur.inv_diag);
    const double omega = opts.smoother_weight / rho;
    Mat smoothed = Mat(cur.inv_diag.asDiagonal() * cur.a) * tentative;
    Mat p = tentative - omega * smoothed;
    p.prune(1e-14, 1.0);

    Impl::Level next;
    next.p = p;
    next.r = p.transpose();
    next.a = Mat(next.r * cur.a) * p;
    next.a.prune(1e-14, 1.0);
    next.a.makeCompressed();
    total_nnz += static_cast<double>(next.a.nonZeros());
    impl_->levels.push_back(std::move(next));
  }

  Impl::Level& coarse = impl_->levels.back();
  if (coarse.inv_diag.size() != coarse.a.rows())
    coarse.inv_diag = Vector<double>(coarse.a.diagonal()).unaryExpr([](double d) { return d != 0.0 ? 1.0 / d : 0.0; });
  impl_->complexity = total_nnz / std::max(fine_nnz, 1.0);
  // Coarsening stalled on a large matrix: relax on the coarsest level instead.
  if (coarse.a.rows() > 4000) {
    impl_->dense_coarse = false;
    return;
  }
  const Eigen::MatrixXd dense = Eigen::MatrixXd(coarse.a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (dense + dense.transpose()));
  const Vector<double> ev = es.eigenvalues();
  const double cut = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vector<double> inv = ev.unaryExpr([cut](double l) { return std::abs(l) > cut ? 1.0 / l : 0.0; });
  impl_->coarse_pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

MultigridPreconditioner::~MultigridPreconditioner() = default;

void MultigridPreconditioner::apply(const Vector<double>& r, Vector<double>& z) const { impl_->cycle(0, r, z); }

int MultigridPreconditioner::num_levels() const { return static_cast<int>(impl_->levels.size()); }

double MultigridPreconditioner::operator_complexity() const { return impl_->complexity; }

}  // namespace metahom
