#include "metahom/discretization.hpp"

#include <random>
#include <vector>

#include <fmt/format.h>

#include "metahom/error.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace metahom {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseOperator<double> make_operator(Index rows, Index cols, const std::vector<Triplet>& t, Symmetry sym,
                                     Definiteness def) {
  SparseOperator<double> op;
  op.matrix.resize(rows, cols);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.makeCompressed();
  op.symmetry = sym;
  op.definiteness = def;
  return op;
}

template <class Scalar>
Vector<Scalar> random_vector(Index size, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Vector<Scalar> v(size);
  for (Index i = 0; i < size; ++i) {
    if constexpr (std::is_same_v<Scalar, double>)
      v[i] = dist(rng);
    else
      v[i] = Scalar(dist(rng), dist(rng));
  }
  return v;
}

}  // namespace

PeriodicGrid::PeriodicGrid(int n) : n_(n), h_(1.0 / n), count_(static_cast<Index>(n) * n * n) {
  if (n < 2) throw Error(ErrorCode::resolution, fmt::format("grid size {} too small", n));
}

Eigen::Vector3d PeriodicGrid::node_position(Index node_index) const {
  const auto c = coords(node_index);
  return {c[0] * h_, c[1] * h_, c[2] * h_};
}

Eigen::Vector3d PeriodicGrid::cell_center(Index cell_index) const {
  return node_position(cell_index) + Eigen::Vector3d::Constant(0.5 * h_);
}

Eigen::Vector3d PeriodicGrid::edge_midpoint(Index edge_index) const {
  const int d = static_cast<int>(edge_index / count_);
  Eigen::Vector3d p = node_position(edge_index % count_);
  p[d] += 0.5 * h_;
  return p;
}

Eigen::Vector3d PeriodicGrid::face_center(Index face_index) const {
  const int d = static_cast<int>(face_index / count_);
  Eigen::Vector3d p = node_position(face_index % count_) + Eigen::Vector3d::Constant(0.5 * h_);
  p[d] -= 0.5 * h_;
  return p;
}

SparseOperator<double> build_grad(const PeriodicGrid& g) {
  const double s = 1.0 / g.h();
  std::vector<Triplet> t;
  t.reserve(2 * g.num_edges());
  const int n = g.n();
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          std::array<int, 3> p{i, j, k}, q{i, j, k};
          ++q[d];
          const Index e = g.edge(d, i, j, k);
          t.emplace_back(e, g.node(q), s);
          t.emplace_back(e, g.node(p), -s);
        }
  return make_operator(g.num_edges(), g.num_nodes(), t, Symmetry::general, Definiteness::indefinite);
}

SparseOperator<double> build_div(const PeriodicGrid& g) {
  SparseOperator<double> op;
  op.matrix = -SparseMatrix<double>(build_grad(g).matrix.transpose());
  op.matrix.makeCompressed();
  return op;
}

SparseOperator<double> build_curl(const PeriodicGrid& g) {
  const double s = 1.0 / g.h();
  std::vector<Triplet> t;
  t.reserve(4 * g.num_faces());
  const int n = g.n();
  for (int d = 0; d < 3; ++d) {
    const int b = (d + 1) % 3, c = (d + 2) % 3;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const std::array<int, 3> p{i, j, k};
          auto shifted = [&](int axis) {
            auto q = p;
            ++q[axis];
            return q;
          };
          const Index f = g.face(d, i, j, k);
          // d_b u_c - d_c u_b
          t.emplace_back(f, g.edge(c, shifted(b)[0], shifted(b)[1], shifted(b)[2]), s);
          t.emplace_back(f, g.edge(c, i, j, k), -s);
          t.emplace_back(f, g.edge(b, shifted(c)[0], shifted(c)[1], shifted(c)[2]), -s);
          t.emplace_back(f, g.edge(b, i, j, k), s);
        }
  }
  return make_operator(g.num_faces(), g.num_edges(), t, Symmetry::general, Definiteness::indefinite);
}

SparseOperator<double> build_face_div(const PeriodicGrid& g) {
  const double s = 1.0 / g.h();
  std::vector<Triplet> t;
  t.reserve(2 * g.num_faces());
  const int n = g.n();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Index c = g.cell(i, j, k);
        for (int d = 0; d < 3; ++d) {
          std::array<int, 3> q{i, j, k};
          ++q[d];
          t.emplace_back(c, g.face(d, q[0], q[1], q[2]), s);
          t.emplace_back(c, g.face(d, i, j, k), -s);
        }
      }
  return make_operator(g.num_cells(), g.num_faces(), t, Symmetry::general, Definiteness::indefinite);
}

SparseOperator<double> build_dual_curl(const PeriodicGrid& g) {
  SparseOperator<double> op;
  op.matrix = SparseMatrix<double>(build_curl(g).matrix.transpose());
  op.matrix.makeCompressed();
  return op;
}

SparseOperator<double> build_laplacian(const PeriodicGrid& g) {
  const auto grad = build_grad(g).matrix;
  SparseOperator<double> op;
  op.matrix = SparseMatrix<double>(grad.transpose()) * grad;
  op.matrix.makeCompressed();
  op.symmetry = Symmetry::symmetric;
  op.definiteness = Definiteness::positive_semidefinite;
  return op;
}

template <class Scalar>
double symmetry_defect(const SparseMatrix<Scalar>& a, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector<Scalar> x = random_vector<Scalar>(a.cols(), rng);
    const Vector<Scalar> y = random_vector<Scalar>(a.rows(), rng);
    const Vector<Scalar> ax = a * x, ay = a * y;
    const Scalar lhs = y.dot(ax);
    const Scalar rhs = ay.dot(x);
    const double scale = ax.norm() * y.norm() + ay.norm() * x.norm();
    worst = std::max(worst, std::abs(lhs - rhs) / (scale > 0 ? scale : 1.0));
  }
  return worst;
}

template double symmetry_defect<double>(const SparseMatrix<double>&, int, std::uint64_t);
template double symmetry_defect<cplx>(const SparseMatrix<cplx>&, int, std::uint64_t);

template <class Scalar>
Scalar integrate_scalar(const PeriodicGrid& grid, const Vector<Scalar>& field) {
  if (field.size() != grid.num_nodes())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("scalar field has {} entries, grid has {} nodes", field.size(), grid.num_nodes()));
  return grid.weight() * field.sum();
}

template <class Scalar>
Eigen::Matrix<Scalar, 3, 1> integrate_vector(const PeriodicGrid& grid, const Vector<Scalar>& field) {
  if (field.size() != grid.num_edges())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("vector field has {} entries, grid has {} edges", field.size(), grid.num_edges()));
  const Index m = grid.num_nodes();
  Eigen::Matrix<Scalar, 3, 1> out;
  for (int d = 0; d < 3; ++d) out[d] = grid.weight() * field.segment(d * m, m).sum();
  return out;
}

template double integrate_scalar<double>(const PeriodicGrid&, const Vector<double>&);
template cplx integrate_scalar<cplx>(const PeriodicGrid&, const Vector<cplx>&);
template Eigen::Matrix<double, 3, 1> integrate_vector<double>(const PeriodicGrid&, const Vector<double>&);
template Eigen::Matrix<cplx, 3, 1> integrate_vector<cplx>(const PeriodicGrid&, const Vector<cplx>&);

Vector<double> sample_nodes(const PeriodicGrid& grid, const std::function<double(const Eigen::Vector3d&)>& f) {
  Vector<double> v(grid.num_nodes());
  for (Index i = 0; i < v.size(); ++i) v[i] = f(grid.node_position(i));
  return v;
}

Vector<double> sample_edges(const PeriodicGrid& grid,
                            const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f) {
  Vector<double> v(grid.num_edges());
  const Index m = grid.num_nodes();
  for (Index e = 0; e < v.size(); ++e) v[e] = f(grid.edge_midpoint(e))[e / m];
  return v;
}

Vector<double> unit_edge_field(const PeriodicGrid& grid, int d) {
  Vector<double> v = Vector<double>::Zero(grid.num_edges());
  v.segment(d * grid.num_nodes(), grid.num_nodes()).setOnes();
  return v;
}

void set_num_threads(int threads) {
  if (threads < 1) threads = 1;
  Eigen::setNbThreads(threads);
#if defined(_OPENMP)
  omp_set_num_threads(threads);
#endif
}

}  // namespace metahom
