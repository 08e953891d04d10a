#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace metahom {

using Index = Eigen::Index;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using cplx = std::complex<double>;

enum class Symmetry { general, symmetric, hermitian };
enum class Definiteness { indefinite, positive_semidefinite, positive_definite };

/// CSR matrix with the structural annotations the solvers rely on.
template <class Scalar>
struct SparseOperator {
  SparseMatrix<Scalar> matrix;
  Symmetry symmetry = Symmetry::general;
  Definiteness definiteness = Definiteness::indefinite;

  Index rows() const { return matrix.rows(); }
  Index cols() const { return matrix.cols(); }

  template <class Derived>
  auto operator*(const Eigen::MatrixBase<Derived>& x) const {
    return matrix * x;
  }
};

/// Largest relative defect |<Ax,y> - <x,Ay>| / (|Ax||y|) over random trials.
template <class Scalar>
double symmetry_defect(const SparseMatrix<Scalar>& a, int trials, std::uint64_t seed);

/// Uniform n^3 staggered grid on the unit torus.
///
/// Node (i,j,k) sits at (i,j,k) h. Edge (d; i,j,k) joins node (i,j,k) to its
/// neighbour in direction d. Face (d; i,j,k) has normal e_d and spans the
/// positive transverse quadrant from node (i,j,k). Cell (i,j,k) is the cube with
/// lower corner at node (i,j,k) and coincides with voxel (i,j,k).
class PeriodicGrid {
 public:
  explicit PeriodicGrid(int n);

  int n() const { return n_; }
  double h() const { return h_; }
  /// Quadrature weight of every node, edge, face and cell.
  double weight() const { return h_ * h_ * h_; }

  Index num_nodes() const { return count_; }
  Index num_cells() const { return count_; }
  Index num_edges() const { return 3 * count_; }
  Index num_faces() const { return 3 * count_; }

  Index node(int i, int j, int k) const {
    return wrap(i) + static_cast<Index>(n_) * (wrap(j) + static_cast<Index>(n_) * wrap(k));
  }
  Index node(const std::array<int, 3>& c) const { return node(c[0], c[1], c[2]); }
  Index cell(int i, int j, int k) const { return node(i, j, k); }
  Index edge(int d, int i, int j, int k) const { return d * count_ + node(i, j, k); }
  Index face(int d, int i, int j, int k) const { return d * count_ + node(i, j, k); }

  std::array<int, 3> coords(Index node_index) const {
    const int i = static_cast<int>(node_index % n_);
    const int j = static_cast<int>((node_index / n_) % n_);
    const int k = static_cast<int>(node_index / (static_cast<Index>(n_) * n_));
    return {i, j, k};
  }

  Eigen::Vector3d node_position(Index node_index) const;
  Eigen::Vector3d cell_center(Index cell_index) const;
  Eigen::Vector3d edge_midpoint(Index edge_index) const;
  Eigen::Vector3d face_center(Index face_index) const;

  int wrap(int a) const { return ((a % n_) + n_) % n_; }

  friend bool operator==(const PeriodicGrid& a, const PeriodicGrid& b) { return a.n_ == b.n_; }

 private:
  int n_;
  double h_;
  Index count_;
};

/// Forward-difference gradient, nodes -> edges.
SparseOperator<double> build_grad(const PeriodicGrid& grid);
/// Divergence of edge fields, edges -> nodes. Exactly the negative transpose of build_grad.
SparseOperator<double> build_div(const PeriodicGrid& grid);
/// Circulation around primal faces, edges -> faces.
SparseOperator<double> build_curl(const PeriodicGrid& grid);
/// Divergence of face fluxes, faces -> cells.
SparseOperator<double> build_face_div(const PeriodicGrid& grid);
/// Curl of face fields back onto edges, the transpose of build_curl.
SparseOperator<double> build_dual_curl(const PeriodicGrid& grid);
/// Positive nodal Laplacian -div grad.
SparseOperator<double> build_laplacian(const PeriodicGrid& grid);

/// Midpoint quadrature of a nodal or cell scalar field.
template <class Scalar>
Scalar integrate_scalar(const PeriodicGrid& grid, const Vector<Scalar>& field);

/// Componentwise quadrature of an edge (or face) vector field.
template <class Scalar>
Eigen::Matrix<Scalar, 3, 1> integrate_vector(const PeriodicGrid& grid, const Vector<Scalar>& field);

/// Weighted L2 inner product sum w * conj(a) b.
template <class Scalar>
Scalar l2_inner(const PeriodicGrid& grid, const Vector<Scalar>& a, const Vector<Scalar>& b) {
  return grid.weight() * a.dot(b);
}

Vector<double> sample_nodes(const PeriodicGrid& grid, const std::function<double(const Eigen::Vector3d&)>& f);
/// Component d of f at the midpoint of every d-edge.
Vector<double> sample_edges(const PeriodicGrid& grid,
                            const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f);
/// Constant field e_d on the edges.
Vector<double> unit_edge_field(const PeriodicGrid& grid, int d);

/// Caps the worker count used inside matrix-vector products.
void set_num_threads(int threads);

}  // namespace metahom
