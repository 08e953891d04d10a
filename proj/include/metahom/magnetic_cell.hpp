#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metahom/discretization.hpp"
#include "metahom/geometry.hpp"
#include "metahom/solvers.hpp"

namespace metahom {

/// Discrete space of periodic edge fields that are curl-free outside the
/// resonator and have zero circulation. Fields are parametrized by a nodal
/// potential U on the exterior complex (one gauge node removed) and free values
/// on edges whose four adjacent voxels all lie in the resonator:
///   u = grad U on exterior edges,  u = w on interior edges.
struct ConstrainedSpace {
  PeriodicGrid grid{8};
  VoxelMask mask;  // resonator voxels only
  std::vector<char> interior_edge;
  std::vector<char> exterior_node;
  std::vector<Index> potential_nodes;  // exterior nodes carrying a reduced coordinate
  std::vector<Index> interior_edges;
  Index gauge_node = 0;
  SparseMatrix<double> p;  // num_edges x dim

  Index dim() const { return p.cols(); }
  Index num_potential() const { return static_cast<Index>(potential_nodes.size()); }
  Index num_interior() const { return static_cast<Index>(interior_edges.size()); }

  template <class Derived>
  auto lift(const Eigen::MatrixBase<Derived>& reduced) const {
    return p * reduced;
  }
};

ConstrainedSpace build_constrained_space(const PeriodicGrid& grid, const VoxelMask& mask);

/// Curl-curl plus grad-div stiffness and L2 mass on the reduced coordinates.
SparseOperator<double> magnetic_stiffness(const ConstrainedSpace& space);
SparseOperator<double> magnetic_mass(const ConstrainedSpace& space);
/// Columns g_j with g_j^T x = integral of e_j . (P x).
Eigen::MatrixXd moment_functionals(const ConstrainedSpace& space);

/// True for faces adjacent to at least one non-resonator voxel.
std::vector<char> exterior_faces(const PeriodicGrid& grid, const VoxelMask& mask);

struct CirculationLoop {
  int direction = 0;
  std::array<int, 2> transverse{0, 0};  // grid indices along the two transverse axes
};

/// Grid lines of d-edges that touch no resonator voxel, in lexicographic order.
std::vector<CirculationLoop> admissible_loops(const PeriodicGrid& grid, const VoxelMask& mask, int direction);

template <class Scalar>
struct CirculationResult {
  Eigen::Matrix<Scalar, 3, 1> value;
  /// Largest difference between loops of the same direction.
  double spread = 0.0;
  bool loops_agree = true;
  /// max |curl u| over exterior faces, relative to max |u| / h.
  double curl_residual = 0.0;
  bool curl_free = true;
  std::array<std::vector<CirculationLoop>, 3> loops;
  std::vector<std::string> warnings;
};

/// Line integrals of u along three well-separated admissible loops per
/// direction. Throws ErrorCode::no_admissible_loop when a direction has none.
template <class Scalar>
CirculationResult<Scalar> circulation(const Vector<Scalar>& u, const PeriodicGrid& grid, const VoxelMask& mask);

enum class SpectrumTarget {
  lowest,  // smallest eigenpairs of the whole constrained space
  bright   // smallest eigenpairs of the invariant subspace reached by the moment functionals
};

struct MagneticSpectrum {
  Vector<double> eigenvalues;
  Eigen::MatrixXd modes;    // reduced coordinates, M-orthonormal columns
  Eigen::MatrixXd moments;  // 3 x num_modes, integral of each mode
  std::vector<char> bright;
  Vector<double> residuals;
  int num_modes = 0;
  // Moments of M-orthonormal modes satisfy sum |m|^2 <= 1; modes below the
  // cutoff carry weight under 1e-12 and are treated as dark.
  double dark_cutoff = 1e-6;
  SpectrumTarget target = SpectrumTarget::bright;
  bool cluster_warning = false;
  bool exhausted = false;
  int purged = 0;  // dark pairs removed from the bright search
  std::optional<double> next_eigenvalue;
  /// Sum of m m^T over every mode of the discrete space.
  Eigen::Matrix3d total_moment_gram = Eigen::Matrix3d::Zero();
  std::vector<std::string> warnings;
};

MagneticSpectrum solve_magnetic_spectrum(const ConstrainedSpace& space, const EigenSolveOptions& opts,
                                         SpectrumTarget target = SpectrumTarget::bright);

struct MuEffOptions {
  double pole_guard = 1e-8;  // relative distance |lambda - q| / lambda
  double truncation_tolerance = 1e-4;
};

struct MuEffResult {
  Eigen::Matrix3cd mu = Eigen::Matrix3cd::Identity();
  /// Frobenius norm of the last bright term included.
  double truncation_residual = 0.0;
  /// Bound on the omitted modes from the unexplained moment mass, infinite when
  /// |q| exceeds the next eigenvalue.
  double tail_bound = 0.0;
  bool truncation_warning = false;
  int bright_modes_used = 0;
};

/// mu = I + sum_n q / (lambda_n - q) m_n m_n^T over the bright modes. Throws
/// ErrorCode::pole_proximity for real q within the pole guard of a bright eigenvalue.
MuEffResult mu_eff_spectral(const MagneticSpectrum& spec, cplx q, const MuEffOptions& opts = {});

struct MagneticCellSolution {
  cplx q;
  cplx omega;
  std::array<Vector<cplx>, 3> h_fields;  // edges
  std::array<Vector<cplx>, 3> j_fields;  // faces
  Eigen::Matrix3cd mu = Eigen::Matrix3cd::Identity();
  std::vector<SolveReport> reports;
};

/// Solves (K - q M) x_j = q g_j for H^j = e_j + P x_j and mu_ij = e_i . integral H^j.
/// J^j = i curl H^j / (omega eps0) with omega^2 = q / (eps_b eps0 mu0).
MagneticCellSolution solve_magnetic_direct(const ConstrainedSpace& space, cplx q, const LinearSolveOptions& opts,
                                           const MaterialParams& materials = {});
MagneticCellSolution solve_magnetic_direct(const CellGeometry& geom, const PeriodicGrid& grid, cplx q,
                                           const LinearSolveOptions& opts, const MaterialParams& materials = {});

/// Brute-force reference built without the parametrization: the null space of
/// the exterior curl stacked with the circulation functionals, and the dense
/// eigenvalues of the curl-curl plus grad-div form on it.
struct DenseConstrainedOracle {
  Index nullspace_dim = 0;
  Vector<double> eigenvalues;
  Eigen::MatrixXd moments;  // 3 x nullspace_dim
};

DenseConstrainedOracle dense_constrained_oracle(const PeriodicGrid& grid, const VoxelMask& mask,
                                                bool compute_eigenvalues = true);

}  // namespace metahom
