#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "metahom/discretization.hpp"
#include "metahom/geometry.hpp"
#include "metahom/solvers.hpp"

namespace metahom {

/// Nodes carrying Dirichlet data and their values; nodes not fixed are unknowns.
struct DirichletData {
  std::vector<char> fixed;
  Vector<double> values;
};

/// Discrete harmonic extension: minimizes |grad U|^2 over nodal fields equal to
/// `data` on the fixed nodes. One matrix and preconditioner are shared by all
/// right-hand sides.
std::vector<Vector<double>> harmonic_extension(const PeriodicGrid& grid, const std::vector<DirichletData>& data,
                                               const LinearSolveOptions& opts,
                                               std::vector<SolveReport>* reports = nullptr);

/// Marks every node that touches a voxel satisfying `pred`.
template <class Pred>
std::vector<char> closure_nodes(const PeriodicGrid& grid, Pred pred) {
  const int n = grid.n();
  std::vector<char> out(static_cast<std::size_t>(grid.num_nodes()), 0);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (!pred(grid.cell(i, j, k))) continue;
        for (int c = 0; c < 2; ++c)
          for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) out[static_cast<std::size_t>(grid.node(i + a, j + b, k + c))] = 1;
      }
  return out;
}

struct ElectricCellSolution {
  int n = 0;
  VoxelMask mask;
  /// Point the Dirichlet data y is measured from.
  Eigen::Vector3d chart_origin = Eigen::Vector3d::Constant(0.5);
  std::array<Vector<double>, 3> theta;     // nodal potentials
  std::array<Vector<double>, 3> e_fields;  // edge fields grad theta + e_j
  Eigen::Matrix3cd a_eff = Eigen::Matrix3cd::Identity();
  std::vector<SolveReport> reports;
};

/// Solves for the three potentials equal to -(y - c)_j on the closed resonator
/// and harmonic elsewhere (wires ignored), then assembles A_ij = integral E^i . E^j.
ElectricCellSolution solve_electric_cell(const CellGeometry& geom, const PeriodicGrid& grid,
                                         const LinearSolveOptions& opts);

/// Same solve for a given resonator mask; `chart_origin` is the point y is measured from.
ElectricCellSolution solve_electric_cell(const VoxelMask& mask, const Eigen::Vector3d& chart_origin,
                                         const PeriodicGrid& grid, const LinearSolveOptions& opts);

/// A_ij recomputed as delta_ij + integral grad theta^i . grad theta^j.
Eigen::Matrix3d a_eff_from_gradients(const ElectricCellSolution& sol, const PeriodicGrid& grid);

struct ThetaEtaSolution {
  double eta = 0.0;
  double wire_radius = 0.0;  // alpha * eta, cell units
  VoxelMask mask;
  std::array<Vector<double>, 3> theta_eta;
  std::array<Vector<double>, 3> vth_eta;  // grad theta_eta + e_j
  std::vector<SolveReport> reports;
};

/// Potentials equal to -y_j on the resonator and on wires i != j, equal to 0 on
/// wire j, with wires of radius alpha * eta. Throws ErrorCode::resolution when a
/// scaled wire covers no voxel, or when wires share nodes with conflicting data.
ThetaEtaSolution solve_theta_eta(const CellGeometry& geom, const PeriodicGrid& grid, double eta,
                                 const LinearSolveOptions& opts);

/// Integral of |grad U|^2.
double dirichlet_energy(const PeriodicGrid& grid, const Vector<double>& field);

/// L2 norm of an edge or nodal field.
double l2_norm(const PeriodicGrid& grid, const Vector<double>& field);

}  // namespace metahom
