#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "metahom/electric_cell.hpp"
#include "metahom/error.hpp"
#include "metahom/magnetic_cell.hpp"

using namespace metahom;

namespace {

CellGeometry ball(double r) {
  CellGeometry g;
  g.resonator = Ball{Eigen::Vector3d::Constant(0.5), r};
  return g;
}

// Ball with three wires, pairwise clear of each other and of the ball.
CellGeometry wired_ball(double alpha) {
  CellGeometry g = ball(0.3);
  g.wire_radius = alpha;
  Wire w;
  w.direction = 0;
  w.position = {0.05, 0.55};
  g.wires.push_back(w);
  w.direction = 1;
  w.position = {0.55, 0.05};
  g.wires.push_back(w);
  w.direction = 2;
  w.position = {0.05, 0.55};
  g.wires.push_back(w);
  return g;
}

}  // namespace

TEST(ElectricCell, EmptyResonatorGivesIdentity) {
  const PeriodicGrid grid(12);
  const ElectricCellSolution s = solve_electric_cell(CellGeometry{}, grid, {});
  EXPECT_LE((s.a_eff - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 0; j < 3; ++j) {
    const auto& th = s.theta[static_cast<std::size_t>(j)];
    EXPECT_LE(th.maxCoeff() - th.minCoeff(), 1e-12);
    EXPECT_LE((s.e_fields[static_cast<std::size_t>(j)] - unit_edge_field(grid, j)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ElectricCell, BallInvariants) {
  const PeriodicGrid grid(24);
  const ElectricCellSolution s = solve_electric_cell(ball(0.25), grid, {});
  const Eigen::Matrix3d a = s.a_eff.real();
  EXPECT_LE(s.a_eff.imag().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(a - Eigen::Matrix3d::Identity()).eigenvalues().minCoeff();
  EXPECT_GE(min_eig, -1e-10);
  // Cubic symmetry forces an isotropic tensor.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        EXPECT_LE(std::abs(a(i, j)), 1e-6 * a(0, 0));
      }
  EXPECT_NEAR(a(1, 1), a(0, 0), 1e-9);
  EXPECT_NEAR(a(2, 2), a(0, 0), 1e-9);
  // Energy identity through two assembly paths.
  EXPECT_LE((a - a_eff_from_gradients(s, grid)).cwiseAbs().maxCoeff(), 1e-10 * a.norm());
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[j] = 1.0;
    EXPECT_LE((integrate_vector<double>(grid, s.e_fields[static_cast<std::size_t>(j)]) - e).norm(), 1e-12);
    EXPECT_NEAR(dirichlet_energy(grid, s.theta[static_cast<std::size_t>(j)]) + 1.0, a(j, j), 1e-9);
  }
}

TEST(ElectricCell, BoxIsAnisotropic) {
  CellGeometry g;
  g.resonator = Box{Eigen::Vector3d::Constant(0.5), {0.3, 0.1, 0.1}};
  const ElectricCellSolution s = solve_electric_cell(g, PeriodicGrid(16), {});
  EXPECT_GT(s.a_eff(0, 0).real(), s.a_eff(1, 1).real() + 1e-3);
}

TEST(ElectricCell, SolutionMinimizesEnergy) {
  const PeriodicGrid grid(12);
  const CellGeometry g = ball(0.25);
  const ElectricCellSolution s = solve_electric_cell(g, grid, {});
  const std::vector<char> fixed = closure_nodes(grid, [&](Index c) { return s.mask.at(static_cast<std::size_t>(c)) == Label::resonator; });
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Vector<double> d(grid.num_nodes());
    for (Index v = 0; v < d.size(); ++v) d[v] = fixed[static_cast<std::size_t>(v)] ? 0.0 : 1e-3 * nd(rng);
    for (std::size_t j = 0; j < 3; ++j) {
      const double e0 = dirichlet_energy(grid, s.theta[j]);
      EXPECT_GE(dirichlet_energy(grid, s.theta[j] + d), e0 - 1e-14 * e0);
    }
  }
}

TEST(ElectricCell, DirichletDataOnResonator) {
  const PeriodicGrid grid(16);
  const ElectricCellSolution s = solve_electric_cell(ball(0.25), grid, {});
  const std::vector<char> fixed = closure_nodes(grid, [&](Index c) { return s.mask.at(static_cast<std::size_t>(c)) == Label::resonator; });
  for (Index v = 0; v < grid.num_nodes(); ++v) {
    if (!fixed[static_cast<std::size_t>(v)]) continue;
    const Eigen::Vector3d y = grid.node_position(v) - s.chart_origin;
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(s.theta[static_cast<std::size_t>(j)][v], -y[j], 1e-12);
  }
}

TEST(ElectricCell, WiresAreIgnored) {
  const PeriodicGrid grid(16);
  const ElectricCellSolution a = solve_electric_cell(ball(0.3), grid, {});
  const ElectricCellSolution b = solve_electric_cell(wired_ball(0.1), grid, {});
  EXPECT_EQ(a.a_eff, b.a_eff);
}

TEST(ElectricCell, CirculationOfEIsUnitVector) {
  const PeriodicGrid grid(16);
  const ElectricCellSolution s = solve_electric_cell(ball(0.25), grid, {});
  for (int j = 0; j < 3; ++j) {
    const CirculationResult<double> c = circulation<double>(s.e_fields[static_cast<std::size_t>(j)], grid, s.mask);
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[j] = 1.0;
    EXPECT_LE((c.value - e).norm(), 1e-8);
    EXPECT_TRUE(c.loops_agree);
  }
}

TEST(ThetaEta, NoWiresReproducesCellSolution) {
  const PeriodicGrid grid(16);
  const CellGeometry g = ball(0.25);
  const ElectricCellSolution cell = solve_electric_cell(g, grid, {});
  const ThetaEtaSolution th = solve_theta_eta(g, grid, 0.5, {});
  for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(l2_norm(grid, th.vth_eta[j] - cell.e_fields[j]), 1e-8);
}

TEST(ThetaEta, ErrorDecreasesAndEnergyOrdered) {
  const PeriodicGrid grid(48);
  const CellGeometry g = wired_ball(0.1);
  const ElectricCellSolution cell = solve_electric_cell(g, grid, {});
  std::array<double, 3> prev;
  prev.fill(1e300);
  for (double eta : {0.5, 0.25, 0.125}) {
    const ThetaEtaSolution th = solve_theta_eta(g, grid, eta, {});
    EXPECT_DOUBLE_EQ(th.wire_radius, 0.1 * eta);
    for (std::size_t j = 0; j < 3; ++j) {
      const double err = l2_norm(grid, th.vth_eta[j] - cell.e_fields[j]);
      EXPECT_LT(err, prev[j]) << "eta " << eta << " direction " << j;
      prev[j] = err;
      EXPECT_LE(dirichlet_energy(grid, cell.theta[j]), dirichlet_energy(grid, th.theta_eta[j]));
    }
  }
}

TEST(ThetaEta, UnresolvedWireReportsResolution) {
  CellGeometry g = wired_ball(0.02);
  try {
    solve_theta_eta(g, PeriodicGrid(8), 0.5, {});
    FAIL() << "expected a resolution error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::resolution);
  }
}

TEST(DirichletEnergy, ConstantFieldHasZeroEnergy) {
  const PeriodicGrid grid(8);
  EXPECT_EQ(dirichlet_energy(grid, Vector<double>::Constant(grid.num_nodes(), 3.0)), 0.0);
}
