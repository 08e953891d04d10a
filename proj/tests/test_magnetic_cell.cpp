#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "metahom/error.hpp"
#include "metahom/magnetic_cell.hpp"

using namespace metahom;

namespace {

VoxelMask ball_mask(double r, int n) {
  CellGeometry g;
  g.resonator = Ball{Eigen::Vector3d::Constant(0.5), r};
  return rasterize(g, n).only(Label::resonator);
}

Vector<double> random_reduced(Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector<double> x(dim);
  for (auto& v : x) v = nd(rng);
  return x;
}

// Bright spectrum of a ball, shared by the tests below.
const MagneticSpectrum& ball_spectrum_n12() {
  static const MagneticSpectrum spec = [] {
    const ConstrainedSpace space = build_constrained_space(PeriodicGrid(12), ball_mask(0.3, 12));
    return solve_magnetic_spectrum(space, EigenSolveOptions{});
  }();
  return spec;
}

}  // namespace

TEST(ConstrainedSpace, EmptyResonatorIsGradients) {
  const ConstrainedSpace s = build_constrained_space(PeriodicGrid(8), VoxelMask(8));
  EXPECT_EQ(s.dim(), 511);
  EXPECT_EQ(s.num_interior(), 0);
  EXPECT_LE(moment_functionals(s).norm(), 1e-14);
}

TEST(ConstrainedSpace, RangeIsCurlFreeOutsideWithZeroCirculation) {
  const PeriodicGrid grid(12);
  const VoxelMask mask = ball_mask(0.3, 12);
  const ConstrainedSpace s = build_constrained_space(grid, mask);
  EXPECT_GT(s.num_interior(), 0);
  const std::vector<char> ext = exterior_faces(grid, mask);
  const SparseMatrix<double> curl = build_curl(grid).matrix;
  for (int t = 0; t < 20; ++t) {
    const Vector<double> u = s.lift(random_reduced(s.dim(), 100 + t));
    const Vector<double> cu = curl * u;
    double worst = 0.0;
    for (Index f = 0; f < cu.size(); ++f)
      if (ext[static_cast<std::size_t>(f)]) worst = std::max(worst, std::abs(cu[f]));
    EXPECT_LE(worst, 1e-10 * u.cwiseAbs().maxCoeff() / grid.h());
    const CirculationResult<double> c = circulation<double>(u, grid, mask);
    EXPECT_LE(c.value.norm(), 1e-10 * u.cwiseAbs().maxCoeff());
    EXPECT_TRUE(c.curl_free);
  }
}

TEST(Circulation, ConstantAndGradientFields) {
  const PeriodicGrid grid(8);
  const VoxelMask mask = ball_mask(0.25, 8);
  Vector<double> u = 2.0 * unit_edge_field(grid, 0) - 0.5 * unit_edge_field(grid, 2);
  EXPECT_LE((circulation<double>(u, grid, mask).value - Eigen::Vector3d(2.0, 0.0, -0.5)).norm(), 1e-13);
  const Vector<double> gu = build_grad(grid) * random_reduced(grid.num_nodes(), 3);
  EXPECT_LE(circulation<double>(gu, grid, mask).value.norm(), 1e-12);
}

TEST(Circulation, BlockedDirectionThrows) {
  // A slab normal to z meets every line of z-edges.
  VoxelMask mask(8);
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 8; ++i) mask.set(mask.index(i, j, 4), Label::resonator);
  const PeriodicGrid grid(8);
  try {
    circulation<double>(unit_edge_field(grid, 2), grid, mask);
    FAIL() << "expected no_admissible_loop";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::no_admissible_loop);
  }
}

TEST(MagneticSpectrum, MatchesDenseOracle) {
  const PeriodicGrid grid(8);
  const VoxelMask mask = ball_mask(0.3, 8);
  const ConstrainedSpace s = build_constrained_space(grid, mask);
  const DenseConstrainedOracle o = dense_constrained_oracle(grid, mask);
  EXPECT_EQ(s.dim(), o.nullspace_dim);
  EigenSolveOptions eo;
  eo.num_eigenpairs = 10;
  const MagneticSpectrum spec = solve_magnetic_spectrum(s, eo, SpectrumTarget::lowest);
  ASSERT_GE(spec.num_modes, 10);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(spec.eigenvalues[k] / o.eigenvalues[k], 1.0, 1e-8) << k;
  const Eigen::MatrixXd gram = spec.modes.transpose() * magnetic_mass(s).matrix * spec.modes;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(MagneticSpectrum, EmptyResonatorHasNoBrightModes) {
  const ConstrainedSpace s = build_constrained_space(PeriodicGrid(8), VoxelMask(8));
  const MagneticSpectrum spec = solve_magnetic_spectrum(s, EigenSolveOptions{});
  EXPECT_EQ(spec.num_modes, 0);
  const MuEffResult r = mu_eff_spectral(spec, cplx(30.0, 2.0));
  EXPECT_EQ(r.mu, Eigen::Matrix3cd::Identity());
}

TEST(MagneticSpectrum, BrightInvariants) {
  const MagneticSpectrum& spec = ball_spectrum_n12();
  ASSERT_GE(spec.num_modes, 10);
  EXPECT_LE(spec.residuals.maxCoeff(), 1e-8);
  for (int k = 1; k < spec.num_modes; ++k) EXPECT_LE(spec.eigenvalues[k - 1], spec.eigenvalues[k]);
  EXPECT_GT(spec.eigenvalues[0], 0.0);
  // The first bright cluster of a ball is a triple with equal moment magnitudes.
  EXPECT_NEAR(spec.eigenvalues[1] / spec.eigenvalues[0], 1.0, 1e-8);
  EXPECT_NEAR(spec.eigenvalues[2] / spec.eigenvalues[0], 1.0, 1e-8);
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) gram += spec.moments.col(k) * spec.moments.col(k).transpose();
  EXPECT_LE((gram - gram.trace() / 3.0 * Eigen::Matrix3d::Identity()).norm(), 1e-6 * gram.trace());
  // Captured moment mass never exceeds the total.
  Eigen::Matrix3d captured = spec.moments * spec.moments.transpose();
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(spec.total_moment_gram - captured).eigenvalues().minCoeff(),
            -1e-10);
}

TEST(MuEff, ZeroFrequencyIsIdentity) {
  EXPECT_EQ(mu_eff_spectral(ball_spectrum_n12(), cplx(0.0, 0.0)).mu, Eigen::Matrix3cd::Identity());
}

TEST(MuEff, SymmetricAndPassive) {
  const MagneticSpectrum& spec = ball_spectrum_n12();
  for (cplx q : {cplx(30.0, 2.0), cplx(100.0, 0.5), cplx(400.0, 10.0)}) {
    const Eigen::Matrix3cd mu = mu_eff_spectral(spec, q).mu;
    EXPECT_LE((mu - mu.transpose()).norm(), 1e-12 * mu.norm());
    const Eigen::Matrix3cd im = (mu - mu.adjoint()) / cplx(0.0, 2.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd>(im).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(MuEff, PoleGuard) {
  const MagneticSpectrum& spec = ball_spectrum_n12();
  try {
    mu_eff_spectral(spec, cplx(spec.eigenvalues[0], 0.0));
    FAIL() << "expected pole_proximity";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::pole_proximity);
  }
  EXPECT_NO_THROW(mu_eff_spectral(spec, cplx(spec.eigenvalues[0], 1e-3)));
}

TEST(MuEff, SignFlipAcrossFirstPole) {
  const MagneticSpectrum& spec = ball_spectrum_n12();
  const double l1 = spec.eigenvalues[0];
  const double below = mu_eff_spectral(spec, cplx(0.99 * l1, 0.0)).mu(0, 0).real();
  const double above = mu_eff_spectral(spec, cplx(1.01 * l1, 0.0)).mu(0, 0).real();
  EXPECT_GT(below, 1.0);
  EXPECT_LT(above, below);
  EXPECT_LT(above - 1.0, 0.0);
}

TEST(MagneticDirect, EmptyResonatorIsIdentity) {
  const PeriodicGrid grid(8);
  const MagneticCellSolution d = solve_magnetic_direct(CellGeometry{}, grid, cplx(30.0, 2.0), {});
  EXPECT_LE((d.mu - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff(), 1e-14);
  for (int j = 0; j < 3; ++j)
    EXPECT_LE((d.h_fields[static_cast<std::size_t>(j)] - unit_edge_field(grid, j).cast<cplx>()).cwiseAbs().maxCoeff(),
              1e-14);
}

TEST(MagneticDirect, NormalizationAndAgreementWithSpectral) {
  const PeriodicGrid grid(12);
  const VoxelMask mask = ball_mask(0.3, 12);
  const ConstrainedSpace space = build_constrained_space(grid, mask);
  const cplx q(30.0, 2.0);
  LinearSolveOptions lo;
  lo.tolerance = 1e-12;
  const MagneticCellSolution d = solve_magnetic_direct(space, q, lo);
  for (int j = 0; j < 3; ++j) {
    const CirculationResult<cplx> c = circulation<cplx>(d.h_fields[static_cast<std::size_t>(j)], grid, mask);
    Eigen::Vector3cd e = Eigen::Vector3cd::Zero();
    e[j] = 1.0;
    EXPECT_LE((c.value - e).norm(), 1e-8);
  }
  EXPECT_LE((d.mu - d.mu.transpose()).norm(), 1e-9 * d.mu.norm());
  const MuEffResult s = mu_eff_spectral(ball_spectrum_n12(), q);
  EXPECT_LE((s.mu - d.mu).norm() / d.mu.norm(), 1e-3);
}

TEST(MagneticDirect, AgreementImprovesWithModes) {
  const PeriodicGrid grid(12);
  const ConstrainedSpace space = build_constrained_space(grid, ball_mask(0.3, 12));
  const cplx q(30.0, 2.0);
  LinearSolveOptions lo;
  lo.tolerance = 1e-12;
  const Eigen::Matrix3cd direct = solve_magnetic_direct(space, q, lo).mu;
  double prev = 1e300;
  for (int modes : {1, 4, 10}) {
    EigenSolveOptions eo;
    eo.num_eigenpairs = modes;
    const MuEffResult s = mu_eff_spectral(solve_magnetic_spectrum(space, eo), q);
    const double diff = (s.mu - direct).norm() / direct.norm();
    EXPECT_LE(diff, prev * (1.0 + 1e-12)) << modes;
    prev = diff;
  }
}
