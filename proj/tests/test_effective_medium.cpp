#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "metahom/effective_medium.hpp"
#include "metahom/error.hpp"

using namespace metahom;

namespace {

// Isotropic triple pole at lambda with moment weight w per direction.
MagneticSpectrum synthetic_spectrum(double lambda, double w) {
  MagneticSpectrum s;
  s.num_modes = 3;
  s.eigenvalues = Vector<double>::Constant(3, lambda);
  s.moments = std::sqrt(w) * Eigen::Matrix3d::Identity();
  s.modes = Eigen::MatrixXd::Zero(10, 3);
  s.residuals = Vector<double>::Zero(3);
  s.bright = {1, 1, 1};
  s.total_moment_gram = w * Eigen::Matrix3d::Identity();
  s.exhausted = true;
  return s;
}

const std::vector<int> kAllWires{0, 1, 2};

}  // namespace

TEST(EpsEff, ZeroRadiusLeavesA) {
  const Eigen::Matrix3cd a = 1.2 * Eigen::Matrix3cd::Identity();
  EXPECT_EQ(assemble_eps_eff(a, 0.0, cplx(-100.0, 1.0), kAllWires), a);
}

TEST(EpsEff, DiluteBallWithThreeWires) {
  const Eigen::Matrix3cd a = 1.0424 * Eigen::Matrix3cd::Identity();
  const Eigen::Matrix3cd e = assemble_eps_eff(a, 0.1, cplx(-100.0, 1.0), kAllWires);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(e(i, i).real(), 1.0424 - std::numbers::pi, 1e-12);
    EXPECT_NEAR(e(i, i).imag(), 0.01 * std::numbers::pi, 1e-12);
    EXPECT_NEAR(e(i, i).real(), -2.099, 1e-3);
    EXPECT_NEAR(e(i, i).imag(), 0.0314, 1e-4);
  }
  EXPECT_EQ(e(0, 1), cplx(0.0, 0.0));
}

TEST(EpsEff, OnlyWireDirectionsChange) {
  const Eigen::Matrix3cd a = Eigen::Matrix3cd::Identity();
  const Eigen::Matrix3cd e = assemble_eps_eff(a, 0.1, cplx(-100.0, 0.0), {2});
  EXPECT_EQ(e(0, 0), cplx(1.0, 0.0));
  EXPECT_EQ(e(1, 1), cplx(1.0, 0.0));
  EXPECT_NEAR(e(2, 2).real(), 1.0 - std::numbers::pi, 1e-12);
}

TEST(EpsEff, NegativityThreshold) {
  const double lambda_max = 1.0424;
  const double threshold = -lambda_max / (std::numbers::pi * 0.01);
  EXPECT_NEAR(threshold, -33.18, 5e-3);
  const Eigen::Matrix3cd a = lambda_max * Eigen::Matrix3cd::Identity();
  auto max_re = [&](double re_w) {
    return real_part_eigenvalues(assemble_eps_eff(a, 0.1, cplx(re_w, 0.0), kAllWires)).maxCoeff();
  };
  EXPECT_LT(max_re(threshold - 0.01), 0.0);
  EXPECT_GT(max_re(threshold + 0.01), 0.0);
}

TEST(BandFlag, Classification) {
  const Eigen::Vector3d pos(1.0, 2.0, 3.0), neg(-3.0, -2.0, -1.0), mixed(-1.0, 1.0, 2.0);
  EXPECT_EQ(classify_band(pos, pos, false), BandFlag::double_positive);
  EXPECT_EQ(classify_band(neg, neg, false), BandFlag::double_negative);
  EXPECT_EQ(classify_band(neg, pos, false), BandFlag::single_negative);
  EXPECT_EQ(classify_band(mixed, pos, false), BandFlag::single_negative);
  EXPECT_EQ(classify_band(neg, neg, true), BandFlag::near_pole);
  EXPECT_STREQ(to_string(BandFlag::double_negative), "double-negative");
}

TEST(FrequencyGrid, LinearAndLogSamples) {
  FrequencyGrid g{1.0, 3.0, 5, Spacing::linear};
  const auto lin = g.samples();
  ASSERT_EQ(lin.size(), 5u);
  EXPECT_DOUBLE_EQ(lin.front(), 1.0);
  EXPECT_DOUBLE_EQ(lin[2], 2.0);
  EXPECT_DOUBLE_EQ(lin.back(), 3.0);
  g = {1.0, 100.0, 3, Spacing::log};
  const auto lg = g.samples();
  EXPECT_NEAR(lg[1], 10.0, 1e-12);
  g.omega_min = -1.0;
  EXPECT_THROW(g.check(), Error);
}

TEST(Sweep, BelowResonanceIsDoublePositive) {
  const MagneticSpectrum spec = synthetic_spectrum(100.0, 0.1);
  MaterialParams m;
  m.eps_b = {4.0, 0.0};
  const SweepResult r = sweep(1.05 * Eigen::Matrix3cd::Identity(), spec, m, {0.5, 1.0, 2.0, 3.0});
  EXPECT_EQ(r.count(BandFlag::double_positive), 4);
  for (const auto& s : r.samples) EXPECT_NEAR(s.q.real(), 4.0 * s.omega * s.omega, 1e-12);
}

TEST(Sweep, DoubleNegativeAbovePole) {
  const MagneticSpectrum spec = synthetic_spectrum(100.0, 0.1);
  MaterialParams m;
  m.eps_b = {25.0, 0.5};
  const Eigen::Matrix3cd eps = assemble_eps_eff(1.05 * Eigen::Matrix3cd::Identity(), 0.1, cplx(-100.0, 1.0), kAllWires);
  // q = 25 omega^2 crosses lambda = 100 at omega = 2.
  const SweepResult r = sweep(eps, spec, m, {1.8, 2.02, 2.05, 2.1, 3.0});
  EXPECT_GE(r.count(BandFlag::double_negative), 1);
  EXPECT_EQ(r.samples.front().flag, BandFlag::single_negative);
  for (const auto& s : r.samples)
    EXPECT_EQ(classify_band(s.eig_re_mu, s.eig_re_eps, s.flag == BandFlag::near_pole), s.flag);
}

TEST(Sweep, LosslessPoleIsFlagged) {
  const MagneticSpectrum spec = synthetic_spectrum(100.0, 0.1);
  MaterialParams m;
  m.eps_b = {25.0, 0.0};
  const SweepResult r = sweep(Eigen::Matrix3cd::Identity(), spec, m, {1.0, 2.0, 3.0});
  ASSERT_EQ(r.samples.size(), 3u);
  EXPECT_EQ(r.samples[1].flag, BandFlag::near_pole);
  EXPECT_TRUE(std::isnan(r.samples[1].mu(0, 0).real()));
  EXPECT_EQ(r.samples[0].flag, BandFlag::double_positive);
}

TEST(Sweep, WireTermIsIsolatedFromMu) {
  const MagneticSpectrum spec = synthetic_spectrum(80.0, 0.05);
  MaterialParams m;
  m.eps_b = {25.0, 0.5};
  const std::vector<double> omegas{1.0, 1.5, 1.8, 2.2};
  const Eigen::Matrix3cd a = 1.1 * Eigen::Matrix3cd::Identity();
  const SweepResult r1 = sweep(assemble_eps_eff(a, 0.1, cplx(-100.0, 1.0), kAllWires), spec, m, omegas);
  const SweepResult r2 = sweep(assemble_eps_eff(a, 0.1, cplx(-20.0, 5.0), kAllWires), spec, m, omegas);
  EXPECT_NE(r1.eps_eff, r2.eps_eff);
  for (std::size_t i = 0; i < omegas.size(); ++i)
    EXPECT_EQ(std::memcmp(r1.samples[i].mu.data(), r2.samples[i].mu.data(), sizeof(cplx) * 9), 0);
}

TEST(Sweep, CsvIsDeterministicWithContractColumns) {
  const MagneticSpectrum spec = synthetic_spectrum(80.0, 0.05);
  MaterialParams m;
  m.eps_b = {25.0, 0.5};
  std::vector<double> omegas;
  for (int i = 0; i < 30; ++i) omegas.push_back(1.0 + 0.05 * i);
  std::ostringstream a, b;
  write_sweep_csv(a, sweep(Eigen::Matrix3cd::Identity(), spec, m, omegas));
  write_sweep_csv(b, sweep(Eigen::Matrix3cd::Identity(), spec, m, omegas));
  EXPECT_EQ(a.str(), b.str());
  const auto cols = sweep_csv_columns();
  EXPECT_EQ(cols.size(), 4u + 18u + 18u + 6u + 1u);
  EXPECT_EQ(cols.front(), "omega");
  EXPECT_EQ(cols.back(), "flag");
  std::string header;
  std::istringstream in(a.str());
  std::getline(in, header);
  EXPECT_EQ(header.rfind("omega,k,q_re,q_im,mu_11_re", 0), 0u);
}

TEST(Sweep, SpectrumCsvColumns) {
  std::ostringstream out;
  write_spectrum_csv(out, synthetic_spectrum(80.0, 0.05));
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "n,lambda,m1,m2,m3,bright");
}

TEST(PlaneWave, Examples) {
  const Eigen::Matrix3cd id = Eigen::Matrix3cd::Identity();
  PlaneWaveReport r = plane_wave_check(id, id);
  EXPECT_EQ(r.eps_mu, cplx(1.0, 0.0));
  EXPECT_TRUE(r.propagating);
  r = plane_wave_check(cplx(-2.1, 0.03) * id, cplx(-1.5, 0.1) * id);
  EXPECT_NEAR(r.eps_mu.real(), 3.147, 1e-3);
  EXPECT_NEAR(r.eps_mu.imag(), -0.255, 1e-3);
  EXPECT_TRUE(r.propagating);
  r = plane_wave_check(-2.1 * id, id);
  EXPECT_FALSE(r.propagating);
  Eigen::Matrix3cd aniso = id;
  aniso(0, 0) = 2.0;
  EXPECT_THROW(plane_wave_check(aniso, id), Error);
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.0), "0");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Contract, ColumnsMatchSharedSchema) {
  std::ifstream in(METAHOM_SOURCE_DIR "/docs/columns.json");
  ASSERT_TRUE(in.good());
  const nlohmann::json schema = nlohmann::json::parse(in);
  EXPECT_EQ(schema["sweep.csv"]["columns"].get<std::vector<std::string>>(), sweep_csv_columns());
  EXPECT_EQ(schema["spectrum.csv"]["columns"].get<std::vector<std::string>>(), spectrum_csv_columns());
  std::vector<std::string> flags;
  for (BandFlag f : {BandFlag::double_positive, BandFlag::single_negative, BandFlag::double_negative, BandFlag::near_pole})
    flags.emplace_back(to_string(f));
  EXPECT_EQ(schema["sweep.csv"]["flag_values"].get<std::vector<std::string>>(), flags);
}
