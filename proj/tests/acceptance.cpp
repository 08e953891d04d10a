// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "metahom/config.hpp"
#include "metahom/effective_medium.hpp"
#include "metahom/electric_cell.hpp"
#include "metahom/error.hpp"
#include "metahom/magnetic_cell.hpp"
#include "metahom/validation.hpp"

using namespace metahom;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void run(const std::string& id, const std::string& title, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const Error& e) {
    o = {false, fmt::format("{}: {}", to_string(e.code()), e.what())};
  } catch (const std::exception& e) {
    o = {false, e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0.0 && dt > time_limit) {
    o.passed = false;
    o.detail += fmt::format("; runtime {:.1f} s exceeds {:.0f} s", dt, time_limit);
  }
  if (!o.passed) ++failures;
  fmt::print("{} {} {} ({:.1f} s): {}\n", o.passed ? "PASS" : "FAIL", id, title, dt, o.detail);
  std::fflush(stdout);
}

CellGeometry ball(double r) {
  CellGeometry g;
  g.resonator = Ball{Eigen::Vector3d::Constant(0.5), r};
  return g;
}

double min_im_eig(const Eigen::Matrix3cd& mu) {
  const Eigen::Matrix3cd im = (mu - mu.adjoint()) / cplx(0.0, 2.0);
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd>(im, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

bool same_bits(const Eigen::Matrix3cd& a, const Eigen::Matrix3cd& b) {
  return std::memcmp(a.data(), b.data(), sizeof(cplx) * 9) == 0;
}

// Shared ball r = 0.3, n = 24 data for the route, passivity, band and symmetry criteria.
struct DemoData {
  RunConfig config;
  ConstrainedSpace space;
  MagneticSpectrum spectrum;
  ElectricCellSolution electric;
  Eigen::Matrix3cd eps;
  SweepResult sweep;
};

std::optional<DemoData> demo;
std::string demo_error;

void build_demo() {
  try {
    DemoData d;
    d.config = load_config(METAHOM_SOURCE_DIR "/configs/demo_negative_index.json");
    const PeriodicGrid grid(d.config.n);
    const VoxelMask mask = rasterize(d.config.geometry, d.config.n);
    d.space = build_constrained_space(grid, mask.only(Label::resonator));
    d.spectrum = solve_magnetic_spectrum(d.space, d.config.eigen_options());
    d.electric = solve_electric_cell(d.config.geometry, grid, d.config.solver);
    d.eps = assemble_eps_eff(d.electric.a_eff, d.config.geometry.wire_radius, d.config.materials.eps_w,
                             d.config.geometry.wire_directions());
    d.sweep = sweep(d.eps, d.spectrum, d.config.materials, d.config.sweep.samples());
    demo = std::move(d);
  } catch (const std::exception& e) {
    demo_error = e.what();
  }
}

const DemoData& need_demo() {
  if (!demo) throw std::runtime_error("shared n=24 spectrum unavailable: " + demo_error);
  return *demo;
}

}  // namespace

int main() {
  run("A1", "identity limits, empty resonator, n=16", 10.0, [] {
    const PeriodicGrid grid(16);
    const CellGeometry g;
    const ElectricCellSolution es = solve_electric_cell(g, grid, {});
    double err = (es.a_eff - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff();
    const ConstrainedSpace space = build_constrained_space(grid, VoxelMask(16));
    EigenSolveOptions eo;
    const MagneticSpectrum spec = solve_magnetic_spectrum(space, eo);
    MaterialParams mat;
    mat.eps_b = {25.0, 0.5};
    const std::vector<double> omegas{0.5, 1.0, 2.0, 4.0, 8.0};
    const SweepResult sw = sweep(es.a_eff, spec, mat, omegas);
    double direct_err = 0.0;
    for (const auto& s : sw.samples) {
      err = std::max(err, (s.mu - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff());
      const MagneticCellSolution d = solve_magnetic_direct(space, s.q, {}, mat);
      direct_err = std::max(direct_err, (d.mu - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff());
    }
    err = std::max(err, direct_err);
    return Outcome{err <= 1e-9, fmt::format("max |A - I|, |mu - I| over 5 omegas (both routes) = {:.2e} <= 1e-9", err)};
  });

  run("A2", "mimetic operator identities, n in {8,16,32}", 0.0, [] {
    double exact = 0.0, adj = 0.0;
    for (int n : {8, 16, 32}) {
      const MimeticDefects d = mimetic_defects(n);
      exact = std::max({exact, d.curl_grad, d.div_curl});
      adj = std::max({adj, d.div_adjoint, d.curl_adjoint});
    }
    return Outcome{exact <= 1e-13 && adj <= 1e-12,
                   fmt::format("curl grad, div curl = {:.2e} <= 1e-13; adjointness = {:.2e} <= 1e-12", exact, adj)};
  });

  run("A3", "electric oracle, ball r=0.15", 300.0, [] {
    const CellGeometry g = ball(0.15);
    const double f = 4.0 / 3.0 * std::numbers::pi * std::pow(0.15, 3);
    const double dilute = 1.0 + 3.0 * f;
    double a[3];
    int i = 0;
    for (int n : {24, 48, 96}) {
      const ElectricCellSolution s = solve_electric_cell(g, PeriodicGrid(n), {});
      a[i++] = s.a_eff.real().diagonal().mean();
    }
    const double rel = std::abs(a[1] - dilute) / dilute;
    const double ratio = std::abs(a[0] - a[1]) / std::abs(a[1] - a[2]);
    return Outcome{rel <= 0.15 && ratio >= 1.5 && ratio <= 4.5,
                   fmt::format("A_ii(48) = {:.6f} vs 1+3f = {:.6f}, rel {:.3f} <= 0.15; A(24..96) = {:.6f}, {:.6f}, "
                               "{:.6f}; refinement ratio {:.2f} in [1.5, 4.5]",
                               a[1], dilute, rel, a[0], a[1], a[2], ratio)};
  });

  run("A4", "dense eigen-oracle, ball r=0.3, n=8", 0.0, [] {
    const PeriodicGrid grid(8);
    const VoxelMask mask = rasterize(ball(0.3), 8).only(Label::resonator);
    const ConstrainedSpace space = build_constrained_space(grid, mask);
    const DenseConstrainedOracle oracle = dense_constrained_oracle(grid, mask);
    EigenSolveOptions eo;
    eo.num_eigenpairs = 10;
    const MagneticSpectrum spec = solve_magnetic_spectrum(space, eo, SpectrumTarget::lowest);
    if (spec.num_modes < 10) return Outcome{false, fmt::format("only {} eigenpairs returned", spec.num_modes)};
    double worst = 0.0;
    for (int k = 0; k < 10; ++k)
      worst = std::max(worst, std::abs(spec.eigenvalues[k] - oracle.eigenvalues[k]) / std::abs(oracle.eigenvalues[k]));
    const bool rank = space.dim() == oracle.nullspace_dim;
    return Outcome{worst <= 1e-8 && rank, fmt::format("max relative eigenvalue error {:.2e} <= 1e-8; rank {} vs dense "
                                                      "nullspace {}",
                                                      worst, space.dim(), oracle.nullspace_dim)};
  });

  build_demo();

  run("A5", "route agreement at q = 30+2i, ball r=0.3, n=24", 0.0, [] {
    const DemoData& d = need_demo();
    const cplx q(30.0, 2.0);
    MagneticSpectrum spec = d.spectrum;
    MuEffResult sr = mu_eff_spectral(spec, q);
    int modes = d.config.spectrum.num_modes;
    while (sr.truncation_residual >= 1e-4 && modes < 160) {
      modes *= 2;
      EigenSolveOptions eo = d.config.eigen_options();
      eo.num_eigenpairs = modes;
      spec = solve_magnetic_spectrum(d.space, eo);
      sr = mu_eff_spectral(spec, q);
    }
    LinearSolveOptions lo;
    lo.tolerance = 1e-12;
    const MagneticCellSolution direct = solve_magnetic_direct(d.space, q, lo, d.config.materials);
    const double diff = (sr.mu - direct.mu).norm() / direct.mu.norm();
    return Outcome{sr.truncation_residual < 1e-4 && diff <= 1e-3,
                   fmt::format("{} bright modes, truncation residual {:.2e} < 1e-4; |mu_spec - mu_direct| / "
                               "|mu_direct| = {:.2e} <= 1e-3",
                               sr.bright_modes_used, sr.truncation_residual, diff)};
  });

  run("A6", "resonance sign structure, lossless ball r=0.35, n=16", 0.0, [] {
    const PeriodicGrid grid(16);
    const ConstrainedSpace space = build_constrained_space(grid, rasterize(ball(0.35), 16).only(Label::resonator));
    const MagneticSpectrum spec = solve_magnetic_spectrum(space, EigenSolveOptions{});
    if (spec.num_modes == 0) return Outcome{false, "no bright modes"};
    const double l1 = spec.eigenvalues[0];
    // Weight of the first pole along e_1, summed over its degenerate cluster.
    double w = 0.0;
    for (int k = 0; k < spec.num_modes && std::abs(spec.eigenvalues[k] - l1) <= 1e-6 * l1; ++k)
      w += spec.moments(0, k) * spec.moments(0, k);
    auto measured = [&](double q) { return mu_eff_spectral(spec, cplx(q, 0.0)).mu(0, 0).real(); };
    auto single_pole = [&](double q) { return 1.0 + q / (l1 - q) * w; };
    const double qb = 0.99 * l1, qa = 1.01 * l1;
    const double below = measured(qb), above = measured(qa);
    const double pb = single_pole(qb), pa = single_pole(qa);
    const bool dominance = std::abs(below - pb) <= 0.1 * std::abs(pb) && std::abs(above - pa) <= 0.1 * std::abs(pa);
    return Outcome{below > 10.0 && above < -8.0 && dominance,
                   fmt::format("lambda_1 = {:.4f}, |m_1|^2 = {:.4f}; Re mu_11 below = {:.3f} > 10 (single pole {:.3f}), "
                               "above = {:.3f} < -8 (single pole {:.3f})",
                               l1, w, below, pb, above, pa)};
  });

  run("A7", "passivity over the demo sweep", 0.0, [] {
    const DemoData& d = need_demo();
    if (!(d.config.materials.eps_b.imag() > 0.0)) return Outcome{false, "demo eps_b is lossless"};
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : d.sweep.samples) worst = std::min(worst, min_im_eig(s.mu));
    return Outcome{worst >= -1e-10, fmt::format("min eigenvalue of Im mu over {} samples = {:.3e} >= -1e-10",
                                                d.sweep.samples.size(), worst)};
  });

  run("A8", "double-negative band in the demo config", 0.0, [] {
    const DemoData& d = need_demo();
    const int dn = d.sweep.count(BandFlag::double_negative);
    double first = 0.0, last = 0.0;
    for (const auto& s : d.sweep.samples)
      if (s.flag == BandFlag::double_negative) {
        if (first == 0.0) first = s.omega;
        last = s.omega;
      }
    const Eigen::Matrix3cd eps2 = assemble_eps_eff(d.electric.a_eff, d.config.geometry.wire_radius, cplx(-37.0, 3.0),
                                                   d.config.geometry.wire_directions());
    const SweepResult other = sweep(eps2, d.spectrum, d.config.materials, d.config.sweep.samples());
    bool isolated = other.samples.size() == d.sweep.samples.size();
    for (std::size_t i = 0; isolated && i < other.samples.size(); ++i)
      isolated = same_bits(other.samples[i].mu, d.sweep.samples[i].mu);
    return Outcome{dn >= 1 && isolated,
                   fmt::format("{} double-negative samples (omega {:.3f}..{:.3f}); mu bit-identical under eps_w change: {}",
                               dn, first, last, isolated ? "yes" : "no")};
  });

  run("A9", "theta_eta ladder, demo geometry, n=96", 900.0, [] {
    const RunConfig cfg = load_config(METAHOM_SOURCE_DIR "/configs/demo_negative_index.json");
    const PeriodicGrid grid(96);
    const ElectricCellSolution cell = solve_electric_cell(cfg.geometry, grid, cfg.solver);
    std::array<double, 3> prev;
    prev.fill(std::numeric_limits<double>::infinity());
    bool decreasing = true, ordered = true;
    std::string errs;
    for (double eta : {0.25, 0.125, 0.0625}) {
      const ThetaEtaSolution th = solve_theta_eta(cfg.geometry, grid, eta, cfg.solver);
      errs += fmt::format(" eta={}:", eta);
      for (std::size_t j = 0; j < 3; ++j) {
        const double e = l2_norm(grid, th.vth_eta[j] - cell.e_fields[j]);
        decreasing = decreasing && e < prev[j];
        prev[j] = e;
        const double a_cell = dirichlet_energy(grid, cell.theta[j]);
        const double a_eta = dirichlet_energy(grid, th.theta_eta[j]);
        ordered = ordered && a_cell <= a_eta;
        errs += fmt::format(" {:.4f}", e);
      }
    }
    return Outcome{decreasing && ordered, fmt::format("L2 errors per direction{}; strictly decreasing: {}; "
                                                      "A(theta) <= A(theta_eta) on every rung: {}",
                                                      errs, decreasing ? "yes" : "no", ordered ? "yes" : "no")};
  });

  run("A10", "cubic symmetry of both tensors over the demo sweep", 0.0, [] {
    const DemoData& d = need_demo();
    double worst = isotropy_defect(d.sweep.eps_eff);
    for (const auto& s : d.sweep.samples) worst = std::max(worst, isotropy_defect(s.mu));
    return Outcome{worst <= 1e-6, fmt::format("max relative distance from scalar * I over eps and {} mu samples = "
                                              "{:.2e} <= 1e-6",
                                              d.sweep.samples.size(), worst)};
  });

  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
