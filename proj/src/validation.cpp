#include "metahom/validation.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "metahom/effective_medium.hpp"
#include "metahom/electric_cell.hpp"
#include "metahom/error.hpp"
#include "metahom/magnetic_cell.hpp"

namespace metahom {

namespace {

double max_abs(const SparseMatrix<double>& a) {
  double m = 0.0;
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix<double>::InnerIterator it(a, r); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double relative_difference(const Eigen::Matrix3cd& a, const Eigen::Matrix3cd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace

MimeticDefects mimetic_defects(int n, std::uint64_t) {
  const PeriodicGrid grid(n);
  const SparseMatrix<double> g = build_grad(grid).matrix;
  const SparseMatrix<double> c = build_curl(grid).matrix;
  const SparseMatrix<double> fd = build_face_div(grid).matrix;
  MimeticDefects d;
  d.curl_grad = max_abs(SparseMatrix<double>(c * g));
  d.div_curl = max_abs(SparseMatrix<double>(fd * c));
  const SparseMatrix<double> gt = g.transpose();
  const SparseMatrix<double> ct = c.transpose();
  d.div_adjoint = max_abs(SparseMatrix<double>(build_div(grid).matrix + gt)) / max_abs(g);
  d.curl_adjoint = max_abs(SparseMatrix<double>(build_dual_curl(grid).matrix - ct)) / max_abs(c);
  return d;
}

bool SuiteReport::ok() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks)
    cs.push_back({{"suite", c.suite},
                  {"name", c.name},
                  {"passed", c.passed},
                  {"value", c.value},
                  {"threshold", c.threshold},
                  {"detail", c.detail}});
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& r : ladder)
    rungs.push_back({{"eta", r.eta},
                     {"wire_radius", r.wire_radius},
                     {"l2_error", r.l2_error},
                     {"energy_eta", r.energy_eta},
                     {"energy_cell", r.energy_cell}});
  return {{"passed", ok()}, {"checks", cs}, {"eta_ladder", rungs}, {"warnings", warnings}};
}

SuiteReport run_validation_suite(const RunConfig& config) {
  SuiteReport rep;
  auto add = [&rep](std::string suite, std::string name, bool passed, double value, double threshold,
                    std::string detail = {}) {
    rep.checks.push_back({std::move(suite), std::move(name), passed, value, threshold, std::move(detail)});
  };
  auto failure = [&add](const std::string& suite, const std::string& name, const Error& e) {
    const std::string tag = e.code() == ErrorCode::resolution ? "resolution-too-coarse" : to_string(e.code());
    add(suite, name, false, 0.0, 0.0, fmt::format("{}: {}", tag, e.what()));
  };

  const PeriodicGrid grid(config.n);

  // Geometry.
  VoxelMask mask;
  try {
    mask = rasterize(config.geometry, config.n);
    for (const auto& c : validate(config.geometry, mask).checks)
      add("geometry", c.name, c.passed, c.margin, 0.0, c.detail);
  } catch (const Error& e) {
    failure("geometry", "rasterize", e);
    return rep;
  }

  // Discrete operator identities.
  const MimeticDefects md = mimetic_defects(config.n);
  add("operators", "curl grad = 0", md.curl_grad <= 1e-13, md.curl_grad, 1e-13);
  add("operators", "div curl = 0", md.div_curl <= 1e-13, md.div_curl, 1e-13);
  add("operators", "div = -grad^T", md.div_adjoint <= 1e-12, md.div_adjoint, 1e-12);
  add("operators", "dual curl = curl^T", md.curl_adjoint <= 1e-12, md.curl_adjoint, 1e-12);

  // Electric cell.
  std::optional<ElectricCellSolution> es;
  try {
    es = solve_electric_cell(config.geometry, grid, config.solver);
    const Eigen::Matrix3d a = es->a_eff.real();
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
    add("electric", "A symmetric", asym <= 1e-10, asym, 1e-10);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(0.5 * (a + a.transpose()) - Eigen::Matrix3d::Identity())
            .eigenvalues()
            .minCoeff();
    add("electric", "A - I positive semidefinite", min_eig >= -1e-10, min_eig, -1e-10);
    const Eigen::Matrix3d a2 = a_eff_from_gradients(*es, grid);
    const double ident = (a - a2).cwiseAbs().maxCoeff() / scale;
    add("electric", "energy identity", ident <= 1e-10, ident, 1e-10);
    double mean_err = 0.0;
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e[j] = 1.0;
      mean_err = std::max(mean_err, (integrate_vector(grid, es->e_fields[static_cast<std::size_t>(j)]) - e).norm());
    }
    const double mean_tol = 10.0 * config.solver.tolerance;
    add("electric", "integral of E^j = e_j", mean_err <= mean_tol, mean_err, mean_tol);
    for (const auto& r : es->reports)
      if (!r.converged) add("electric", "linear solve converged", false, r.relative_residual, config.solver.tolerance);
  } catch (const Error& e) {
    failure("electric", "solve", e);
  }

  // Magnetic spectrum and route agreement.
  std::optional<MagneticSpectrum> spec;
  try {
    const ConstrainedSpace space = build_constrained_space(grid, mask.only(Label::resonator));
    EigenSolveOptions eo = config.eigen_options();
    spec = solve_magnetic_spectrum(space, eo, config.spectrum.target);
    const double worst = spec->residuals.size() ? spec->residuals.maxCoeff() : 0.0;
    add("magnetic", "eigen residuals", worst <= config.spectrum.tolerance, worst, config.spectrum.tolerance);
    for (const auto& w : spec->warnings) rep.warnings.push_back("magnetic: " + w);
    if (config.q) {
      const MuEffResult mr = mu_eff_spectral(*spec, *config.q);
      add("magnetic", "truncation residual", mr.truncation_residual <= 1e-4, mr.truncation_residual, 1e-4,
          fmt::format("{} bright modes", mr.bright_modes_used));
      const MagneticCellSolution direct = solve_magnetic_direct(space, *config.q, config.solver, config.materials);
      const double diff = relative_difference(mr.mu, direct.mu);
      add("magnetic", "spectral vs direct mu", diff <= 1e-3, diff, 1e-3);
    }
  } catch (const Error& e) {
    failure("magnetic", "spectrum", e);
  }

  // Passivity over the sweep.
  if (spec && es) {
    try {
      const Eigen::Matrix3cd eps = assemble_eps_eff(es->a_eff, config.geometry.wire_radius, config.materials.eps_w,
                                                    config.geometry.wire_directions());
      const SweepResult sw = sweep(eps, *spec, config.materials, config.sweep.samples());
      if (config.materials.eps_b.imag() > 0.0) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& s : sw.samples) {
          const Eigen::Matrix3cd im = (s.mu - s.mu.transpose().conjugate()) / cplx(0.0, 2.0);
          const double e =
              Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd>(im, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
          worst = std::min(worst, e);
        }
        add("sweep", "Im mu positive semidefinite", worst >= -1e-10, worst, -1e-10);
      }
      bool flags_ok = true;
      for (const auto& s : sw.samples)
        flags_ok = flags_ok && classify_band(s.eig_re_mu, s.eig_re_eps, s.flag == BandFlag::near_pole) == s.flag;
      add("sweep", "band flags match eigenvalues", flags_ok, flags_ok ? 1.0 : 0.0, 1.0);
    } catch (const Error& e) {
      failure("sweep", "sweep", e);
    }
  }

  // Eta ladder against the wireless cell solution.
  try {
    const int n_eta = config.validation.n > 0 ? config.validation.n : config.n;
    const PeriodicGrid eg(n_eta);
    const ElectricCellSolution cell = n_eta == config.n && es ? *es : solve_electric_cell(config.geometry, eg, config.solver);
    std::vector<double> etas = config.validation.etas;
    std::sort(etas.begin(), etas.end(), std::greater<>());
    for (double eta : etas) {
      const ThetaEtaSolution th = solve_theta_eta(config.geometry, eg, eta, config.solver);
      EtaRung r;
      r.eta = eta;
      r.wire_radius = th.wire_radius;
      for (std::size_t j = 0; j < 3; ++j) {
        r.l2_error[j] = l2_norm(eg, th.vth_eta[j] - cell.e_fields[j]);
        r.energy_eta[j] = dirichlet_energy(eg, th.theta_eta[j]);
        r.energy_cell[j] = dirichlet_energy(eg, cell.theta[j]);
        const double slack = 1e-9 * std::max(1.0, r.energy_cell[j]);
        add("eta-ladder", fmt::format("A(theta^{}) <= A(theta_eta^{}) at eta={}", j + 1, j + 1, eta),
            r.energy_cell[j] <= r.energy_eta[j] + slack, r.energy_eta[j] - r.energy_cell[j], -slack);
      }
      rep.ladder.push_back(r);
    }
    const bool wires = config.geometry.wire_radius > 0.0 && !config.geometry.wires.empty();
    for (std::size_t j = 0; j < 3; ++j) {
      if (!wires) {
        double worst = 0.0;
        for (const auto& r : rep.ladder) worst = std::max(worst, r.l2_error[j]);
        add("eta-ladder", fmt::format("no wires: vth_eta^{} = E^{}", j + 1, j + 1), worst <= 1e-8, worst, 1e-8);
        continue;
      }
      bool decreasing = true;
      for (std::size_t i = 1; i < rep.ladder.size(); ++i)
        decreasing = decreasing && rep.ladder[i].l2_error[j] < rep.ladder[i - 1].l2_error[j];
      add("eta-ladder", fmt::format("|vth_eta^{} - E^{}| strictly decreasing", j + 1, j + 1), decreasing,
          rep.ladder.empty() ? 0.0 : rep.ladder.back().l2_error[j], 0.0);
    }
  } catch (const Error& e) {
    failure("eta-ladder", "theta_eta solves", e);
  }
  return rep;
}

}  // namespace metahom
