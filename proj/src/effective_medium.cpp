#include "metahom/effective_medium.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "metahom/error.hpp"

namespace metahom {

Eigen::Matrix3cd assemble_eps_eff(const Eigen::Matrix3cd& a_eff, double alpha, cplx eps_w,
                                  const std::vector<int>& wire_dirs) {
  Eigen::Matrix3cd eps = a_eff;
  const cplx term = std::numbers::pi * alpha * alpha * eps_w;
  bool seen[3] = {false, false, false};
  for (int d : wire_dirs) {
    if (d < 0 || d > 2) throw Error(ErrorCode::config, fmt::format("wire direction {} out of range", d));
    if (seen[d]) continue;
    seen[d] = true;
    eps(d, d) += term;
  }
  return eps;
}

const char* to_string(BandFlag flag) {
  switch (flag) {
    case BandFlag::double_positive: return "double-positive";
    case BandFlag::single_negative: return "single-negative";
    case BandFlag::double_negative: return "double-negative";
    case BandFlag::near_pole: return "near-pole";
  }
  return "unknown";
}

Eigen::Vector3d real_part_eigenvalues(const Eigen::Matrix3cd& t) {
  const Eigen::Matrix3d re = t.real();
  if (!re.allFinite()) return Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  const Eigen::Matrix3d sym = 0.5 * (re + re.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(sym, Eigen::EigenvaluesOnly).eigenvalues();
}

BandFlag classify_band(const Eigen::Vector3d& eig_re_mu, const Eigen::Vector3d& eig_re_eps, bool near_pole) {
  if (near_pole) return BandFlag::near_pole;
  const bool neg = eig_re_mu.maxCoeff() < 0.0 && eig_re_eps.maxCoeff() < 0.0;
  const bool pos = eig_re_mu.minCoeff() > 0.0 && eig_re_eps.minCoeff() > 0.0;
  if (neg) return BandFlag::double_negative;
  if (pos) return BandFlag::double_positive;
  return BandFlag::single_negative;
}

void FrequencyGrid::check() const {
  if (count < 1) throw Error(ErrorCode::config, "sweep.count must be at least 1");
  if (!(omega_min > 0.0) || !std::isfinite(omega_min))
    throw Error(ErrorCode::config, "sweep.omega_min must be positive");
  if (!(omega_max >= omega_min) || !std::isfinite(omega_max))
    throw Error(ErrorCode::config, "sweep.omega_max must be at least sweep.omega_min");
}

std::vector<double> FrequencyGrid::samples() const {
  check();
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out[static_cast<std::size_t>(i)] = spacing == Spacing::linear
                                           ? omega_min + t * (omega_max - omega_min)
                                           : omega_min * std::pow(omega_max / omega_min, t);
  }
  out.back() = count == 1 ? omega_min : omega_max;
  return out;
}

int SweepResult::count(BandFlag flag) const {
  int c = 0;
  for (const auto& s : samples) c += s.flag == flag;
  return c;
}

SweepResult sweep(const Eigen::Matrix3cd& eps_eff, const MagneticSpectrum& spec, const MaterialParams& materials,
                  const std::vector<double>& omegas, const SweepOptions& opts) {
  if (!(materials.eps0 > 0.0) || !(materials.mu0 > 0.0))
    throw Error(ErrorCode::config, "materials.eps0 and materials.mu0 must be positive");
  SweepResult res;
  res.eps_eff = eps_eff;
  for (char b : spec.bright) res.bright_modes += b != 0;
  const Eigen::Vector3d eig_eps = real_part_eigenvalues(eps_eff);

  std::vector<double> sorted = omegas;
  std::sort(sorted.begin(), sorted.end());
  res.samples.resize(sorted.size());
  const double c = std::sqrt(materials.eps0 * materials.mu0);
  std::vector<std::string> errors(sorted.size());

#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(sorted.size()); ++i) {
    SweepSample& s = res.samples[static_cast<std::size_t>(i)];
    s.omega = sorted[static_cast<std::size_t>(i)];
    s.k = s.omega * c;
    s.q = materials.eps_b * (s.k * s.k);
    bool near = false;
    for (int n = 0; n < spec.num_modes; ++n) {
      if (!spec.bright[static_cast<std::size_t>(n)]) continue;
      const double lambda = spec.eigenvalues[n];
      if (std::abs(lambda - s.q) <= opts.near_pole_tolerance * lambda) near = true;
    }
    try {
      const MuEffResult r = mu_eff_spectral(spec, s.q, opts.mu);
      s.mu = r.mu;
      s.truncation_residual = r.truncation_residual;
      s.tail_bound = r.tail_bound;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::pole_proximity) {
        errors[static_cast<std::size_t>(i)] = e.what();
        continue;
      }
      s.mu.setConstant(cplx(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()));
      near = true;
    }
    s.eig_re_mu = real_part_eigenvalues(s.mu);
    s.eig_re_eps = eig_eps;
    s.flag = classify_band(s.eig_re_mu, s.eig_re_eps, near);
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorCode::unsupported, e);

  int worst = -1;
  for (std::size_t i = 0; i < res.samples.size(); ++i)
    if (res.samples[i].truncation_residual > opts.mu.truncation_tolerance &&
        (worst < 0 || res.samples[i].truncation_residual > res.samples[static_cast<std::size_t>(worst)].truncation_residual))
      worst = static_cast<int>(i);
  if (worst >= 0)
    res.warnings.push_back(fmt::format("truncation residual {:.3e} at omega {} exceeds {:.1e}",
                                       res.samples[static_cast<std::size_t>(worst)].truncation_residual,
                                       format_double(res.samples[static_cast<std::size_t>(worst)].omega),
                                       opts.mu.truncation_tolerance));
  return res;
}

double isotropy_defect(const Eigen::Matrix3cd& t) {
  const cplx mean = t.trace() / 3.0;
  const Eigen::Matrix3cd dev = t - mean * Eigen::Matrix3cd::Identity();
  return dev.cwiseAbs().maxCoeff() / std::max(1.0, std::abs(mean));
}

PlaneWaveReport plane_wave_check(const Eigen::Matrix3cd& eps, const Eigen::Matrix3cd& mu, double tolerance) {
  const double de = isotropy_defect(eps);
  const double dm = isotropy_defect(mu);
  if (!(de <= tolerance) || !(dm <= tolerance))
    throw Error(ErrorCode::unsupported,
                fmt::format("plane_wave_check: anisotropic tensors (eps defect {:.3e}, mu defect {:.3e})", de, dm));
  PlaneWaveReport r;
  r.eps = eps.trace() / 3.0;
  r.mu = mu.trace() / 3.0;
  r.eps_mu = r.eps * r.mu;
  r.propagating = r.eps_mu.real() > 0.0;
  return r;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  return fmt::format("{}", x);
}

std::vector<std::string> sweep_csv_columns() {
  std::vector<std::string> cols = {"omega", "k", "q_re", "q_im"};
  for (const char* t : {"mu", "eps"})
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) {
        cols.push_back(fmt::format("{}_{}{}_re", t, i, j));
        cols.push_back(fmt::format("{}_{}{}_im", t, i, j));
      }
  for (const char* t : {"mu", "eps"})
    for (int i = 1; i <= 3; ++i) cols.push_back(fmt::format("eig_re_{}_{}", t, i));
  cols.push_back("flag");
  return cols;
}

namespace {

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  write_row(out, sweep_csv_columns());
  for (const auto& s : result.samples) {
    std::vector<std::string> row = {format_double(s.omega), format_double(s.k), format_double(s.q.real()),
                                    format_double(s.q.imag())};
    for (const Eigen::Matrix3cd* t : {&s.mu, &result.eps_eff})
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          row.push_back(format_double((*t)(i, j).real()));
          row.push_back(format_double((*t)(i, j).imag()));
        }
    for (int i = 0; i < 3; ++i) row.push_back(format_double(s.eig_re_mu[i]));
    for (int i = 0; i < 3; ++i) row.push_back(format_double(s.eig_re_eps[i]));
    row.emplace_back(to_string(s.flag));
    write_row(out, row);
  }
}

std::vector<std::string> spectrum_csv_columns() { return {"n", "lambda", "m1", "m2", "m3", "bright"}; }

void write_spectrum_csv(std::ostream& out, const MagneticSpectrum& spec) {
  write_row(out, spectrum_csv_columns());
  for (int n = 0; n < spec.num_modes; ++n) {
    write_row(out, {std::to_string(n + 1), format_double(spec.eigenvalues[n]), format_double(spec.moments(0, n)),
                    format_double(spec.moments(1, n)), format_double(spec.moments(2, n)),
                    spec.bright[static_cast<std::size_t>(n)] ? "1" : "0"});
  }
}

}  // namespace metahom
