#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metahom/geometry.hpp"
#include "metahom/magnetic_cell.hpp"

namespace metahom {

/// eps = A + pi alpha^2 eps_w on the diagonal entries of wire directions (0-based).
Eigen::Matrix3cd assemble_eps_eff(const Eigen::Matrix3cd& a_eff, double alpha, cplx eps_w,
                                  const std::vector<int>& wire_dirs);

enum class BandFlag { double_positive, single_negative, double_negative, near_pole };

const char* to_string(BandFlag flag);

/// Ascending eigenvalues of the symmetric part of Re(t).
Eigen::Vector3d real_part_eigenvalues(const Eigen::Matrix3cd& t);

/// double_negative when every eigenvalue of both real parts is negative,
/// double_positive when every one is positive, single_negative otherwise.
BandFlag classify_band(const Eigen::Vector3d& eig_re_mu, const Eigen::Vector3d& eig_re_eps, bool near_pole);

enum class Spacing { linear, log };

struct FrequencyGrid {
  double omega_min = 1.0;
  double omega_max = 10.0;
  int count = 101;
  Spacing spacing = Spacing::linear;

  void check() const;
  std::vector<double> samples() const;
};

struct SweepOptions {
  MuEffOptions mu;
  /// Samples with |lambda - Re q| / lambda below this for a bright lambda are flagged near_pole.
  double near_pole_tolerance = 1e-3;
};

struct SweepSample {
  double omega = 0.0;
  double k = 0.0;
  cplx q;
  Eigen::Matrix3cd mu = Eigen::Matrix3cd::Identity();
  Eigen::Vector3d eig_re_mu = Eigen::Vector3d::Ones();
  Eigen::Vector3d eig_re_eps = Eigen::Vector3d::Ones();
  BandFlag flag = BandFlag::double_positive;
  double truncation_residual = 0.0;
  double tail_bound = 0.0;
};

struct SweepResult {
  Eigen::Matrix3cd eps_eff = Eigen::Matrix3cd::Identity();
  std::vector<SweepSample> samples;  // sorted by omega
  int bright_modes = 0;
  std::vector<std::string> warnings;

  int count(BandFlag flag) const;
};

/// Evaluates mu(omega) from the spectrum with k = omega sqrt(eps0 mu0) and
/// q = eps_b k^2. eps_eff is used unchanged at every sample. Samples sitting on
/// a lossless pole carry NaN tensors and the near_pole flag.
SweepResult sweep(const Eigen::Matrix3cd& eps_eff, const MagneticSpectrum& spec, const MaterialParams& materials,
                  const std::vector<double>& omegas, const SweepOptions& opts = {});

struct PlaneWaveReport {
  cplx eps;
  cplx mu;
  cplx eps_mu;
  bool propagating = false;  // Re(eps mu) > 0
};

/// Scalar dispersion factor for isotropic tensors. Throws ErrorCode::unsupported
/// when either tensor is farther than `tolerance` from a multiple of I.
PlaneWaveReport plane_wave_check(const Eigen::Matrix3cd& eps, const Eigen::Matrix3cd& mu, double tolerance = 1e-6);

/// Largest entry of t - (tr t / 3) I relative to max(1, |tr t / 3|).
double isotropy_defect(const Eigen::Matrix3cd& t);

/// Columns: omega, k, q_re, q_im, mu_11_re, mu_11_im, ..., eps_33_im,
/// eig_re_mu_1..3, eig_re_eps_1..3, flag.
std::vector<std::string> sweep_csv_columns();
void write_sweep_csv(std::ostream& out, const SweepResult& result);

/// Columns: n, lambda, m1, m2, m3, bright.
std::vector<std::string> spectrum_csv_columns();
void write_spectrum_csv(std::ostream& out, const MagneticSpectrum& spec);

/// Shortest round-trip decimal form, used by every writer.
std::string format_double(double x);

}  // namespace metahom
