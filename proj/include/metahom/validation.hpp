#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "metahom/config.hpp"

namespace metahom {

struct SuiteCheck {
  std::string suite;
  std::string name;
  bool passed = true;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it is compared against
  std::string detail;
};

struct EtaRung {
  double eta = 0.0;
  double wire_radius = 0.0;
  std::array<double, 3> l2_error{};     // |vth_eta^j - E^j| in L2
  std::array<double, 3> energy_eta{};   // integral |grad theta_eta^j|^2
  std::array<double, 3> energy_cell{};  // integral |grad theta^j|^2
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;
  std::vector<EtaRung> ladder;
  std::vector<std::string> warnings;

  bool ok() const;
  nlohmann::json to_json() const;
};

/// Runs the invariant suites for a configuration: geometry, discrete operator
/// identities, electric cell, magnetic spectrum and route agreement, the eta
/// ladder, and passivity over the sweep. Solver failures inside a suite are
/// recorded as failed checks rather than thrown.
SuiteReport run_validation_suite(const RunConfig& config);

/// Mimetic identity defects on an n^3 grid: max |curl grad|, max |div curl|,
/// and the relative adjointness defects of div vs -grad^T and dual curl vs curl^T.
struct MimeticDefects {
  double curl_grad = 0.0;
  double div_curl = 0.0;
  double div_adjoint = 0.0;
  double curl_adjoint = 0.0;
};
MimeticDefects mimetic_defects(int n, std::uint64_t seed = 1);

}  // namespace metahom
