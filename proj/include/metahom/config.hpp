#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metahom/effective_medium.hpp"
#include "metahom/geometry.hpp"
#include "metahom/magnetic_cell.hpp"
#include "metahom/solvers.hpp"

namespace metahom {

inline constexpr int kSchemaVersion = 1;

struct SpectrumConfig {
  int num_modes = 10;
  double tolerance = 1e-8;
  int max_restarts = 60;
  int max_basis = 0;  // 0 picks a default from num_modes
  double inner_tolerance = 1e-12;
  SpectrumTarget target = SpectrumTarget::bright;
};

struct ValidationConfig {
  std::vector<double> etas{0.25, 0.125, 0.0625};
  int n = 0;  // grid for the eta ladder; 0 uses grid.n
};

/// Parsed run configuration. Defaults use natural units, eps0 = mu0 = 1.
struct RunConfig {
  CellGeometry geometry;
  MaterialParams materials;
  int n = 24;
  LinearSolveOptions solver;
  SpectrumConfig spectrum;
  FrequencyGrid sweep;
  std::optional<cplx> q;  // magnetic direct solve point
  ValidationConfig validation;
  std::string output_dir = "out";
  std::uint64_t seed = 20240611;
  int threads = 0;  // 0 leaves the OpenMP default

  EigenSolveOptions eigen_options() const;
};

/// Parses and validates a configuration. Unknown keys and invalid values throw
/// ErrorCode::config naming the field path. Mask paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form with every default filled in; parsing it reproduces `config`.
nlohmann::json to_json(const RunConfig& config);

}  // namespace metahom
