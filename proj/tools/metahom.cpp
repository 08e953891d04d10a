// Command-line driver: cell-electric, cell-magnetic, sweep, validate.
//
// Exit codes: 0 success, 1 validation checks failed, 2 configuration error,
// 3 solver non-convergence, 4 resolution error, 5 other failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "metahom/config.hpp"
#include "metahom/effective_medium.hpp"
#include "metahom/electric_cell.hpp"
#include "metahom/error.hpp"
#include "metahom/magnetic_cell.hpp"
#include "metahom/report.hpp"
#include "metahom/validation.hpp"
#include "metahom/voxel_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace metahom;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitResolution = 4;
constexpr int kExitOther = 5;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return kExitConfig;
    case ErrorCode::no_convergence:
    case ErrorCode::incompatible_rhs: return kExitSolver;
    case ErrorCode::resolution:
    case ErrorCode::no_admissible_loop: return kExitResolution;
    default: return kExitOther;
  }
}

struct CommonArgs {
  std::string config;
  std::string out;
  int threads = -1;
  std::optional<long long> seed;
};

struct Run {
  RunConfig cfg;
  fs::path out;
  json meta;
};

Run prepare(const CommonArgs& args, const std::string& command) {
  Run run;
  run.cfg = load_config(args.config);
  if (args.seed) {
    if (*args.seed < 0) throw Error(ErrorCode::config, "--seed must be non-negative");
    run.cfg.seed = static_cast<std::uint64_t>(*args.seed);
  }
  if (args.threads >= 0) run.cfg.threads = args.threads;
  if (!args.out.empty()) run.cfg.output_dir = args.out;
  if (run.cfg.threads > 0) set_num_threads(run.cfg.threads);
  run.out = run.cfg.output_dir;
  // The echo records what was computed; the output location is not part of it.
  run.meta = run_metadata(run.cfg, command);
  run.meta["config"].erase("output_dir");
  run.meta["config"].erase("threads");
  return run;
}

json reports_json(const std::vector<SolveReport>& reports) {
  json out = json::array();
  for (const auto& r : reports)
    out.push_back({{"method", r.method},
                   {"iterations", r.iterations},
                   {"relative_residual", r.relative_residual},
                   {"converged", r.converged}});
  return out;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

cplx parse_complex(const std::string& s) {
  const auto comma = s.find(',');
  try {
    std::size_t used = 0;
    if (comma == std::string::npos) {
      const double re = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return {re, 0.0};
    }
    const std::string a = s.substr(0, comma), b = s.substr(comma + 1);
    const double re = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(s);
    const double im = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(s);
    return {re, im};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::config, fmt::format("--q: expected RE,IM, got '{}'", s));
  }
}

ElectricCellSolution electric(const Run& run) {
  return solve_electric_cell(run.cfg.geometry, PeriodicGrid(run.cfg.n), run.cfg.solver);
}

Eigen::Matrix3cd eps_eff_of(const Run& run, const ElectricCellSolution& es) {
  return assemble_eps_eff(es.a_eff, run.cfg.geometry.wire_radius, run.cfg.materials.eps_w,
                          run.cfg.geometry.wire_directions());
}

MagneticSpectrum spectrum(const Run& run, const ConstrainedSpace& space) {
  return solve_magnetic_spectrum(space, run.cfg.eigen_options(), run.cfg.spectrum.target);
}

json spectrum_json(const MagneticSpectrum& s) {
  int bright = 0;
  for (char b : s.bright) bright += b != 0;
  json j = {{"num_modes", s.num_modes},
            {"bright_modes", bright},
            {"target", s.target == SpectrumTarget::bright ? "bright" : "lowest"},
            {"max_residual", s.residuals.size() ? s.residuals.maxCoeff() : 0.0},
            {"purged", s.purged},
            {"cluster_warning", s.cluster_warning},
            {"exhausted", s.exhausted},
            {"dark_cutoff", s.dark_cutoff},
            {"total_moment_gram", matrix_json(s.total_moment_gram)},
            {"warnings", s.warnings}};
  if (s.next_eigenvalue) j["next_eigenvalue"] = *s.next_eigenvalue;
  return j;
}

int cmd_cell_electric(const CommonArgs& args, bool dump_fields) {
  const Run run = prepare(args, "cell-electric");
  const PeriodicGrid grid(run.cfg.n);
  const ElectricCellSolution es = electric(run);
  const json payload = {{"n", run.cfg.n},
                        {"a_eff", matrix_json(es.a_eff)},
                        {"a_eff_energy", matrix_json(a_eff_from_gradients(es, grid))},
                        {"eps_eff", matrix_json(eps_eff_of(run, es))},
                        {"chart_origin", {es.chart_origin[0], es.chart_origin[1], es.chart_origin[2]}},
                        {"solves", reports_json(es.reports)}};
  write_json_artifact(run.out / "a_eff.json", payload, run.meta);
  if (dump_fields) {
    for (int j = 0; j < 3; ++j) {
      const auto& t = es.theta[static_cast<std::size_t>(j)];
      std::vector<cplx> tv(t.data(), t.data() + t.size());
      write_field((run.out / fmt::format("theta_{}.mhvx", j + 1)).string(), run.cfg.n, 1, FieldLocation::nodes, tv);
      const auto& e = es.e_fields[static_cast<std::size_t>(j)];
      std::vector<cplx> ev(e.data(), e.data() + e.size());
      write_field((run.out / fmt::format("e_field_{}.mhvx", j + 1)).string(), run.cfg.n, 3, FieldLocation::edges, ev);
    }
  }
  return 0;
}

int cmd_cell_magnetic(const CommonArgs& args, bool direct, const std::string& q_text) {
  const Run run = prepare(args, "cell-magnetic");
  const PeriodicGrid grid(run.cfg.n);
  const VoxelMask mask = rasterize(run.cfg.geometry, run.cfg.n).only(Label::resonator);
  const ConstrainedSpace space = build_constrained_space(grid, mask);
  const MagneticSpectrum spec = spectrum(run, space);
  std::ostringstream csv;
  write_spectrum_csv(csv, spec);
  write_csv_artifact(run.out / "spectrum.csv", csv.str(), run.meta);

  // Default evaluation point: the first sweep frequency.
  const double k0 = run.cfg.sweep.omega_min * std::sqrt(run.cfg.materials.eps0 * run.cfg.materials.mu0);
  const cplx q = !q_text.empty() ? parse_complex(q_text) : run.cfg.q.value_or(run.cfg.materials.eps_b * (k0 * k0));
  const MuEffResult mr = mu_eff_spectral(spec, q);
  json payload = {{"n", run.cfg.n},
                  {"q", complex_json(q)},
                  {"spectrum", spectrum_json(spec)},
                  {"mu_spectral", matrix_json(mr.mu)},
                  {"truncation_residual", mr.truncation_residual},
                  {"tail_bound", mr.tail_bound},
                  {"truncation_warning", mr.truncation_warning},
                  {"bright_modes_used", mr.bright_modes_used}};
  if (direct) {
    const MagneticCellSolution ds = solve_magnetic_direct(space, q, run.cfg.solver, run.cfg.materials);
    payload["mu_direct"] = matrix_json(ds.mu);
    payload["relative_difference"] = (mr.mu - ds.mu).norm() / std::max(ds.mu.norm(), 1e-300);
    payload["direct_solves"] = reports_json(ds.reports);
  }
  write_json_artifact(run.out / "mu-at-q.json", payload, run.meta);
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const Run run = prepare(args, "sweep");
  const PeriodicGrid grid(run.cfg.n);
  const ElectricCellSolution es = electric(run);
  const VoxelMask mask = rasterize(run.cfg.geometry, run.cfg.n).only(Label::resonator);
  const ConstrainedSpace space = build_constrained_space(grid, mask);
  const MagneticSpectrum spec = spectrum(run, space);
  const SweepResult sw = sweep(eps_eff_of(run, es), spec, run.cfg.materials, run.cfg.sweep.samples());

  std::ostringstream csv;
  write_sweep_csv(csv, sw);
  write_csv_artifact(run.out / "sweep.csv", csv.str(), run.meta);
  std::ostringstream spec_csv;
  write_spectrum_csv(spec_csv, spec);
  write_csv_artifact(run.out / "spectrum.csv", spec_csv.str(), run.meta);

  json samples = json::array();
  for (const auto& s : sw.samples)
    samples.push_back({{"omega", s.omega},
                       {"k", s.k},
                       {"q", complex_json(s.q)},
                       {"mu", matrix_json(s.mu)},
                       {"eig_re_mu", {s.eig_re_mu[0], s.eig_re_mu[1], s.eig_re_mu[2]}},
                       {"eig_re_eps", {s.eig_re_eps[0], s.eig_re_eps[1], s.eig_re_eps[2]}},
                       {"flag", to_string(s.flag)},
                       {"truncation_residual", s.truncation_residual}});
  json counts = json::object();
  for (BandFlag f : {BandFlag::double_positive, BandFlag::single_negative, BandFlag::double_negative,
                     BandFlag::near_pole})
    counts[to_string(f)] = sw.count(f);
  const json payload = {{"n", run.cfg.n},
                        {"a_eff", matrix_json(es.a_eff)},
                        {"eps_eff", matrix_json(sw.eps_eff)},
                        {"spectrum", spectrum_json(spec)},
                        {"flag_counts", counts},
                        {"samples", samples},
                        {"warnings", sw.warnings}};
  write_json_artifact(run.out / "result.json", payload, run.meta);
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  const Run run = prepare(args, "validate");
  const SuiteReport rep = run_validation_suite(run.cfg);
  write_json_artifact(run.out / "validation.json", rep.to_json(), run.meta);
  for (const auto& c : rep.checks)
    std::cout << fmt::format("{} [{}] {}: {}{}\n", c.passed ? "ok  " : "FAIL", c.suite, c.name, format_double(c.value),
                             c.detail.empty() ? "" : " (" + c.detail + ")");
  return rep.ok() ? 0 : kExitValidation;
}

void print_error(const std::string& code, int exit, const std::string& message, const fs::path& out) {
  const json err = {{"error", {{"code", code}, {"exit_code", exit}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
  if (out.empty()) return;
  std::error_code ec;
  fs::create_directories(out, ec);
  std::ofstream f(out / "error.json");
  if (f) f << err.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Effective permittivity and permeability of periodic resonator and wire cells"};
  app.require_subcommand(1);
  CommonArgs args;
  bool dump_fields = false;
  bool direct = false;
  std::string q_text;

  auto common = [&args](CLI::App* sub) {
    sub->add_option("--config", args.config, "Run configuration (JSON)")->required();
    sub->add_option("--out", args.out, "Output directory (overrides output_dir)");
    sub->add_option("--threads", args.threads, "Worker thread cap")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", args.seed, "Random seed (overrides seed)");
  };
  CLI::App* electric_cmd = app.add_subcommand("cell-electric", "Solve the electric cell problem, write a_eff.json");
  common(electric_cmd);
  electric_cmd->add_flag("--dump-fields", dump_fields, "Also write potentials and fields in MHVX format");
  CLI::App* magnetic_cmd =
      app.add_subcommand("cell-magnetic", "Compute the magnetic spectrum, write spectrum.csv and mu-at-q.json");
  common(magnetic_cmd);
  magnetic_cmd->add_flag("--direct", direct, "Also solve the magnetic cell problem directly at q");
  magnetic_cmd->add_option("--q", q_text, "Evaluation point RE,IM");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Frequency sweep, write sweep.csv and result.json");
  common(sweep_cmd);
  CLI::App* validate_cmd = app.add_subcommand("validate", "Run the invariant suites, write validation.json");
  common(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config", kExitConfig, e.what(), {});
    return kExitConfig;
  }

  try {
    if (electric_cmd->parsed()) return cmd_cell_electric(args, dump_fields);
    if (magnetic_cmd->parsed()) return cmd_cell_magnetic(args, direct, q_text);
    if (sweep_cmd->parsed()) return cmd_sweep(args);
    if (validate_cmd->parsed()) return cmd_validate(args);
  } catch (const Error& e) {
    const int code = exit_code(e.code());
    print_error(to_string(e.code()), code, e.what(), args.out);
    return code;
  } catch (const std::exception& e) {
    print_error("internal", kExitOther, e.what(), args.out);
    return kExitOther;
  }
  return kExitOther;
}
