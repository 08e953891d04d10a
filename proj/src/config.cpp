#include "metahom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "metahom/error.hpp"
#include "metahom/voxel_io.hpp"

namespace metahom {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::config, fmt::format("{}: {}", path, msg));
}

// Object reader that tracks the field path and rejects unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(sub(key), "unknown key");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number()) fail(sub(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(sub(key), "expected a finite number");
    return x;
  }

  long long integer(const std::string& key, long long def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(sub(key), "expected an integer");
    return v->get<long long>();
  }

  std::string text(const std::string& key, const std::string& def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_string()) fail(sub(key), "expected a string");
    return v->get<std::string>();
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const std::string& key, const Eigen::Matrix<double, N, 1>& def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_array() || v->size() != N) fail(sub(key), fmt::format("expected an array of {} numbers", N));
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      if (!(*v)[static_cast<std::size_t>(i)].is_number()) fail(sub(key), "expected numbers");
      out[i] = (*v)[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

  cplx complex(const std::string& key, cplx def) {
    const json* v = get(key);
    if (!v) return def;
    if (v->is_number()) return {v->get<double>(), 0.0};
    const Eigen::Vector2d c = vec<2>(key, Eigen::Vector2d(def.real(), def.imag()));
    return {c[0], c[1]};
  }

  Reader child(const std::string& key) {
    static const json empty = json::object();
    const json* v = get(key);
    return Reader(v ? *v : empty, sub(key));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ShapeSpec parse_resonator(Reader r, const std::filesystem::path& base_dir) {
  const std::string shape = r.text("shape", "none");
  if (shape == "none") return NoResonator{};
  if (shape == "ball") {
    Ball b;
    b.center = r.vec<3>("center", b.center);
    b.radius = r.number("radius", 0.0);
    if (!(b.radius > 0.0)) fail(r.sub("radius"), "must be positive");
    return b;
  }
  if (shape == "box") {
    Box b;
    b.center = r.vec<3>("center", b.center);
    b.half_widths = r.vec<3>("half_widths", b.half_widths);
    if (!(b.half_widths.minCoeff() > 0.0)) fail(r.sub("half_widths"), "must be positive");
    return b;
  }
  if (shape == "mask") {
    MaskShape m;
    m.source = r.text("path", "");
    if (m.source.empty()) fail(r.sub("path"), "required for mask resonators");
    std::filesystem::path p(m.source);
    if (p.is_relative()) p = base_dir / p;
    try {
      m.mask = std::make_shared<const VoxelMask>(read_mask(p.string()).only(Label::resonator));
    } catch (const Error& e) {
      fail(r.sub("path"), e.what());
    }
    return m;
  }
  fail(r.sub("shape"), fmt::format("unknown shape '{}' (expected none, ball, box or mask)", shape));
}

json resonator_json(const ShapeSpec& shape) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoResonator>) {
          return {{"shape", "none"}};
        } else if constexpr (std::is_same_v<T, Ball>) {
          return {{"shape", "ball"}, {"center", {s.center[0], s.center[1], s.center[2]}}, {"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, Box>) {
          return {{"shape", "box"},
                  {"center", {s.center[0], s.center[1], s.center[2]}},
                  {"half_widths", {s.half_widths[0], s.half_widths[1], s.half_widths[2]}}};
        } else {
          return {{"shape", "mask"}, {"path", s.source}};
        }
      },
      shape);
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace

EigenSolveOptions RunConfig::eigen_options() const {
  EigenSolveOptions eo;
  eo.num_eigenpairs = spectrum.num_modes;
  eo.tolerance = spectrum.tolerance;
  eo.max_restarts = spectrum.max_restarts;
  eo.max_basis = spectrum.max_basis;
  eo.seed = seed;
  eo.inner = solver;
  eo.inner.tolerance = spectrum.inner_tolerance;
  return eo;
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Reader root(j, "");
  const long long version = root.integer("schema_version", -1);
  if (version != kSchemaVersion)
    fail("schema_version", fmt::format("expected {}, got {}", kSchemaVersion, version));

  {
    Reader g = root.child("geometry");
    c.geometry.resonator = parse_resonator(g.child("resonator"), base_dir);
    c.geometry.wire_radius = g.number("wire_radius", 0.0);
    if (!(c.geometry.wire_radius >= 0.0 && c.geometry.wire_radius < 0.5))
      fail(g.sub("wire_radius"), fmt::format("must lie in [0, 0.5), got {}", c.geometry.wire_radius));
    if (const json* wires = g.get("wires")) {
      if (!wires->is_array() || wires->size() > 3) fail(g.sub("wires"), "expected an array of at most 3 wires");
      for (std::size_t i = 0; i < wires->size(); ++i) {
        Reader w((*wires)[i], fmt::format("{}[{}]", g.sub("wires"), i));
        Wire wire;
        const long long d = w.integer("direction", 3);
        if (d < 1 || d > 3) fail(w.sub("direction"), fmt::format("must be 1, 2 or 3, got {}", d));
        wire.direction = static_cast<int>(d - 1);
        wire.position = w.vec<2>("position", wire.position);
        c.geometry.wires.push_back(wire);
      }
    }
  }
  {
    Reader m = root.child("materials");
    c.materials.eps_b = m.complex("eps_b", c.materials.eps_b);
    c.materials.eps_w = m.complex("eps_w", c.materials.eps_w);
    c.materials.eps0 = m.number("eps0", c.materials.eps0);
    c.materials.mu0 = m.number("mu0", c.materials.mu0);
    if (c.materials.eps_b.imag() < 0.0) fail(m.sub("eps_b"), "imaginary part must be non-negative");
    if (c.materials.eps_w.imag() < 0.0) fail(m.sub("eps_w"), "imaginary part must be non-negative");
    if (!(c.materials.eps0 > 0.0)) fail(m.sub("eps0"), "must be positive");
    if (!(c.materials.mu0 > 0.0)) fail(m.sub("mu0"), "must be positive");
  }
  {
    Reader g = root.child("grid");
    const long long n = g.integer("n", c.n);
    if (n < 8 || n > 256) fail(g.sub("n"), fmt::format("must lie in [8, 256], got {}", n));
    c.n = static_cast<int>(n);
  }
  {
    Reader s = root.child("solver");
    c.solver.tolerance = s.number("tolerance", c.solver.tolerance);
    c.solver.max_iterations = static_cast<int>(s.integer("max_iterations", c.solver.max_iterations));
    const std::string pc = s.text("preconditioner", to_string(c.solver.preconditioner));
    try {
      c.solver.preconditioner = preconditioner_from_string(pc);
    } catch (const Error&) {
      fail(s.sub("preconditioner"), fmt::format("unknown preconditioner '{}'", pc));
    }
    try {
      c.solver.check();
    } catch (const Error& e) {
      fail("solver", e.what());
    }
  }
  {
    Reader s = root.child("spectrum");
    c.spectrum.num_modes = static_cast<int>(s.integer("num_modes", c.spectrum.num_modes));
    c.spectrum.tolerance = s.number("tolerance", c.spectrum.tolerance);
    c.spectrum.max_restarts = static_cast<int>(s.integer("max_restarts", c.spectrum.max_restarts));
    c.spectrum.max_basis = static_cast<int>(s.integer("max_basis", c.spectrum.max_basis));
    c.spectrum.inner_tolerance = s.number("inner_tolerance", c.spectrum.inner_tolerance);
    const std::string target = s.text("target", "bright");
    if (target == "bright")
      c.spectrum.target = SpectrumTarget::bright;
    else if (target == "lowest")
      c.spectrum.target = SpectrumTarget::lowest;
    else
      fail(s.sub("target"), fmt::format("expected bright or lowest, got '{}'", target));
    if (c.spectrum.num_modes < 1) fail(s.sub("num_modes"), "must be at least 1");
    if (!(c.spectrum.tolerance > 0.0)) fail(s.sub("tolerance"), "must be positive");
    if (!(c.spectrum.inner_tolerance > 0.0)) fail(s.sub("inner_tolerance"), "must be positive");
    if (c.spectrum.max_restarts < 0) fail(s.sub("max_restarts"), "must be non-negative");
    if (c.spectrum.max_basis < 0) fail(s.sub("max_basis"), "must be non-negative");
  }
  {
    Reader s = root.child("sweep");
    c.sweep.omega_min = s.number("omega_min", c.sweep.omega_min);
    c.sweep.omega_max = s.number("omega_max", c.sweep.omega_max);
    c.sweep.count = static_cast<int>(s.integer("count", c.sweep.count));
    const std::string spacing = s.text("spacing", "linear");
    if (spacing == "linear")
      c.sweep.spacing = Spacing::linear;
    else if (spacing == "log")
      c.sweep.spacing = Spacing::log;
    else
      fail(s.sub("spacing"), fmt::format("expected linear or log, got '{}'", spacing));
    try {
      c.sweep.check();
    } catch (const Error& e) {
      fail("sweep", e.what());
    }
  }
  {
    Reader m = root.child("magnetic");
    if (m.has("q")) c.q = m.complex("q", {});
  }
  {
    Reader v = root.child("validation");
    if (const json* etas = v.get("etas")) {
      if (!etas->is_array() || etas->empty()) fail(v.sub("etas"), "expected a non-empty array");
      c.validation.etas.clear();
      for (const auto& e : *etas) {
        if (!e.is_number() || !(e.get<double>() > 0.0) || e.get<double>() > 1.0)
          fail(v.sub("etas"), "entries must lie in (0, 1]");
        c.validation.etas.push_back(e.get<double>());
      }
    }
    const long long n = v.integer("n", 0);
    if (n != 0 && (n < 8 || n > 256)) fail(v.sub("n"), fmt::format("must be 0 or lie in [8, 256], got {}", n));
    c.validation.n = static_cast<int>(n);
  }
  c.output_dir = root.text("output_dir", c.output_dir);
  const long long seed = root.integer("seed", static_cast<long long>(c.seed));
  if (seed < 0) fail("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const long long threads = root.integer("threads", 0);
  if (threads < 0) fail("threads", "must be non-negative");
  c.threads = static_cast<int>(threads);

  const ValidationReport report = validate(c.geometry);
  for (const auto& check : report.checks)
    if (!check.passed)
      fail("geometry", fmt::format("{} fails{}", check.name, check.detail.empty() ? "" : " (" + check.detail + ")"));
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, fmt::format("cannot open config file '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::config, fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
  return parse_config(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json wires = json::array();
  for (const auto& w : c.geometry.wires)
    wires.push_back({{"direction", w.direction + 1}, {"position", {w.position[0], w.position[1]}}});
  json etas = json::array();
  for (double e : c.validation.etas) etas.push_back(e);
  json j = {
      {"schema_version", kSchemaVersion},
      {"geometry",
       {{"resonator", resonator_json(c.geometry.resonator)},
        {"wire_radius", c.geometry.wire_radius},
        {"wires", wires}}},
      {"materials",
       {{"eps_b", complex_json(c.materials.eps_b)},
        {"eps_w", complex_json(c.materials.eps_w)},
        {"eps0", c.materials.eps0},
        {"mu0", c.materials.mu0}}},
      {"grid", {{"n", c.n}}},
      {"solver",
       {{"tolerance", c.solver.tolerance},
        {"max_iterations", c.solver.max_iterations},
        {"preconditioner", to_string(c.solver.preconditioner)}}},
      {"spectrum",
       {{"num_modes", c.spectrum.num_modes},
        {"tolerance", c.spectrum.tolerance},
        {"max_restarts", c.spectrum.max_restarts},
        {"max_basis", c.spectrum.max_basis},
        {"inner_tolerance", c.spectrum.inner_tolerance},
        {"target", c.spectrum.target == SpectrumTarget::bright ? "bright" : "lowest"}}},
      {"sweep",
       {{"omega_min", c.sweep.omega_min},
        {"omega_max", c.sweep.omega_max},
        {"count", c.sweep.count},
        {"spacing", c.sweep.spacing == Spacing::linear ? "linear" : "log"}}},
      {"magnetic", json::object()},
      {"validation", {{"etas", etas}, {"n", c.validation.n}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"threads", c.threads},
  };
  if (c.q) j["magnetic"]["q"] = complex_json(*c.q);
  return j;
}

}  // namespace metahom
