#include "metahom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <queue>

#include "metahom/error.hpp"

namespace metahom {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return "config";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::incompatible_rhs: return "incompatible_rhs";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::pole_proximity: return "pole_proximity";
    case ErrorCode::no_admissible_loop: return "no_admissible_loop";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

std::size_t VoxelMask::count(Label l) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(l)));
}

VoxelMask VoxelMask::only(Label keep) const {
  VoxelMask out(n_);
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == static_cast<std::uint8_t>(keep)) out.labels_[i] = labels_[i];
  return out;
}

std::vector<int> CellGeometry::wire_directions() const {
  std::vector<int> dirs;
  if (wire_radius <= 0.0) return dirs;
  for (const auto& w : wires) dirs.push_back(w.direction);
  return dirs;
}

CellGeometry with_wire_radius(const CellGeometry& geom, double radius) {
  CellGeometry g = geom;
  g.wire_radius = radius;
  return g;
}

CellGeometry without_wires(const CellGeometry& geom) {
  CellGeometry g = geom;
  g.wires.clear();
  g.wire_radius = 0.0;
  return g;
}

double periodic_offset(double x) { return x - std::floor(x + 0.5); }

std::array<int, 2> transverse_axes(int direction) {
  switch (direction) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

double wire_axis_distance(const Wire& wire, const Eigen::Vector3d& y) {
  const auto ax = transverse_axes(wire.direction);
  const double da = periodic_offset(y[ax[0]] - wire.position[0]);
  const double db = periodic_offset(y[ax[1]] - wire.position[1]);
  return std::hypot(da, db);
}

namespace {

struct MembershipVisitor {
  const Eigen::Vector3d& y;
  bool operator()(const NoResonator&) const { return false; }
  bool operator()(const Ball& b) const { return (y - b.center).norm() < b.radius; }
  bool operator()(const Box& b) const {
    return ((y - b.center).cwiseAbs() - b.half_widths).maxCoeff() < 0.0;
  }
  bool operator()(const MaskShape& m) const {
    const int n = m.mask->n();
    const int i = static_cast<int>(std::floor(y.x() * n));
    const int j = static_cast<int>(std::floor(y.y() * n));
    const int k = static_cast<int>(std::floor(y.z() * n));
    return m.mask->is_resonator(i, j, k);
  }
};

Eigen::Vector3d voxel_center(int i, int j, int k, double h) {
  return {(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h};
}

// Flood fill over voxels satisfying `pred`; returns the number of components.
template <class Pred>
int count_components(int n, Pred pred) {
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  std::vector<std::uint8_t> seen(total, 0);
  int components = 0;
  std::queue<std::array<int, 3>> queue;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t idx = i + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k);
        if (seen[idx] || !pred(i, j, k)) continue;
        ++components;
        seen[idx] = 1;
        queue.push({i, j, k});
        while (!queue.empty()) {
          const auto [a, b, c] = queue.front();
          queue.pop();
          static constexpr int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& d : nb) {
            const int x = (a + d[0] + n) % n, y = (b + d[1] + n) % n, z = (c + d[2] + n) % n;
            const std::size_t id = x + static_cast<std::size_t>(n) * (y + static_cast<std::size_t>(n) * z);
            if (!seen[id] && pred(x, y, z)) {
              seen[id] = 1;
              queue.push({x, y, z});
            }
          }
        }
      }
  return components;
}

// Smallest distance from the resonator to the boundary of the unit cell.
double containment_margin(const ShapeSpec& shape) {
  struct V {
    double operator()(const NoResonator&) const { return std::numeric_limits<double>::infinity(); }
    double operator()(const Ball& b) const {
      if (b.radius <= 0.0) return -1.0;
      return std::min(b.center.minCoeff(), (Eigen::Vector3d::Ones() - b.center).minCoeff()) - b.radius;
    }
    double operator()(const Box& b) const {
      if (b.half_widths.minCoeff() <= 0.0) return -1.0;
      return std::min((b.center - b.half_widths).minCoeff(),
                      (Eigen::Vector3d::Ones() - b.center - b.half_widths).minCoeff());
    }
    double operator()(const MaskShape& m) const {
      const int n = m.mask->n();
      const double h = 1.0 / n;
      int layer = n;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i)
            if (m.mask->is_resonator(i, j, k))
              layer = std::min({layer, i, j, k, n - 1 - i, n - 1 - j, n - 1 - k});
      if (layer == n) return std::numeric_limits<double>::infinity();
      return layer * h;
    }
  };
  return std::visit(V{}, shape);
}

// Distance between a wire's cylinder surface and the resonator (negative on overlap).
double wire_resonator_margin(const ShapeSpec& shape, const Wire& wire, double alpha) {
  const auto ax = transverse_axes(wire.direction);
  struct V {
    const Wire& wire;
    std::array<int, 2> ax;
    double alpha;
    double operator()(const NoResonator&) const { return std::numeric_limits<double>::infinity(); }
    double operator()(const Ball& b) const {
      return wire_axis_distance(wire, b.center) - b.radius - alpha;
    }
    double operator()(const Box& b) const {
      double sq = 0.0;
      for (int t = 0; t < 2; ++t) {
        const double gap = std::abs(periodic_offset(wire.position[t] - b.center[ax[t]])) - b.half_widths[ax[t]];
        if (gap > 0.0) sq += gap * gap;
      }
      return std::sqrt(sq) - alpha;
    }
    double operator()(const MaskShape& m) const {
      const int n = m.mask->n();
      const double h = 1.0 / n;
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i)
            if (m.mask->is_resonator(i, j, k))
              best = std::min(best, wire_axis_distance(wire, voxel_center(i, j, k, h)));
      // voxel centers sit up to h/sqrt(2) inside the voxel in the transverse plane
      return best - h / std::sqrt(2.0) - alpha;
    }
  };
  return std::visit(V{wire, ax, alpha}, shape);
}

double wire_wire_margin(const Wire& a, const Wire& b, double alpha) {
  if (a.direction == b.direction) {
    const auto ax = transverse_axes(a.direction);
    const double d = std::hypot(periodic_offset(a.position[0] - b.position[0]),
                                periodic_offset(a.position[1] - b.position[1]));
    (void)ax;
    return d - 2.0 * alpha;
  }
  // The two lines are skew or crossing; their distance is the offset along the
  // third axis, on which both have a fixed coordinate.
  const int third = 3 - a.direction - b.direction;
  auto coord = [third](const Wire& w) {
    const auto ax = transverse_axes(w.direction);
    return ax[0] == third ? w.position[0] : w.position[1];
  };
  return std::abs(periodic_offset(coord(a) - coord(b))) - 2.0 * alpha;
}

}  // namespace

bool in_resonator(const ShapeSpec& shape, const Eigen::Vector3d& y) {
  return std::visit(MembershipVisitor{y}, shape);
}

Eigen::Vector3d resonator_center(const ShapeSpec& shape) {
  struct V {
    Eigen::Vector3d operator()(const NoResonator&) const { return Eigen::Vector3d::Constant(0.5); }
    Eigen::Vector3d operator()(const Ball& b) const { return b.center; }
    Eigen::Vector3d operator()(const Box& b) const { return b.center; }
    Eigen::Vector3d operator()(const MaskShape& m) const {
      const int n = m.mask->n();
      const double h = 1.0 / n;
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      std::size_t count = 0;
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i)
            if (m.mask->is_resonator(i, j, k)) {
              sum += voxel_center(i, j, k, h);
              ++count;
            }
      return count ? Eigen::Vector3d(sum / static_cast<double>(count)) : Eigen::Vector3d::Constant(0.5);
    }
  };
  return std::visit(V{}, shape);
}

VoxelMask rasterize(const CellGeometry& geom, int n) {
  if (n < 8) throw Error(ErrorCode::resolution, fmt::format("grid size {} is below the minimum of 8", n));
  if (const auto* m = std::get_if<MaskShape>(&geom.resonator); m && m->mask->n() != n)
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("voxel mask '{}' has n={}, grid has n={}", m->source, m->mask->n(), n));

  VoxelMask mask(n);
  const double h = 1.0 / n;
  const bool wires_on = geom.wire_radius > 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d y = voxel_center(i, j, k, h);
        const std::size_t idx = mask.index(i, j, k);
        if (in_resonator(geom.resonator, y)) {
          mask.set(idx, Label::resonator);
          continue;
        }
        if (!wires_on) continue;
        for (const auto& w : geom.wires)
          if (wire_axis_distance(w, y) < geom.wire_radius) {
            mask.set(idx, wire_label(w.direction));
            break;
          }
      }

  if (wires_on)
    for (const auto& w : geom.wires)
      if (mask.count(wire_label(w.direction)) == 0)
        throw Error(ErrorCode::resolution,
                    fmt::format("wire {} of radius {} has an empty cross-section on the n={} grid",
                                w.direction + 1, geom.wire_radius, n));
  return mask;
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate(const CellGeometry& geom) {
  ValidationReport report;
  const double alpha = geom.wire_radius;

  report.checks.push_back({"wire radius in [0, 0.5)", alpha >= 0.0 && alpha < 0.5,
                           std::min(alpha, 0.5 - alpha), fmt::format("alpha = {}", alpha)});

  {
    bool distinct = true, inside = true;
    std::array<int, 3> seen{};
    for (const auto& w : geom.wires) {
      if (w.direction < 0 || w.direction > 2) {
        distinct = false;
        continue;
      }
      if (++seen[w.direction] > 1) distinct = false;
      if ((w.position.array() <= 0.0).any() || (w.position.array() >= 1.0).any()) inside = false;
    }
    report.checks.push_back({"wire directions distinct", distinct && geom.wires.size() <= 3, 0.0,
                             fmt::format("{} wire(s)", geom.wires.size())});
    report.checks.push_back({"wire positions in (0,1)^2", inside, 0.0, ""});
  }

  const double contain = containment_margin(geom.resonator);
  report.checks.push_back({"resonator compactly contained", contain > 0.0, contain,
                           fmt::format("min distance to cell boundary = {}", contain)});

  if (geom.wire_radius > 0.0) {
    for (const auto& w : geom.wires) {
      const double m = wire_resonator_margin(geom.resonator, w, alpha);
      report.checks.push_back({fmt::format("wire {} disjoint from resonator", w.direction + 1), m > 0.0, m,
                               fmt::format("surface gap = {}", m)});
    }
    for (std::size_t a = 0; a < geom.wires.size(); ++a)
      for (std::size_t b = a + 1; b < geom.wires.size(); ++b) {
        const double m = wire_wire_margin(geom.wires[a], geom.wires[b], alpha);
        report.checks.push_back({fmt::format("wires {} and {} disjoint", geom.wires[a].direction + 1,
                                             geom.wires[b].direction + 1),
                                 m > 0.0, m, fmt::format("surface gap = {}", m)});
      }
  }
  return report;
}

ValidationReport validate(const CellGeometry& geom, const VoxelMask& mask) {
  ValidationReport report = validate(geom);
  const int n = mask.n();
  const double h = 1.0 / n;

  // Boundary layer of voxels must be free of resonator so that the exterior
  // contains closed grid loops in every direction.
  int layer = n;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (mask.is_resonator(i, j, k)) layer = std::min({layer, i, j, k, n - 1 - i, n - 1 - j, n - 1 - k});
  const bool has_res = mask.count(Label::resonator) > 0;
  report.checks.push_back({"mask: resonator clear of boundary voxels", !has_res || layer >= 1,
                           has_res ? layer * h : 0.5, fmt::format("free boundary layers = {}", has_res ? layer : n)});

  const int res_components =
      count_components(n, [&](int i, int j, int k) { return mask.at(i, j, k) == Label::resonator; });
  report.checks.push_back({"mask: resonator connected", res_components <= 1, 0.0,
                           fmt::format("{} component(s); simple connectivity is not verified", res_components)});

  const int ext_components =
      count_components(n, [&](int i, int j, int k) { return mask.at(i, j, k) != Label::resonator; });
  report.checks.push_back({"mask: complement of resonator connected", ext_components == 1, 0.0,
                           fmt::format("{} component(s)", ext_components)});

  // Overlap: voxel centers claimed by more than one region.
  std::size_t overlaps = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d y = voxel_center(i, j, k, h);
        int owners = in_resonator(geom.resonator, y) ? 1 : 0;
        if (geom.wire_radius > 0.0)
          for (const auto& w : geom.wires) owners += wire_axis_distance(w, y) < geom.wire_radius ? 1 : 0;
        overlaps += owners > 1 ? 1 : 0;
      }
  report.checks.push_back({"mask: regions do not overlap", overlaps == 0, -static_cast<double>(overlaps),
                           fmt::format("{} shared voxel(s)", overlaps)});

  // Closure contact: distinct non-exterior labels in 26-adjacent voxels share grid nodes.
  std::size_t contacts = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Label a = mask.at(i, j, k);
        if (a == Label::exterior) continue;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const Label b = mask.at(i + di, j + dj, k + dk);
              if (b != Label::exterior && b != a) ++contacts;
            }
      }
  report.checks.push_back({"mask: region closures disjoint", contacts == 0, -static_cast<double>(contacts / 2),
                           fmt::format("{} touching voxel pair(s)", contacts / 2)});

  if (geom.wire_radius > 0.0)
    for (const auto& w : geom.wires) {
      const std::size_t c = mask.count(wire_label(w.direction));
      report.checks.push_back({fmt::format("mask: wire {} resolved", w.direction + 1), c > 0,
                               static_cast<double>(c), fmt::format("{} voxel(s)", c)});
    }
  return report;
}

}  // namespace metahom
