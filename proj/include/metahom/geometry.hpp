#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace metahom {

/// Voxel labels. Values are the on-disk byte values of the MHVX mask format.
enum class Label : std::uint8_t {
  exterior = 0,
  resonator = 1,
  wire1 = 2,
  wire2 = 3,
  wire3 = 4,
};

inline Label wire_label(int direction) { return static_cast<Label>(2 + direction); }

/// Per-voxel labels on an n^3 grid, x-fastest ordering. Voxel (i,j,k) is the
/// cube [i h, (i+1) h) x [j h, (j+1) h) x [k h, (k+1) h) with h = 1/n.
class VoxelMask {
 public:
  VoxelMask() = default;
  explicit VoxelMask(int n) : n_(n), labels_(static_cast<std::size_t>(n) * n * n, 0) {}

  int n() const { return n_; }
  std::size_t size() const { return labels_.size(); }

  std::size_t index(int i, int j, int k) const {
    auto w = [this](int a) { return ((a % n_) + n_) % n_; };
    return static_cast<std::size_t>(w(i)) +
           static_cast<std::size_t>(n_) * (w(j) + static_cast<std::size_t>(n_) * w(k));
  }

  Label at(int i, int j, int k) const { return static_cast<Label>(labels_[index(i, j, k)]); }
  Label at(std::size_t idx) const { return static_cast<Label>(labels_[idx]); }
  void set(std::size_t idx, Label l) { labels_[idx] = static_cast<std::uint8_t>(l); }

  std::size_t count(Label l) const;
  bool is_resonator(int i, int j, int k) const { return at(i, j, k) == Label::resonator; }

  const std::vector<std::uint8_t>& raw() const { return labels_; }
  std::vector<std::uint8_t>& raw() { return labels_; }

  /// Copy with every label other than `keep` reset to exterior.
  VoxelMask only(Label keep) const;

  friend bool operator==(const VoxelMask&, const VoxelMask&) = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> labels_;
};

struct NoResonator {};

struct Ball {
  Eigen::Vector3d center{0.5, 0.5, 0.5};
  double radius = 0.0;
};

struct Box {
  Eigen::Vector3d center{0.5, 0.5, 0.5};
  Eigen::Vector3d half_widths = Eigen::Vector3d::Zero();
};

/// Resonator given as an imported voxel mask; only resonator-labelled voxels
/// are used.
struct MaskShape {
  std::shared_ptr<const VoxelMask> mask;
  std::string source;
};

using ShapeSpec = std::variant<NoResonator, Ball, Box, MaskShape>;

/// Periodic cylinder of radius alpha around the line through `position` in
/// direction e_{direction}. `position` holds the two transverse coordinates in
/// increasing axis order, e.g. (y, z) for direction 0.
struct Wire {
  int direction = 2;  // 0, 1, 2
  Eigen::Vector2d position{0.1, 0.1};
};

struct CellGeometry {
  ShapeSpec resonator = NoResonator{};
  double wire_radius = 0.0;  // relative radius alpha
  std::vector<Wire> wires;

  bool has_resonator() const { return !std::holds_alternative<NoResonator>(resonator); }
  std::vector<int> wire_directions() const;
};

/// Same geometry with the wire radius replaced (used for the eta-scaled wires).
CellGeometry with_wire_radius(const CellGeometry& geom, double radius);
/// Same geometry with all wires removed.
CellGeometry without_wires(const CellGeometry& geom);

struct MaterialParams {
  std::complex<double> eps_b{1.0, 0.0};
  std::complex<double> eps_w{1.0, 0.0};
  double eps0 = 1.0;
  double mu0 = 1.0;

  bool lossless() const { return eps_b.imag() == 0.0 || eps_w.imag() == 0.0; }
};

/// Point membership for the resonator shape (mask shapes are answered on their
/// own grid).
bool in_resonator(const ShapeSpec& shape, const Eigen::Vector3d& y);

/// Periodic distance from y to the axis of `wire`, measured in the transverse plane.
double wire_axis_distance(const Wire& wire, const Eigen::Vector3d& y);

/// Transverse axis indices of a wire direction, in increasing order.
std::array<int, 2> transverse_axes(int direction);

/// Wrap x into [-0.5, 0.5).
double periodic_offset(double x);

/// Rasterize by voxel-center membership. Throws ErrorCode::resolution when a
/// wire with positive radius covers no voxel center.
VoxelMask rasterize(const CellGeometry& geom, int n);

/// Centroid of the resonator (shape center for analytic shapes, voxel centroid
/// for masks). Returns the cell center when there is no resonator.
Eigen::Vector3d resonator_center(const ShapeSpec& shape);

struct Check {
  std::string name;
  bool passed = true;
  double margin = 0.0;  // measured margin in cell units (negative when violated)
  std::string detail;
};

struct ValidationReport {
  std::vector<Check> checks;
  bool ok() const;
  const Check* find(const std::string& name) const;
};

/// Analytic checks of the cell assumptions: containment, disjointness, parameter ranges.
ValidationReport validate(const CellGeometry& geom);
/// Analytic checks plus checks on the rasterized mask at working resolution.
ValidationReport validate(const CellGeometry& geom, const VoxelMask& mask);

}  // namespace metahom
