#include "metahom/electric_cell.hpp"

#include <cmath>
#include <exception>

#include <fmt/format.h>

#include "metahom/error.hpp"

namespace metahom {

std::vector<Vector<double>> harmonic_extension(const PeriodicGrid& grid, const std::vector<DirichletData>& data,
                                               const LinearSolveOptions& opts, std::vector<SolveReport>* reports) {
  opts.check();
  const Index nn = grid.num_nodes();
  if (data.empty()) return {};
  const std::vector<char>& fixed = data.front().fixed;
  for (const auto& d : data)
    if (static_cast<Index>(d.fixed.size()) != nn || d.values.size() != nn || d.fixed != fixed)
      throw Error(ErrorCode::dimension_mismatch, "harmonic_extension: inconsistent Dirichlet data");

  std::vector<Index> free_index(static_cast<std::size_t>(nn), -1);
  std::vector<Index> free_nodes;
  for (Index i = 0; i < nn; ++i)
    if (!fixed[static_cast<std::size_t>(i)]) {
      free_index[static_cast<std::size_t>(i)] = static_cast<Index>(free_nodes.size());
      free_nodes.push_back(i);
    }
  if (free_nodes.empty())
    throw Error(ErrorCode::resolution, "the constrained region covers every node of the grid");

  std::vector<Vector<double>> out;
  if (reports) reports->assign(data.size(), SolveReport{});
  if (free_nodes.size() == static_cast<std::size_t>(nn)) {
    // Nothing pins the potential: the harmonic periodic field is a constant.
    for (std::size_t k = 0; k < data.size(); ++k) {
      out.push_back(Vector<double>::Zero(nn));
      if (reports) (*reports)[k].converged = true;
    }
    return out;
  }

  const SparseOperator<double> lap = build_laplacian(grid);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(7 * free_nodes.size());
  for (Index r = 0; r < static_cast<Index>(free_nodes.size()); ++r)
    for (SparseMatrix<double>::InnerIterator it(lap.matrix, free_nodes[static_cast<std::size_t>(r)]); it; ++it) {
      const Index c = free_index[static_cast<std::size_t>(it.col())];
      if (c >= 0) t.emplace_back(r, c, it.value());
    }
  SparseOperator<double> reduced;
  reduced.matrix.resize(static_cast<Index>(free_nodes.size()), static_cast<Index>(free_nodes.size()));
  reduced.matrix.setFromTriplets(t.begin(), t.end());
  reduced.symmetry = Symmetry::symmetric;
  reduced.definiteness = Definiteness::positive_definite;
  const auto pc = make_preconditioner(reduced.matrix, opts.preconditioner);

  out.resize(data.size());
  std::vector<std::exception_ptr> failures(data.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < static_cast<int>(data.size()); ++k) {
    try {
      Vector<double> boundary = data[static_cast<std::size_t>(k)].values;
      for (Index f : free_nodes) boundary[f] = 0.0;
      const Vector<double> load = -(lap.matrix * boundary);
      Vector<double> rhs(static_cast<Index>(free_nodes.size()));
      for (std::size_t r = 0; r < free_nodes.size(); ++r) rhs[static_cast<Index>(r)] = load[free_nodes[r]];
      auto sol = cg_solve<double>(reduced, rhs, opts, pc.get());
      Vector<double> full = boundary;
      for (std::size_t r = 0; r < free_nodes.size(); ++r) full[free_nodes[r]] = sol.x[static_cast<Index>(r)];
      out[static_cast<std::size_t>(k)] = std::move(full);
      if (reports) (*reports)[static_cast<std::size_t>(k)] = std::move(sol.report);
    } catch (...) {
      failures[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

namespace {

Eigen::Matrix3cd gram(const PeriodicGrid& grid, const std::array<Vector<double>, 3>& fields) {
  Eigen::Matrix3cd a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = grid.weight() * fields[i].dot(fields[j]);
  return a;
}

}  // namespace

ElectricCellSolution solve_electric_cell(const VoxelMask& mask, const Eigen::Vector3d& chart_origin,
                                         const PeriodicGrid& grid, const LinearSolveOptions& opts) {
  if (mask.n() != grid.n())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("mask resolution {} does not match grid resolution {}", mask.n(), grid.n()));
  ElectricCellSolution sol;
  sol.n = grid.n();
  sol.mask = mask;
  sol.chart_origin = chart_origin;

  const std::vector<char> fixed =
      closure_nodes(grid, [&](Index c) { return mask.at(static_cast<std::size_t>(c)) == Label::resonator; });
  std::vector<DirichletData> data(3);
  for (int j = 0; j < 3; ++j) {
    data[j].fixed = fixed;
    data[j].values = Vector<double>::Zero(grid.num_nodes());
    for (Index v = 0; v < grid.num_nodes(); ++v)
      if (fixed[static_cast<std::size_t>(v)])
        data[j].values[v] = -periodic_offset(grid.node_position(v)[j] - chart_origin[j]);
  }
  auto theta = harmonic_extension(grid, data, opts, &sol.reports);

  const SparseOperator<double> grad = build_grad(grid);
  for (int j = 0; j < 3; ++j) {
    sol.theta[j] = std::move(theta[static_cast<std::size_t>(j)]);
    sol.e_fields[j] = grad * sol.theta[j] + unit_edge_field(grid, j);
  }
  sol.a_eff = gram(grid, sol.e_fields);
  return sol;
}

ElectricCellSolution solve_electric_cell(const CellGeometry& geom, const PeriodicGrid& grid,
                                         const LinearSolveOptions& opts) {
  const VoxelMask mask = rasterize(without_wires(geom), grid.n());
  return solve_electric_cell(mask, resonator_center(geom.resonator), grid, opts);
}

Eigen::Matrix3d a_eff_from_gradients(const ElectricCellSolution& sol, const PeriodicGrid& grid) {
  const SparseOperator<double> grad = build_grad(grid);
  std::array<Vector<double>, 3> g;
  for (int j = 0; j < 3; ++j) g[j] = grad * sol.theta[j];
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) += grid.weight() * g[i].dot(g[j]);
  return a;
}

ThetaEtaSolution solve_theta_eta(const CellGeometry& geom, const PeriodicGrid& grid, double eta,
                                 const LinearSolveOptions& opts) {
  if (!(eta > 0.0 && eta <= 1.0))
    throw Error(ErrorCode::config, fmt::format("eta must lie in (0, 1], got {}", eta));
  ThetaEtaSolution sol;
  sol.eta = eta;
  sol.wire_radius = geom.wire_radius * eta;
  const CellGeometry scaled = with_wire_radius(geom, sol.wire_radius);
  sol.mask = rasterize(scaled, grid.n());

  const Index nn = grid.num_nodes();
  const std::vector<char> sigma =
      closure_nodes(grid, [&](Index c) { return sol.mask.at(static_cast<std::size_t>(c)) == Label::resonator; });
  std::vector<std::vector<char>> wire_nodes;
  for (const Wire& w : scaled.wires) {
    const Label l = wire_label(w.direction);
    wire_nodes.push_back(closure_nodes(grid, [&](Index c) { return sol.mask.at(static_cast<std::size_t>(c)) == l; }));
  }

  std::vector<char> fixed = sigma;
  for (const auto& wn : wire_nodes)
    for (Index v = 0; v < nn; ++v) fixed[static_cast<std::size_t>(v)] |= wn[static_cast<std::size_t>(v)];

  std::vector<DirichletData> data(3);
  for (int j = 0; j < 3; ++j) {
    data[j].fixed = fixed;
    data[j].values = Vector<double>::Zero(nn);
    std::vector<char> assigned(static_cast<std::size_t>(nn), 0);
    auto put = [&](Index v, double value, const char* region) {
      auto& a = assigned[static_cast<std::size_t>(v)];
      if (a && std::abs(data[j].values[v] - value) > 1e-12)
        throw Error(ErrorCode::resolution,
                    fmt::format("node {} receives conflicting data from {}; refine the grid", v, region));
      data[j].values[v] = value;
      a = 1;
    };
    for (Index v = 0; v < nn; ++v)
      if (sigma[static_cast<std::size_t>(v)]) put(v, -grid.node_position(v)[j], "the resonator");
    for (std::size_t w = 0; w < scaled.wires.size(); ++w) {
      const Wire& wire = scaled.wires[w];
      const auto axes = transverse_axes(wire.direction);
      for (Index v = 0; v < nn; ++v) {
        if (!wire_nodes[w][static_cast<std::size_t>(v)]) continue;
        if (wire.direction == j) {
          put(v, 0.0, "a wire");
          continue;
        }
        // y_j across the wire, continued from the axis without wrapping.
        const double axis = wire.position[axes[0] == j ? 0 : 1];
        put(v, -(axis + periodic_offset(grid.node_position(v)[j] - axis)), "a wire");
      }
    }
  }
  auto theta = harmonic_extension(grid, data, opts, &sol.reports);

  const SparseOperator<double> grad = build_grad(grid);
  for (int j = 0; j < 3; ++j) {
    sol.theta_eta[j] = std::move(theta[static_cast<std::size_t>(j)]);
    sol.vth_eta[j] = grad * sol.theta_eta[j] + unit_edge_field(grid, j);
  }
  return sol;
}

double dirichlet_energy(const PeriodicGrid& grid, const Vector<double>& field) {
  const SparseOperator<double> grad = build_grad(grid);
  return grid.weight() * (grad * field).squaredNorm();
}

double l2_norm(const PeriodicGrid& grid, const Vector<double>& field) {
  return std::sqrt(grid.weight() * field.squaredNorm());
}

}  // namespace metahom
