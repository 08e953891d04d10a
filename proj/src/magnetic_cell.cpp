#include "metahom/magnetic_cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "metahom/error.hpp"

namespace metahom {

namespace {

using Triplet = Eigen::Triplet<double>;

std::array<int, 2> other_axes(int d) { return {(d + 1) % 3, (d + 2) % 3}; }

bool is_res(const VoxelMask& mask, const PeriodicGrid& g, int i, int j, int k) {
  return mask.at(static_cast<std::size_t>(g.cell(i, j, k))) == Label::resonator;
}

// All four voxels around edge (d; p) are resonator.
bool edge_inside(const VoxelMask& mask, const PeriodicGrid& g, int d, std::array<int, 3> p) {
  const auto [b, c] = other_axes(d);
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t) {
      auto q = p;
      q[b] -= s;
      q[c] -= t;
      if (!is_res(mask, g, q[0], q[1], q[2])) return false;
    }
  return true;
}

int torus_distance2(const std::array<int, 2>& a, const std::array<int, 2>& b, int n) {
  int total = 0;
  for (int k = 0; k < 2; ++k) {
    int d = std::abs(a[k] - b[k]) % n;
    d = std::min(d, n - d);
    total += d * d;
  }
  return total;
}

std::vector<CirculationLoop> spread_loops(std::vector<CirculationLoop> all, int n) {
  if (all.size() <= 3) return all;
  std::vector<CirculationLoop> out{all.front()};
  while (out.size() < 3) {
    int best = -1;
    std::size_t best_at = 0;
    for (std::size_t c = 0; c < all.size(); ++c) {
      int nearest = std::numeric_limits<int>::max();
      for (const auto& o : out) nearest = std::min(nearest, torus_distance2(all[c].transverse, o.transverse, n));
      if (nearest > best) {
        best = nearest;
        best_at = c;
      }
    }
    out.push_back(all[best_at]);
  }
  return out;
}

template <class Scalar>
Scalar line_integral(const Vector<Scalar>& u, const PeriodicGrid& g, const CirculationLoop& loop) {
  const auto axes = transverse_axes(loop.direction);
  Scalar sum = Scalar(0);
  for (int s = 0; s < g.n(); ++s) {
    std::array<int, 3> p{};
    p[loop.direction] = s;
    p[axes[0]] = loop.transverse[0];
    p[axes[1]] = loop.transverse[1];
    sum += u[g.edge(loop.direction, p[0], p[1], p[2])];
  }
  return g.h() * sum;
}

void check_mask(const PeriodicGrid& grid, const VoxelMask& mask) {
  if (mask.n() != grid.n())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("mask resolution {} does not match grid resolution {}", mask.n(), grid.n()));
}

}  // namespace

ConstrainedSpace build_constrained_space(const PeriodicGrid& grid, const VoxelMask& mask) {
  check_mask(grid, mask);
  ConstrainedSpace s;
  s.grid = grid;
  s.mask = mask.only(Label::resonator);
  const int n = grid.n();
  const Index nn = grid.num_nodes();

  s.exterior_node.assign(static_cast<std::size_t>(nn), 0);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        bool all = true;
        for (int c = 0; c < 2 && all; ++c)
          for (int b = 0; b < 2 && all; ++b)
            for (int a = 0; a < 2 && all; ++a) all = is_res(s.mask, grid, i - a, j - b, k - c);
        s.exterior_node[static_cast<std::size_t>(grid.node(i, j, k))] = !all;
      }

  std::vector<Index> column(static_cast<std::size_t>(nn), -1);
  bool have_gauge = false;
  for (Index v = 0; v < nn; ++v) {
    if (!s.exterior_node[static_cast<std::size_t>(v)]) continue;
    if (!have_gauge) {
      s.gauge_node = v;
      have_gauge = true;
      continue;
    }
    column[static_cast<std::size_t>(v)] = static_cast<Index>(s.potential_nodes.size());
    s.potential_nodes.push_back(v);
  }
  if (!have_gauge) throw Error(ErrorCode::resolution, "the resonator covers the whole cell");

  s.interior_edge.assign(static_cast<std::size_t>(grid.num_edges()), 0);
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          if (edge_inside(s.mask, grid, d, {i, j, k})) {
            const Index e = grid.edge(d, i, j, k);
            s.interior_edge[static_cast<std::size_t>(e)] = 1;
            s.interior_edges.push_back(e);
          }

  const Index np = s.num_potential();
  const double inv_h = 1.0 / grid.h();
  std::vector<Triplet> t;
  t.reserve(2 * grid.num_edges());
  Index interior_col = np;
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Index e = grid.edge(d, i, j, k);
          if (s.interior_edge[static_cast<std::size_t>(e)]) {
            t.emplace_back(e, interior_col++, 1.0);
            continue;
          }
          std::array<int, 3> q{i, j, k};
          ++q[d];
          const Index head = column[static_cast<std::size_t>(grid.node(q))];
          const Index tail = column[static_cast<std::size_t>(grid.node(i, j, k))];
          if (head >= 0) t.emplace_back(e, head, inv_h);
          if (tail >= 0) t.emplace_back(e, tail, -inv_h);
        }
  s.p.resize(grid.num_edges(), np + s.num_interior());
  s.p.setFromTriplets(t.begin(), t.end());
  s.p.makeCompressed();
  return s;
}

SparseOperator<double> magnetic_stiffness(const ConstrainedSpace& space) {
  const SparseMatrix<double> cp = build_curl(space.grid).matrix * space.p;
  const SparseMatrix<double> dp = SparseMatrix<double>(build_grad(space.grid).matrix.transpose()) * space.p;
  SparseOperator<double> k;
  k.matrix = space.grid.weight() * (SparseMatrix<double>(cp.transpose() * cp) + SparseMatrix<double>(dp.transpose() * dp));
  k.matrix.prune(0.0);
  k.matrix.makeCompressed();
  k.symmetry = Symmetry::symmetric;
  k.definiteness = Definiteness::positive_definite;
  return k;
}

SparseOperator<double> magnetic_mass(const ConstrainedSpace& space) {
  SparseOperator<double> m;
  m.matrix = space.grid.weight() * SparseMatrix<double>(space.p.transpose() * space.p);
  m.matrix.makeCompressed();
  m.symmetry = Symmetry::symmetric;
  m.definiteness = Definiteness::positive_definite;
  return m;
}

Eigen::MatrixXd moment_functionals(const ConstrainedSpace& space) {
  Eigen::MatrixXd ones = Eigen::MatrixXd::Zero(space.grid.num_edges(), 3);
  for (int d = 0; d < 3; ++d) ones.col(d) = unit_edge_field(space.grid, d);
  return space.grid.weight() * (space.p.transpose() * ones);
}

std::vector<char> exterior_faces(const PeriodicGrid& grid, const VoxelMask& mask) {
  check_mask(grid, mask);
  const int n = grid.n();
  std::vector<char> out(static_cast<std::size_t>(grid.num_faces()), 0);
  for (int d = 0; d < 3; ++d)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          std::array<int, 3> q{i, j, k};
          --q[d];
          const bool both = is_res(mask, grid, i, j, k) && is_res(mask, grid, q[0], q[1], q[2]);
          out[static_cast<std::size_t>(grid.face(d, i, j, k))] = !both;
        }
  return out;
}

std::vector<CirculationLoop> admissible_loops(const PeriodicGrid& grid, const VoxelMask& mask, int direction) {
  check_mask(grid, mask);
  const int n = grid.n();
  const auto axes = transverse_axes(direction);
  std::vector<char> blocked(static_cast<std::size_t>(n) * n, 0);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        if (!is_res(mask, grid, i, j, k)) continue;
        const std::array<int, 3> p{i, j, k};
        blocked[static_cast<std::size_t>(p[axes[0]] + n * p[axes[1]])] = 1;
      }
  auto wrap = [n](int a) { return ((a % n) + n) % n; };
  std::vector<CirculationLoop> out;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      bool ok = true;
      for (int s = 0; s < 2 && ok; ++s)
        for (int t = 0; t < 2 && ok; ++t)
          ok = !blocked[static_cast<std::size_t>(wrap(a - s) + n * wrap(b - t))];
      if (ok) out.push_back({direction, {a, b}});
    }
  return out;
}

template <class Scalar>
CirculationResult<Scalar> circulation(const Vector<Scalar>& u, const PeriodicGrid& grid, const VoxelMask& mask) {
  if (u.size() != grid.num_edges())
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("circulation: field has {} entries, grid has {} edges", u.size(), grid.num_edges()));
  CirculationResult<Scalar> r;
  const VoxelMask res = mask.only(Label::resonator);
  for (int d = 0; d < 3; ++d) {
    auto all = admissible_loops(grid, res, d);
    if (all.empty())
      throw Error(ErrorCode::no_admissible_loop,
                  fmt::format("every grid line in direction {} meets the resonator", d + 1));
    r.loops[d] = spread_loops(std::move(all), grid.n());
    std::vector<Scalar> values;
    for (const auto& loop : r.loops[d]) values.push_back(line_integral(u, grid, loop));
    Scalar mean = Scalar(0);
    for (const auto& v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double spread = 0.0;
    for (const auto& a : values)
      for (const auto& b : values) spread = std::max(spread, std::abs(a - b));
    r.value[d] = mean;
    r.spread = std::max(r.spread, spread);
    if (spread > 1e-8 * (1.0 + std::abs(mean))) r.loops_agree = false;
  }

  const Vector<Scalar> cu = build_curl(grid).matrix.template cast<Scalar>() * u;
  const std::vector<char> ext = exterior_faces(grid, res);
  double worst = 0.0;
  for (Index f = 0; f < cu.size(); ++f)
    if (ext[static_cast<std::size_t>(f)]) worst = std::max(worst, std::abs(cu[f]));
  const double scale = u.size() > 0 ? u.cwiseAbs().maxCoeff() / grid.h() : 0.0;
  r.curl_residual = scale > 0.0 ? worst / scale : worst;
  r.curl_free = r.curl_residual <= 1e-8;
  if (!r.curl_free)
    r.warnings.push_back(fmt::format("field is not curl-free outside the resonator (relative curl {:.3e})",
                                     r.curl_residual));
  if (!r.loops_agree)
    r.warnings.push_back(fmt::format("loop integrals disagree (spread {:.3e})", r.spread));
  return r;
}

template CirculationResult<double> circulation<double>(const Vector<double>&, const PeriodicGrid&, const VoxelMask&);
template CirculationResult<cplx> circulation<cplx>(const Vector<cplx>&, const PeriodicGrid&, const VoxelMask&);

SparseMatrix<double> gradient_coordinates(const ConstrainedSpace& space) {
  const PeriodicGrid& grid = space.grid;
  std::vector<Triplet> t;
  for (std::size_t c = 0; c < space.potential_nodes.size(); ++c) {
    t.emplace_back(static_cast<Index>(c), space.potential_nodes[c], 1.0);
    t.emplace_back(static_cast<Index>(c), space.gauge_node, -1.0);
  }
  const SparseMatrix<double> grad = build_grad(grid).matrix;
  const Index np = space.num_potential();
  for (std::size_t c = 0; c < space.interior_edges.size(); ++c)
    for (SparseMatrix<double>::InnerIterator it(grad, space.interior_edges[c]); it; ++it)
      t.emplace_back(np + static_cast<Index>(c), it.col(), it.value());
  SparseMatrix<double> r(space.dim(), grid.num_nodes());
  r.setFromTriplets(t.begin(), t.end());
  return r;
}

MagneticSpectrum solve_magnetic_spectrum(const ConstrainedSpace& space, const EigenSolveOptions& opts,
                                         SpectrumTarget target) {
  opts.check();
  const SparseOperator<double> k = magnetic_stiffness(space);
  const SparseOperator<double> m = magnetic_mass(space);
  const Eigen::MatrixXd g = moment_functionals(space);

  MagneticSpectrum spec;
  spec.target = target;
  EigenSolveOptions eo = opts;
  if (target == SpectrumTarget::bright && g.norm() <= 1e-14) {
    // Every field of the space is a periodic gradient with zero integral.
    spec.warnings.push_back("moment functionals vanish: the bright subspace is empty");
    spec.eigenvalues.resize(0);
    spec.modes.resize(space.dim(), 0);
    spec.moments.resize(3, 0);
    spec.residuals.resize(0);
    spec.exhausted = true;
    return spec;
  }
  if (spec.target == SpectrumTarget::bright) {
    eo.start = EigenStart::given_load;
    eo.confine_to_start = true;
    eo.purge_functionals = g;
    eo.purge_tolerance = spec.dark_cutoff;
    // Bright modes are divergence-free; strip gradient components that inexact
    // inner solves feed into the search space.
    // Potentials are pinned to zero at node 0, leaving a definite Laplacian.
    const Index nn = space.grid.num_nodes();
    auto lap = std::make_shared<SparseOperator<double>>();
    lap->matrix = build_laplacian(space.grid).matrix.bottomRightCorner(nn - 1, nn - 1);
    lap->symmetry = Symmetry::symmetric;
    lap->definiteness = Definiteness::positive_definite;
    auto lap_pc = std::shared_ptr<Preconditioner>(make_preconditioner(lap->matrix, PreconditionerKind::multigrid));
    auto coords = std::make_shared<SparseMatrix<double>>(gradient_coordinates(space).rightCols(nn - 1));
    auto div = std::make_shared<SparseMatrix<double>>(
        SparseMatrix<double>(build_grad(space.grid).matrix.transpose()).bottomRows(nn - 1) * space.p);
    LinearSolveOptions lo;
    lo.tolerance = 1e-13;
    eo.project = [lap, lap_pc, coords, div, lo](Eigen::MatrixXd& w) {
      for (Index c = 0; c < w.cols(); ++c) {
        const Vector<double> rhs = *div * w.col(c);
        if (rhs.norm() == 0.0) continue;
        const Vector<double> phi = cg_solve<double>(*lap, rhs, lo, lap_pc.get()).x;
        w.col(c) -= *coords * phi;
      }
    };
    if (eo.max_basis == 0) eo.max_basis = 4 * eo.num_eigenpairs + 60;
  } else {
    eo.start = EigenStart::random;
  }
  const EigenResult er = eigs_smallest(k, m, eo, spec.target == SpectrumTarget::bright ? g : Eigen::MatrixXd());

  spec.eigenvalues = er.eigenvalues;
  spec.modes = er.eigenvectors;
  spec.residuals = er.residuals;
  spec.num_modes = static_cast<int>(er.eigenvalues.size());
  spec.cluster_warning = er.cluster_warning;
  spec.exhausted = er.exhausted;
  spec.next_eigenvalue = er.next_eigenvalue;
  spec.purged = er.purged;
  for (const auto& w : er.warnings) spec.warnings.push_back(w);
  spec.moments = g.transpose() * spec.modes;
  spec.bright.resize(static_cast<std::size_t>(spec.num_modes));
  for (int i = 0; i < spec.num_modes; ++i)
    spec.bright[static_cast<std::size_t>(i)] = spec.moments.col(i).norm() >= spec.dark_cutoff;

  const SparseCholesky mass(m.matrix);
  for (int j = 0; j < 3; ++j) {
    const Vector<double> x = mass.solve(g.col(j));
    for (int i = 0; i < 3; ++i) spec.total_moment_gram(i, j) = g.col(i).dot(x);
  }
  return spec;
}

MuEffResult mu_eff_spectral(const MagneticSpectrum& spec, cplx q, const MuEffOptions& opts) {
  MuEffResult r;
  Eigen::Matrix3d captured = Eigen::Matrix3d::Zero();
  int last = -1;
  for (int n = 0; n < spec.num_modes; ++n) {
    if (!spec.bright[static_cast<std::size_t>(n)]) continue;
    const double lambda = spec.eigenvalues[n];
    if (q.imag() == 0.0 && std::abs(lambda - q) < opts.pole_guard * std::abs(lambda))
      throw Error(ErrorCode::pole_proximity,
                  fmt::format("q = {:.12g} lies within the pole guard of eigenvalue {:.12g}", q.real(), lambda));
    const Eigen::Vector3d mn = spec.moments.col(n);
    const Eigen::Matrix3d mm = mn * mn.transpose();
    r.mu += (q / (lambda - q)) * mm.cast<cplx>();
    captured += mm;
    last = n;
    ++r.bright_modes_used;
  }
  if (last >= 0) {
    const double lambda = spec.eigenvalues[last];
    const Eigen::Vector3d mn = spec.moments.col(last);
    r.truncation_residual = std::abs(q / (lambda - q)) * (mn * mn.transpose()).norm();
  }
  if (spec.num_modes > 0) {
    const double floor_lambda = spec.eigenvalues[spec.num_modes - 1];
    const Eigen::Matrix3d rest = spec.total_moment_gram - captured;
    const double rest_norm = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(0.5 * (rest + rest.transpose()))
                                 .eigenvalues()
                                 .cwiseAbs()
                                 .maxCoeff();
    r.tail_bound = floor_lambda > std::abs(q) ? std::abs(q) / (floor_lambda - std::abs(q)) * rest_norm
                                              : std::numeric_limits<double>::infinity();
    if (spec.exhausted && rest_norm <= 1e-12 * std::max(1.0, spec.total_moment_gram.norm())) r.tail_bound = 0.0;
  } else if (spec.total_moment_gram.norm() > 0.0) {
    r.tail_bound = std::numeric_limits<double>::infinity();
  }
  r.truncation_warning = r.truncation_residual > opts.truncation_tolerance;
  return r;
}

MagneticCellSolution solve_magnetic_direct(const ConstrainedSpace& space, cplx q, const LinearSolveOptions& opts,
                                           const MaterialParams& materials) {
  opts.check();
  const PeriodicGrid& grid = space.grid;
  MagneticCellSolution sol;
  sol.q = q;
  const cplx k2 = q / (materials.eps_b * materials.eps0 * materials.mu0);
  sol.omega = std::sqrt(k2);

  const SparseOperator<double> k = magnetic_stiffness(space);
  const SparseOperator<double> m = magnetic_mass(space);
  const Eigen::MatrixXd g = moment_functionals(space);
  const SparseMatrix<cplx> system = k.matrix.cast<cplx>() - q * m.matrix.cast<cplx>();

  // Built on first use; vanishing moment functionals need no solve.
  std::unique_ptr<Preconditioner> pc;
  auto preconditioner = [&]() -> Preconditioner* {
    if (!pc) {
      if (space.dim() <= 5000)
        pc = std::make_unique<SparseCholesky>(k.matrix);
      else
        pc = make_preconditioner(k.matrix, opts.preconditioner);
    }
    return pc.get();
  };

  const SparseMatrix<double> curl = build_curl(grid).matrix;
  const cplx j_scale = sol.omega != cplx(0.0) ? cplx(0.0, 1.0) / (sol.omega * materials.eps0) : cplx(0.0);
  Eigen::Matrix<cplx, Eigen::Dynamic, 3> x(space.dim(), 3);
  for (int j = 0; j < 3; ++j) {
    const Vector<cplx> rhs = q * g.col(j).cast<cplx>();
    auto solved = rhs.squaredNorm() == 0.0 ? cocg_solve(system, rhs, opts) : cocg_solve(system, rhs, opts, preconditioner());
    x.col(j) = solved.x;
    sol.reports.push_back(solved.report);
    Vector<cplx> h = space.p.cast<cplx>() * solved.x;
    h += unit_edge_field(grid, j).cast<cplx>();
    sol.j_fields[j] = j_scale * (curl.cast<cplx>() * h);
    sol.h_fields[j] = std::move(h);
  }
  sol.mu = Eigen::Matrix3cd::Identity() + g.transpose().cast<cplx>() * x;
  return sol;
}

MagneticCellSolution solve_magnetic_direct(const CellGeometry& geom, const PeriodicGrid& grid, cplx q,
                                           const LinearSolveOptions& opts, const MaterialParams& materials) {
  const VoxelMask mask = rasterize(without_wires(geom), grid.n());
  return solve_magnetic_direct(build_constrained_space(grid, mask), q, opts, materials);
}

DenseConstrainedOracle dense_constrained_oracle(const PeriodicGrid& grid, const VoxelMask& mask,
                                                bool compute_eigenvalues) {
  const VoxelMask res = mask.only(Label::resonator);
  const Index ne = grid.num_edges();
  const Eigen::MatrixXd curl = Eigen::MatrixXd(build_curl(grid).matrix);
  const std::vector<char> ext = exterior_faces(grid, res);
  std::vector<Index> rows;
  for (Index f = 0; f < grid.num_faces(); ++f)
    if (ext[static_cast<std::size_t>(f)]) rows.push_back(f);

  Eigen::MatrixXd constraints = Eigen::MatrixXd::Zero(static_cast<Index>(rows.size()) + 3, ne);
  for (std::size_t r = 0; r < rows.size(); ++r) constraints.row(static_cast<Index>(r)) = curl.row(rows[r]);
  for (int d = 0; d < 3; ++d) {
    const auto loops = admissible_loops(grid, res, d);
    if (loops.empty())
      throw Error(ErrorCode::no_admissible_loop,
                  fmt::format("every grid line in direction {} meets the resonator", d + 1));
    Vector<double> indicator = Vector<double>::Zero(ne);
    const auto axes = transverse_axes(d);
    for (int s = 0; s < grid.n(); ++s) {
      std::array<int, 3> p{};
      p[d] = s;
      p[axes[0]] = loops.front().transverse[0];
      p[axes[1]] = loops.front().transverse[1];
      indicator[grid.edge(d, p[0], p[1], p[2])] = grid.h();
    }
    constraints.row(static_cast<Index>(rows.size()) + d) = indicator.transpose();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(constraints, Eigen::ComputeFullV);
  const Vector<double> sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(constraints.rows(), constraints.cols())) * sv[0] *
                     std::numeric_limits<double>::epsilon() * 10.0;
  Index rank = 0;
  while (rank < sv.size() && sv[rank] > tol) ++rank;
  DenseConstrainedOracle out;
  out.nullspace_dim = ne - rank;
  if (!compute_eigenvalues || out.nullspace_dim == 0) return out;

  const Eigen::MatrixXd z = svd.matrixV().rightCols(out.nullspace_dim);
  const Eigen::MatrixXd grad = Eigen::MatrixXd(build_grad(grid).matrix);
  const Eigen::MatrixXd cz = curl * z;
  const Eigen::MatrixXd dz = grad.transpose() * z;
  const Eigen::MatrixXd form = cz.transpose() * cz + dz.transpose() * dz;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (form + form.transpose()));
  out.eigenvalues = es.eigenvalues();
  const Eigen::MatrixXd fields = z * es.eigenvectors() / std::sqrt(grid.weight());
  out.moments.resize(3, out.nullspace_dim);
  for (int d = 0; d < 3; ++d)
    out.moments.row(d) = grid.weight() * unit_edge_field(grid, d).transpose() * fields;
  return out;
}

}  // namespace metahom
