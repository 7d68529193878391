#include "hcadapt/elliptic.hpp"

#include <cmath>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "hcadapt/error.hpp"

namespace hcadapt {

Eigen::VectorXd raw_source(const SourceSpec& spec, const SpatialGrid& grid) {
  if (!(spec.width[0] > 0.0) || !(spec.width[1] > 0.0)) throw InvalidArgument("source widths must be positive");
  Eigen::VectorXd g(static_cast<Eigen::Index>(grid.size()));
  auto bump = [&](std::array<double, 2> x, std::array<double, 2> c) {
    const double dx = (x[0] - c[0]) / spec.width[0];
    const double dy = (x[1] - c[1]) / spec.width[1];
    return std::exp(-0.5 * (dx * dx + dy * dy));
  };
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const auto x = grid.center(c);
    g[static_cast<Eigen::Index>(c)] = spec.amplitude * (bump(x, spec.source_center) - bump(x, spec.sink_center));
  }
  return g;
}

Eigen::VectorXd assemble_source(const SourceSpec& spec, const SpatialGrid& grid) {
  Eigen::VectorXd g = raw_source(spec, grid);
  g.array() -= g.mean();
  return g;
}

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

void check_problem(const EllipticProblem& p) {
  const auto n = static_cast<Eigen::Index>(p.grid.size());
  if (p.transmissivity.size() != n || p.source.size() != n)
    throw DimensionMismatch("transmissivity and source must have one value per cell");
  if (!(p.transmissivity.minCoeff() > 0.0)) throw InvalidArgument("transmissivity must be positive");
}

}  // namespace

PressureSolution solve_pressure(const EllipticProblem& problem) {
  check_problem(problem);
  const auto& grid = problem.grid;
  const std::size_t nx = grid.nx();
  const std::size_t ny = grid.ny();
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double tx_geom = grid.hy() / grid.hx();
  const double ty_geom = grid.hx() / grid.hy();
  const auto& k = problem.transmissivity;

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n) * 5);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  auto couple = [&](std::size_t a, std::size_t b, double t) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    entries.emplace_back(ia, ib, -t);
    entries.emplace_back(ib, ia, -t);
    diag[ia] += t;
    diag[ib] += t;
  };
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t c = grid.cell(i, j);
      if (i + 1 < nx) {
        const std::size_t e = grid.cell(i + 1, j);
        couple(c, e, tx_geom * harmonic(k[static_cast<Eigen::Index>(c)], k[static_cast<Eigen::Index>(e)]));
      }
      if (j + 1 < ny) {
        const std::size_t north = grid.cell(i, j + 1);
        couple(c, north, ty_geom * harmonic(k[static_cast<Eigen::Index>(c)], k[static_cast<Eigen::Index>(north)]));
      }
    }
  }
  for (Eigen::Index c = 0; c < n; ++c) entries.emplace_back(c, c, diag[c]);
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());

  // Right-hand side projected onto the range of the operator (orthogonal
  // complement of the constants).
  Eigen::VectorXd b = problem.source * grid.cell_area();
  b.array() -= b.mean();

  PressureSolution out;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.pressure = Eigen::VectorXd::Zero(n);
    return out;
  }

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(problem.settings.tolerance);
  cg.setMaxIterations(problem.settings.max_iterations);
  cg.compute(a);
  out.pressure = cg.solve(b);
  out.pressure.array() -= out.pressure.mean();
  out.iterations = static_cast<int>(cg.iterations());
  out.residual = (b - a * out.pressure).norm() / bnorm;
  if (cg.info() != Eigen::Success || !(out.residual <= 10.0 * problem.settings.tolerance))
    throw ConvergenceFailure("pressure solve did not converge (relative residual " + std::to_string(out.residual) +
                             ")");
  return out;
}

double VelocityField::net_outflow(const SpatialGrid& grid, std::size_t c) const {
  const std::size_t nx = grid.nx();
  const std::size_t i = c % nx;
  const std::size_t j = c / nx;
  const auto xf = [&](std::size_t fi, std::size_t fj) { return flux_x[static_cast<Eigen::Index>(fi + (nx + 1) * fj)]; };
  const auto yf = [&](std::size_t fi, std::size_t fj) { return flux_y[static_cast<Eigen::Index>(fi + nx * fj)]; };
  return (xf(i + 1, j) - xf(i, j)) * grid.hy() + (yf(i, j + 1) - yf(i, j)) * grid.hx();
}

VelocityField velocity(const EllipticProblem& problem, const Eigen::VectorXd& u) {
  check_problem(problem);
  const auto& grid = problem.grid;
  const auto& k = problem.transmissivity;
  if (u.size() != k.size()) throw DimensionMismatch("pressure field does not match the grid");
  const std::size_t nx = grid.nx();
  const std::size_t ny = grid.ny();
  VelocityField v;
  v.flux_x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>((nx + 1) * ny));
  v.flux_y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx * (ny + 1)));
  const auto at = [&](const Eigen::VectorXd& f, std::size_t c) { return f[static_cast<Eigen::Index>(c)]; };
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 1; i < nx; ++i) {
      const std::size_t w = grid.cell(i - 1, j);
      const std::size_t e = grid.cell(i, j);
      v.flux_x[static_cast<Eigen::Index>(i + (nx + 1) * j)] =
          -harmonic(at(k, w), at(k, e)) * (at(u, e) - at(u, w)) / grid.hx();
    }
  for (std::size_t j = 1; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t s = grid.cell(i, j - 1);
      const std::size_t nn = grid.cell(i, j);
      v.flux_y[static_cast<Eigen::Index>(i + nx * j)] =
          -harmonic(at(k, s), at(k, nn)) * (at(u, nn) - at(u, s)) / grid.hy();
    }
  v.cell_vx.resize(static_cast<Eigen::Index>(grid.size()));
  v.cell_vy.resize(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const auto c = static_cast<Eigen::Index>(grid.cell(i, j));
      v.cell_vx[c] = 0.5 * (v.flux_x[static_cast<Eigen::Index>(i + (nx + 1) * j)] +
                            v.flux_x[static_cast<Eigen::Index>(i + 1 + (nx + 1) * j)]);
      v.cell_vy[c] = 0.5 * (v.flux_y[static_cast<Eigen::Index>(i + nx * j)] +
                            v.flux_y[static_cast<Eigen::Index>(i + nx * (j + 1))]);
    }
  return v;
}

}  // namespace hcadapt
