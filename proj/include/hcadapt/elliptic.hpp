#pragma once

// Two-point flux approximation for -div(kappa grad u) = g on a rectangle with
// no-flux boundaries. The Neumann problem fixes u only up to a constant; the
// solver returns the representative with zero area-weighted mean.

#include <array>

#include <Eigen/Dense>

#include "hcadapt/grid.hpp"

namespace hcadapt {

struct SourceSpec {
  double amplitude = 0.5;
  std::array<double, 2> source_center{0.0, 0.0};
  std::array<double, 2> sink_center{400.0, 400.0};
  std::array<double, 2> width{20.0, 20.0};
};

/// Source bump minus sink bump at cell centers, shifted so that the
/// area-weighted sum is zero.
Eigen::VectorXd assemble_source(const SourceSpec& spec, const SpatialGrid& grid);

/// The same without the compatibility shift.
Eigen::VectorXd raw_source(const SourceSpec& spec, const SpatialGrid& grid);

struct SolverSettings {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 20000;
};

struct EllipticProblem {
  SpatialGrid grid;
  Eigen::VectorXd transmissivity;  // per cell, > 0
  Eigen::VectorXd source;          // per cell
  SolverSettings settings{};
};

struct PressureSolution {
  Eigen::VectorXd pressure;
  int iterations = 0;
  double residual = 0.0;  // |b - A u| / |b| after the solve
};

PressureSolution solve_pressure(const EllipticProblem& problem);

struct VelocityField {
  // Darcy flux density -kappa du/dn through each face: x-faces are
  // (nx + 1) x ny, y-faces nx x (ny + 1), both x-fastest.
  Eigen::VectorXd flux_x;
  Eigen::VectorXd flux_y;
  // Face values averaged to cell centers.
  Eigen::VectorXd cell_vx;
  Eigen::VectorXd cell_vy;

  /// Net outward flow (flux times face length) from cell c.
  double net_outflow(const SpatialGrid& grid, std::size_t c) const;
};

VelocityField velocity(const EllipticProblem& problem, const Eigen::VectorXd& pressure);

}  // namespace hcadapt
