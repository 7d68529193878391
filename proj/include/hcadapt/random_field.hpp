#pragma once

// Squared-exponential Gaussian fields on a SpatialGrid, their discrete
// Karhunen-Loeve decomposition and log-normal transmissivity samples.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/grid.hpp"

namespace hcadapt {

struct RandomFieldSpec {
  double variance = 0.5;
  double length_x = 80.0;
  double length_y = 80.0;
  double mean = 0.0;

  void validate() const;
};

/// sigma^2 exp(-1/2 sum_i (x_i - y_i)^2 / l_i^2)
double se_kernel(const RandomFieldSpec& spec, std::array<double, 2> x, std::array<double, 2> y);

/// Covariance matrix on the grid's cell centers.
Eigen::MatrixXd kernel_matrix(const RandomFieldSpec& spec, const SpatialGrid& grid);

struct KLBasis {
  SpatialGrid grid;
  Eigen::VectorXd mean;            // G_0 on cells
  Eigen::VectorXd eigenvalues;     // retained, descending, > 0
  Eigen::MatrixXd eigenfunctions;  // cells x modes, orthonormal under cell areas
  double energy_retained = 0.0;    // sum retained / sum of all non-negative eigenvalues
  double total_energy = 0.0;

  std::size_t modes() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

/// Nystrom discretization: eigenpairs of W^{1/2} K W^{1/2}, truncated at the
/// smallest number of modes whose cumulative energy reaches `energy_fraction`.
KLBasis kl_decompose(const RandomFieldSpec& spec, const SpatialGrid& grid, double energy_fraction);

/// Same, for an arbitrary symmetric covariance matrix on the grid.
KLBasis kl_decompose(const Eigen::MatrixXd& covariance, const SpatialGrid& grid, double energy_fraction,
                     double mean = 0.0);

/// Keeps exactly the first `modes` eigenpairs.
KLBasis truncate_modes(const KLBasis& kl, std::size_t modes);

/// G(x, xi) = G_0(x) + sum_i sqrt(lambda_i) xi_i g_i(x)
Eigen::VectorXd sample_gaussian_field(const KLBasis& kl, std::span<const double> xi);

/// kappa = exp(G); isotropic, so one value per cell serves both axes.
Eigen::VectorXd sample_transmissivity(const KLBasis& kl, std::span<const double> xi);

/// Eigenvalue CSV (mode, lambda, cumulative energy) and eigenfunction grid CSV
/// (cell, x, y, g_1, ..., g_m).
void write_kl_eigenvalues(std::ostream& os, const KLBasis& kl);
void write_kl_eigenfunctions(std::ostream& os, const KLBasis& kl);

/// Reproducible standard normal draws: draw `index` of stream `seed` depends
/// only on (seed, index), never on how draws are distributed over threads.
std::vector<double> standard_normal_draw(std::uint64_t seed, std::uint64_t index, std::size_t d);

}  // namespace hcadapt
