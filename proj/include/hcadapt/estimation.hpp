#pragma once

// Monte-Carlo projection estimates of chaos coefficients, kernel density
// estimates of scalar samples and distances between densities.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/chaos.hpp"

namespace hcadapt {

/// N input draws (rows of `inputs`, N x d) and the QoI they produced at every
/// grid point (rows of `outputs`, N x points).
struct SampleStore {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
  std::uint64_t seed = 0;
  SpatialGrid grid;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  void validate() const;
};

// Binary store: a JSON header line (rows, d, points, seed, grid) followed by
// the two matrices as little-endian doubles, row-major.
void write_sample_store(std::ostream& os, const SampleStore& s);
SampleStore read_sample_store(std::istream& is);

struct FitResult {
  ChaosExpansion expansion;
  bool undersampled;  // N < 10 |J_p|
};

/// u_alpha(x) ~ (1/N) sum_n u(x, xi_n) psi_alpha(xi_n).
FitResult fit_coefficients(const SampleStore& store, std::shared_ptr<const IndexSet> set);

struct KdeSettings {
  double bandwidth = 0.0;     // <= 0 selects Silverman's rule
  std::size_t points = 512;   // abscissae
  double margin = 3.0;        // range extends this many bandwidths past the data
};

struct DensityEstimate {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t samples = 0;

  /// Linear interpolation, zero outside [x.front(), x.back()].
  double at(double t) const;
  double integral() const;
};

/// 0.9 min(sd, IQR / 1.34) N^{-1/5}.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian-kernel density estimate; needs at least 100 samples with
/// non-zero spread.
DensityEstimate kde(std::span<const double> samples, const KdeSettings& settings = {});

/// Estimate on caller-supplied abscissae with a fixed bandwidth.
DensityEstimate kde_on(std::span<const double> samples, std::span<const double> abscissae, double bandwidth);

struct DensityDistance {
  double l1;
  double hellinger;  // (1/2 int (sqrt p - sqrt q)^2)^{1/2}
};

/// Both densities are interpolated onto a common grid spanning the union of
/// their ranges; throws if the ranges do not overlap.
DensityDistance density_distance(const DensityEstimate& p, const DensityEstimate& q);

void write_density_csv(std::ostream& os, const std::vector<std::string>& names,
                       const std::vector<const DensityEstimate*>& curves);

/// Two-sided Kolmogorov-Smirnov statistic of samples against N(0, 1).
double ks_statistic_normal(std::span<const double> samples);

}  // namespace hcadapt
