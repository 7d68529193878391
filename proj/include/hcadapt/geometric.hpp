#pragma once

// The infinite-dimensional model u(x, xi) = S + S^2 with S = sum_n b_n xi_n,
// b_n(x) = x^{(n-1)/2}, its exact one-dimensional Gaussian adaptation and two
// finite-d truncations of it.

#include <cstdint>
#include <vector>

#include "hcadapt/estimation.hpp"

namespace hcadapt {

/// u0 + u1 eta + u2 (eta^2 - 1) / sqrt2.
struct AdaptedQuadratic {
  double u0;
  double u1;
  double u2;

  double operator()(double eta) const;
};

/// Exact adaptation; u0 = 1 / (1 - x) is the model mean. Requires 0 <= x < 1.
AdaptedQuadratic exact_adapted_coeffs(double x);

/// Adaptation of the d-term truncation; u0 = (1 - x^d) / (1 - x).
AdaptedQuadratic truncated_adapted_coeffs(double x, std::size_t d);

struct GeometricSamples {
  std::vector<double> exact;   // u(x, eta)
  std::vector<double> before;  // u_d(x, eta_d): truncated, then adapted
  std::vector<double> after;   // u(x, eta_hat): adapted, then truncated
  std::vector<double> eta_d;
  std::vector<double> eta_hat;
};

/// Draw n uses xi = standard_normal_draw(seed, n, d). eta_d is the normalized
/// d-term sum and eta_hat the same sum scaled by the infinite normalizer, so
/// eta_hat = sqrt(1 - x^d) eta_d. The exact variant is evaluated at eta_d,
/// which is exactly N(0, 1); all three share the same draws.
GeometricSamples sample_variants(double x, std::size_t d, std::size_t n, std::uint64_t seed);

struct GeometricComparison {
  double x;
  std::size_t d;
  DensityEstimate exact;
  DensityEstimate before;
  DensityEstimate after;
  DensityDistance before_to_exact;
  DensityDistance after_to_exact;
};

GeometricComparison compare_pdfs(double x, std::size_t d, std::size_t n, std::uint64_t seed);

}  // namespace hcadapt
