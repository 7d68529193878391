#include "hcadapt/geometric.hpp"

#include <cmath>
#include <numbers>

#include "hcadapt/error.hpp"
#include "hcadapt/parallel.hpp"
#include "hcadapt/random_field.hpp"

namespace hcadapt {

namespace {

void check_x(double x) {
  if (!(x >= 0.0)) throw InvalidArgument("geometric model requires x >= 0 (half powers of negative x are complex)");
  if (!(x < 1.0)) throw InvalidArgument("geometric model requires |x| < 1");
}

}  // namespace

double AdaptedQuadratic::operator()(double eta) const {
  return u0 + u1 * eta + u2 * (eta * eta - 1.0) / std::numbers::sqrt2;
}

AdaptedQuadratic exact_adapted_coeffs(double x) {
  check_x(x);
  return {1.0 / (1.0 - x), 1.0 / std::sqrt(1.0 - x), 1.0 / (1.0 + x) + std::numbers::sqrt2 * x / (1.0 - x * x)};
}

AdaptedQuadratic truncated_adapted_coeffs(double x, std::size_t d) {
  check_x(x);
  if (d == 0) throw InvalidArgument("truncation length must be positive");
  if (x == 0.0) return {1.0, 1.0, 1.0};
  const double xd = std::pow(x, static_cast<double>(d));
  const double x2d = xd * xd;
  const double u0 = (1.0 - xd) / (1.0 - x);
  const double u2 = (1.0 - x2d) / ((1.0 - xd) * (1.0 + x)) +
                    std::numbers::sqrt2 / (1.0 - xd) * (x * (1.0 - x2d) / (1.0 - x * x) - xd * (1.0 - xd) / (1.0 - x));
  return {u0, std::sqrt(u0), u2};
}

GeometricSamples sample_variants(double x, std::size_t d, std::size_t n, std::uint64_t seed) {
  const auto full = exact_adapted_coeffs(x);
  const auto trunc = truncated_adapted_coeffs(x, d);
  std::vector<double> b(d);
  double norm2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    b[k] = std::pow(x, 0.5 * static_cast<double>(k));
    norm2 += b[k] * b[k];
  }
  const double scale_d = 1.0 / std::sqrt(norm2);
  const double scale_inf = std::sqrt(1.0 - x);

  GeometricSamples s;
  s.exact.resize(n);
  s.before.resize(n);
  s.after.resize(n);
  s.eta_d.resize(n);
  s.eta_hat.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const auto xi = standard_normal_draw(seed, i, d);
    double sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) sum += b[k] * xi[k];
    const double eta_d = sum * scale_d;
    const double eta_hat = sum * scale_inf;
    s.eta_d[i] = eta_d;
    s.eta_hat[i] = eta_hat;
    s.exact[i] = full(eta_d);
    s.before[i] = trunc(eta_d);
    s.after[i] = full(eta_hat);
  });
  return s;
}

GeometricComparison compare_pdfs(double x, std::size_t d, std::size_t n, std::uint64_t seed) {
  const auto s = sample_variants(x, d, n, seed);
  GeometricComparison c{x, d, kde(s.exact), kde(s.before), kde(s.after), {}, {}};
  c.before_to_exact = density_distance(c.before, c.exact);
  c.after_to_exact = density_distance(c.after, c.exact);
  return c;
}

}  // namespace hcadapt
