#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"

#include "hcadapt/error.hpp"
#include "hcadapt/random_field.hpp"

using namespace hcadapt;

TEST_CASE("squared exponential kernel") {
  const RandomFieldSpec spec;
  CHECK(se_kernel(spec, {10.0, 20.0}, {10.0, 20.0}) == 0.5);
  CHECK(se_kernel(spec, {0.0, 0.0}, {80.0, 0.0}) == doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(se_kernel(spec, {0.0, 0.0}, {80.0, 0.0}) == doctest::Approx(0.30327).epsilon(1e-5));
  RandomFieldSpec bad;
  bad.variance = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = RandomFieldSpec{};
  bad.length_y = -1.0;
  CHECK_THROWS_AS(kernel_matrix(bad, SpatialGrid(1, 1, 2, 2)), InvalidArgument);
}

TEST_CASE("grid numbering") {
  const SpatialGrid g(400.0, 200.0, 40, 10);
  CHECK(g.cell(3, 2) == 83);
  CHECK(g.center(83)[0] == doctest::Approx(35.0));
  CHECK(g.center(83)[1] == doctest::Approx(50.0));
  CHECK(g.cell_area() == doctest::Approx(200.0));
}

TEST_CASE("KL decomposition") {
  const SpatialGrid grid(400.0, 400.0, 12, 12);
  const RandomFieldSpec spec;
  const auto kl = kl_decompose(spec, grid, 0.97);
  CHECK(kl.energy_retained >= 0.97);
  for (Eigen::Index i = 1; i < kl.eigenvalues.size(); ++i) CHECK(kl.eigenvalues[i] <= kl.eigenvalues[i - 1]);
  const Eigen::MatrixXd gram = grid.cell_area() * kl.eigenfunctions.transpose() * kl.eigenfunctions;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10);
  // Trace of the discretized operator is variance times area.
  CHECK(kl.total_energy == doctest::Approx(spec.variance * grid.area()).epsilon(1e-10));

  const auto fewer = kl_decompose(spec, grid, kl.energy_retained - 1e-9);
  CHECK(fewer.modes() == kl.modes());
  const auto one_less = truncate_modes(kl, kl.modes() - 1);
  CHECK(one_less.energy_retained < 0.97);
  CHECK_THROWS_AS(truncate_modes(kl, kl.modes() + 1), InvalidArgument);
  CHECK_THROWS_AS(kl_decompose(spec, grid, 1.5), InvalidArgument);
  CHECK_THROWS_AS(kl_decompose(spec, grid, 0.0), InvalidArgument);
}

TEST_CASE("KL with full energy keeps every positive mode") {
  const SpatialGrid grid(1.0, 1.0, 4, 4);
  RandomFieldSpec spec;
  spec.length_x = spec.length_y = 0.3;
  const auto kl = kl_decompose(spec, grid, 1.0);
  CHECK(kl.energy_retained == doctest::Approx(1.0));
  CHECK(kl.modes() == 16);
}

TEST_CASE("rank one covariance") {
  const SpatialGrid grid(2.0, 1.0, 5, 3);
  Eigen::VectorXd phi(15);
  for (Eigen::Index c = 0; c < 15; ++c) phi[c] = 1.0 + 0.1 * static_cast<double>(c);
  const auto kl = kl_decompose(phi * phi.transpose(), grid, 1.0);
  CHECK(kl.eigenvalues.tail(kl.eigenvalues.size() - 1).cwiseAbs().maxCoeff() < 1e-12 * kl.eigenvalues[0]);
  CHECK(kl_decompose(phi * phi.transpose(), grid, 0.999).modes() == 1);
  CHECK(kl.eigenvalues[0] == doctest::Approx(grid.cell_area() * phi.squaredNorm()));
}

TEST_CASE("field samples") {
  const SpatialGrid grid(400.0, 400.0, 10, 10);
  RandomFieldSpec spec;
  spec.mean = 0.25;
  const auto kl = kl_decompose(spec, grid, 0.99);
  std::vector<double> xi(kl.modes(), 0.0);
  CHECK((sample_gaussian_field(kl, xi).array() - 0.25).abs().maxCoeff() == 0.0);
  xi[0] = 1.0;
  const Eigen::VectorXd g = sample_gaussian_field(kl, xi);
  CHECK((g - (kl.mean + std::sqrt(kl.eigenvalues[0]) * kl.eigenfunctions.col(0))).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(sample_gaussian_field(kl, std::vector<double>(kl.modes() + 1)), DimensionMismatch);

  const auto kl0 = kl_decompose(RandomFieldSpec{}, grid, 0.99);
  CHECK((sample_transmissivity(kl0, std::vector<double>(kl0.modes(), 0.0)).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("field variance and transmissivity median match Monte Carlo") {
  const SpatialGrid grid(400.0, 400.0, 8, 8);
  const auto kl = kl_decompose(RandomFieldSpec{}, grid, 0.97);
  const std::size_t cell = grid.cell(3, 5);
  const int N = 10000;
  std::vector<double> g(N);
  std::vector<double> k(N);
  for (int n = 0; n < N; ++n) {
    const auto xi = standard_normal_draw(99, static_cast<std::uint64_t>(n), kl.modes());
    g[static_cast<std::size_t>(n)] = sample_gaussian_field(kl, xi)[static_cast<Eigen::Index>(cell)];
    k[static_cast<std::size_t>(n)] = sample_transmissivity(kl, xi)[static_cast<Eigen::Index>(cell)];
  }
  double m2 = 0.0;
  for (double v : g) m2 += v * v;
  m2 /= N;
  double expected = 0.0;
  for (Eigen::Index i = 0; i < kl.eigenvalues.size(); ++i)
    expected += kl.eigenvalues[i] * std::pow(kl.eigenfunctions(static_cast<Eigen::Index>(cell), i), 2);
  CHECK(std::abs(m2 - expected) < 4.0 / std::sqrt(N) * expected * std::sqrt(2.0));

  std::nth_element(k.begin(), k.begin() + N / 2, k.end());
  // Median of a log-normal: P(kappa < median) = 1/2 within 4 standard errors.
  const double med = k[N / 2];
  CHECK(std::abs(std::log(med)) < 4.0 * std::sqrt(expected) * std::sqrt(std::numbers::pi / 2) / std::sqrt(N));
}

TEST_CASE("standard normal draws are reproducible") {
  const auto a = standard_normal_draw(3, 17, 5);
  const auto b = standard_normal_draw(3, 17, 5);
  CHECK(a == b);
  CHECK(a != standard_normal_draw(3, 18, 5));
  CHECK(a != standard_normal_draw(4, 17, 5));
  const auto longer = standard_normal_draw(3, 17, 8);
  CHECK(std::equal(a.begin(), a.end(), longer.begin()));
}

TEST_CASE("KL csv writers") {
  const SpatialGrid grid(1.0, 1.0, 3, 3);
  RandomFieldSpec spec;
  spec.length_x = spec.length_y = 0.5;
  const auto kl = kl_decompose(spec, grid, 0.9);
  std::ostringstream ev;
  write_kl_eigenvalues(ev, kl);
  std::ostringstream ef;
  write_kl_eigenfunctions(ef, kl);
  const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  CHECK(lines(ev.str()) == static_cast<long>(kl.modes()) + 1);
  CHECK(lines(ef.str()) == 10);
}
