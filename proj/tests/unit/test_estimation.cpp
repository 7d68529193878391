#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "hcadapt/error.hpp"
#include "hcadapt/estimation.hpp"
#include "hcadapt/random_field.hpp"

using namespace hcadapt;

namespace {

std::vector<double> normals(std::size_t n, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

SampleStore synthetic_store(const ChaosExpansion& truth, std::size_t n, std::uint64_t seed) {
  const std::size_t d = truth.dim();
  SampleStore s;
  s.seed = seed;
  s.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  s.outputs.resize(static_cast<Eigen::Index>(n), 1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto xi = standard_normal_draw(seed, k, d);
    for (std::size_t i = 0; i < d; ++i) s.inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = xi[i];
    s.outputs(static_cast<Eigen::Index>(k), 0) = eval_expansion(truth, xi, 0);
  }
  return s;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }

}  // namespace

TEST_CASE("constant outputs fit the mean only") {
  const auto set = build_index_set(3, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 10);
  c(0, 0) = 2.5;
  const std::size_t N = 10000;
  const auto fit = fit_coefficients(synthetic_store(ChaosExpansion(set, c), N, 1), set);
  CHECK(fit.expansion.coeffs()(0, 0) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(fit.expansion.coeffs().row(0).tail(9).cwiseAbs().maxCoeff() < 4 * 2.5 / std::sqrt(double(N)));
  CHECK_FALSE(fit.undersampled);
}

TEST_CASE("basis function outputs fit a unit coefficient") {
  const auto set = build_index_set(2, 3);
  const std::size_t N = 20000;
  for (std::size_t b : {1, 4, 7}) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(set->size()));
    c(0, static_cast<Eigen::Index>(b)) = 1.0;
    const auto fit = fit_coefficients(synthetic_store(ChaosExpansion(set, c), N, 2 + b), set);
    const auto& u = fit.expansion.coeffs();
    const auto ab = (*set)[b];
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      // Spread of the sample mean of psi_b psi_k, from quadrature.
      const auto ak = (*set)[static_cast<std::size_t>(k)];
      const double m2 = oracle::expectation(2, 10, [&](const std::vector<double>& xi) {
        const double v = oracle::psi({ab[0], ab[1]}, xi) * oracle::psi({ak[0], ak[1]}, xi);
        return v * v;
      });
      const double tol = 5.0 * std::sqrt(m2 / double(N));
      CHECK(std::abs(u(0, k) - (k == static_cast<Eigen::Index>(b) ? 1.0 : 0.0)) < tol);
    }
  }
}

TEST_CASE("fit error scales as one over root N") {
  const auto set = build_index_set(5, 3);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  Eigen::MatrixXd c(1, static_cast<Eigen::Index>(set->size()));
  for (Eigen::Index k = 0; k < c.cols(); ++k) c(0, k) = g(rng) / (1.0 + (*set)[static_cast<std::size_t>(k)].order());
  const ChaosExpansion truth(set, c);
  auto mse = [&](std::size_t n, std::uint64_t seed0) {
    double s = 0.0;
    for (std::uint64_t r = 0; r < 4; ++r) {
      const auto fit = fit_coefficients(synthetic_store(truth, n, seed0 + r), set);
      s += (fit.expansion.coeffs() - c).squaredNorm();
    }
    return s / 4;
  };
  const double ratio = std::sqrt(mse(100000, 100) / mse(400000, 200));
  CHECK(ratio > 1.7);
  CHECK(ratio < 2.3);
}

TEST_CASE("fit flags undersampled stores and checks shapes") {
  const auto set = build_index_set(3, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 10);
  const auto fit = fit_coefficients(synthetic_store(ChaosExpansion(set, c), 50, 1), set);
  CHECK(fit.undersampled);
  CHECK_THROWS_AS(fit_coefficients(synthetic_store(ChaosExpansion(set, c), 50, 1), build_index_set(2, 2)),
                  DimensionMismatch);
  SampleStore empty;
  empty.inputs.resize(0, 3);
  empty.outputs.resize(0, 1);
  CHECK_THROWS_AS(fit_coefficients(empty, set), InvalidArgument);
}

TEST_CASE("sample store round trip is exact") {
  const auto set = build_index_set(2, 2);
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(1, 6);
  auto s = synthetic_store(ChaosExpansion(set, c), 37, 4);
  s.grid = SpatialGrid(1.0, 1.0, 1, 1);
  std::stringstream ss;
  write_sample_store(ss, s);
  const auto back = read_sample_store(ss);
  CHECK(back.inputs == s.inputs);
  CHECK(back.outputs == s.outputs);
  CHECK(back.seed == 4);
  CHECK(back.grid == s.grid);

  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 8);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_sample_store(cut), InvalidArgument);
}

TEST_CASE("kde of standard normal samples") {
  const auto v = normals(100000, 0.0, 3);
  const auto est = kde(v);
  double worst = 0.0;
  for (std::size_t i = 0; i < est.x.size(); ++i) worst = std::max(worst, std::abs(est.density[i] - phi(est.x[i])));
  CHECK(worst < 0.02);
  CHECK(est.integral() == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(est.at(est.x.front() - 1.0) == 0.0);
  CHECK(est.bandwidth == doctest::Approx(silverman_bandwidth(v)));
}

TEST_CASE("kde rejects degenerate input") {
  CHECK_THROWS_AS(kde(std::vector<double>(500, 1.25)), InvalidArgument);
  CHECK_THROWS_AS(kde(normals(50, 0.0, 1)), InvalidArgument);
}

TEST_CASE("silverman bandwidth") {
  // For a sample with sd 1 and a wide IQR the sd term wins.
  std::vector<double> v{-1.0, 1.0};
  for (int i = 0; i < 49; ++i) {
    v.push_back(-1.0);
    v.push_back(1.0);
  }
  const double n = static_cast<double>(v.size());
  const double sd = std::sqrt(n / (n - 1));
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * std::min(sd, 2.0 / 1.34) * std::pow(n, -0.2)));
}

TEST_CASE("density distances") {
  const auto a = kde(normals(100000, 0.0, 11));
  const auto b = kde(normals(100000, 0.0, 12));
  const auto c = kde(normals(100000, 1.0, 13));
  const auto same = density_distance(a, a);
  CHECK(same.l1 == 0.0);
  CHECK(same.hellinger == 0.0);
  CHECK(density_distance(a, b).l1 < 0.05);

  // int |phi(x) - phi(x - 1)| = 2 (2 Phi(1/2) - 1); smoothing shrinks it slightly.
  const double exact = 2.0 * std::erf(0.5 / std::numbers::sqrt2);
  const auto ac = density_distance(a, c);
  CHECK(ac.l1 == doctest::Approx(exact).epsilon(0.03));
  CHECK(ac.hellinger == doctest::Approx(std::sqrt(1.0 - std::exp(-1.0 / 8.0))).epsilon(0.03));
  const auto ca = density_distance(c, a);
  CHECK(ca.l1 == doctest::Approx(ac.l1).epsilon(1e-12));

  std::vector<double> far = normals(1000, 100.0, 4);
  CHECK_THROWS_AS(density_distance(kde(normals(1000, 0.0, 5)), kde(far)), InvalidArgument);
}

TEST_CASE("kde on fixed abscissae") {
  const auto v = normals(1000, 0.0, 8);
  const std::vector<double> x{-1.0, 0.0, 1.0};
  const auto e = kde_on(v, x, 0.3);
  CHECK(e.x == x);
  double direct = 0.0;
  for (double s : v) direct += phi(s / 0.3) / 0.3;
  direct /= 1000;
  CHECK(e.density[1] == doctest::Approx(direct).epsilon(1e-12));
  CHECK_THROWS_AS(kde_on(v, x, 0.0), InvalidArgument);
}

TEST_CASE("density csv") {
  const auto a = kde(normals(200, 0.0, 1), {0.0, 16, 3.0});
  std::ostringstream os;
  write_density_csv(os, {"a"}, {&a});
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 17);
  CHECK_THROWS_AS((write_density_csv(os, {"a", "b"}, {&a})), DimensionMismatch);
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  const std::size_t n = 100000;
  const double crit = 1.63 / std::sqrt(double(n));
  CHECK(ks_statistic_normal(normals(n, 0.0, 21)) < crit);
  CHECK(ks_statistic_normal(normals(n, 0.1, 21)) > crit);
  CHECK(ks_statistic_normal(std::vector<double>{0.0}) == doctest::Approx(0.5));
}
