#include "hcadapt/random_field.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>

#include "hcadapt/error.hpp"

namespace hcadapt {

void RandomFieldSpec::validate() const {
  if (!(variance > 0.0)) throw InvalidArgument("kernel variance must be positive");
  if (!(length_x > 0.0) || !(length_y > 0.0)) throw InvalidArgument("correlation lengths must be positive");
}

double se_kernel(const RandomFieldSpec& spec, std::array<double, 2> x, std::array<double, 2> y) {
  const double dx = (x[0] - y[0]) / spec.length_x;
  const double dy = (x[1] - y[1]) / spec.length_y;
  return spec.variance * std::exp(-0.5 * (dx * dx + dy * dy));
}

Eigen::MatrixXd kernel_matrix(const RandomFieldSpec& spec, const SpatialGrid& grid) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = grid.center(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = se_kernel(spec, xi, grid.center(static_cast<std::size_t>(j)));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

KLBasis kl_decompose(const Eigen::MatrixXd& covariance, const SpatialGrid& grid, double energy_fraction,
                     double mean) {
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) throw InvalidArgument("energy fraction must lie in (0, 1]");
  if (static_cast<std::size_t>(covariance.rows()) != grid.size() || covariance.rows() != covariance.cols())
    throw DimensionMismatch("covariance matrix does not match the grid");
  const double w = grid.cell_area();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * covariance);
  if (eig.info() != Eigen::Success) throw ConvergenceFailure("KL eigendecomposition did not converge");
  const Eigen::VectorXd lam = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vec = eig.eigenvectors().rowwise().reverse();

  const double lmax = lam[0];
  double total = 0.0;
  Eigen::Index positive = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10 * lmax) throw InvalidArgument("covariance matrix is not positive semi-definite");
    if (lam[i] > 0.0) {
      total += lam[i];
      ++positive;
    }
  }

  Eigen::Index m = 0;
  double cum = 0.0;
  if (energy_fraction >= 1.0) {
    m = positive;
    cum = total;
  } else {
    while (m < positive && cum < energy_fraction * total) cum += lam[m++];
  }

  KLBasis kl{grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), mean), lam.head(m),
             vec.leftCols(m) / std::sqrt(w), cum / total, total};
  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::Index big = 0;
    kl.eigenfunctions.col(c).cwiseAbs().maxCoeff(&big);
    if (kl.eigenfunctions(big, c) < 0) kl.eigenfunctions.col(c) *= -1.0;
  }
  return kl;
}

KLBasis kl_decompose(const RandomFieldSpec& spec, const SpatialGrid& grid, double energy_fraction) {
  return kl_decompose(kernel_matrix(spec, grid), grid, energy_fraction, spec.mean);
}

KLBasis truncate_modes(const KLBasis& kl, std::size_t modes) {
  if (modes == 0 || modes > kl.modes()) throw InvalidArgument("requested KL modes exceed those available");
  const auto m = static_cast<Eigen::Index>(modes);
  KLBasis out{kl.grid, kl.mean, kl.eigenvalues.head(m), kl.eigenfunctions.leftCols(m), 0.0, kl.total_energy};
  out.energy_retained = out.eigenvalues.sum() / kl.total_energy;
  return out;
}

Eigen::VectorXd sample_gaussian_field(const KLBasis& kl, std::span<const double> xi) {
  if (xi.size() != kl.modes()) throw DimensionMismatch("sample length differs from the number of KL modes");
  const Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<Eigen::Index>(xi.size()));
  return kl.mean + kl.eigenfunctions * (kl.eigenvalues.cwiseSqrt().cwiseProduct(x));
}

Eigen::VectorXd sample_transmissivity(const KLBasis& kl, std::span<const double> xi) {
  return sample_gaussian_field(kl, xi).array().exp().matrix();
}

void write_kl_eigenvalues(std::ostream& os, const KLBasis& kl) {
  os << "mode,eigenvalue,cumulative_energy\n" << std::setprecision(17);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < kl.eigenvalues.size(); ++i) {
    cum += kl.eigenvalues[i];
    os << i + 1 << ',' << kl.eigenvalues[i] << ',' << cum / kl.total_energy << '\n';
  }
}

void write_kl_eigenfunctions(std::ostream& os, const KLBasis& kl) {
  os << "cell,x,y";
  for (std::size_t i = 0; i < kl.modes(); ++i) os << ",g" << i + 1;
  os << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < kl.grid.size(); ++c) {
    const auto x = kl.grid.center(c);
    os << c << ',' << x[0] << ',' << x[1];
    for (Eigen::Index i = 0; i < kl.eigenfunctions.cols(); ++i) os << ',' << kl.eigenfunctions(static_cast<Eigen::Index>(c), i);
    os << '\n';
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> standard_normal_draw(std::uint64_t seed, std::uint64_t index, std::size_t d) {
  std::mt19937_64 rng(splitmix64(splitmix64(seed) ^ index));
  std::normal_distribution<double> normal;
  std::vector<double> out(d);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace hcadapt
