#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's Hermite, Gram or rotation code.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Gauss-Hermite rule for the standard normal weight (weights sum to 1), by
/// Golub-Welsch on the Jacobi matrix of the probabilists' polynomials.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Rule gauss_hermite(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  Rule r;
  for (int k = 0; k < n; ++k) {
    r.nodes.push_back(eig.eigenvalues()[k]);
    const double v = eig.eigenvectors()(0, k);
    r.weights.push_back(v * v);
  }
  return r;
}

/// E[f(xi)] for xi ~ N(0, I_d) on the tensor rule with n nodes per axis.
inline double expectation(int d, int n, const std::function<double(const std::vector<double>&)>& f) {
  const Rule r = gauss_hermite(n);
  std::vector<int> idx(d, 0);
  std::vector<double> xi(d);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      xi[i] = r.nodes[idx[i]];
      w *= r.weights[idx[i]];
    }
    sum += w * f(xi);
    int i = 0;
    while (i < d && ++idx[i] == n) idx[i++] = 0;
    if (i == d) break;
  }
  return sum;
}

/// h_n(x) = n! sum_m (-1)^m x^{n-2m} / (m! (n-2m)! 2^m).
inline double hermite(int n, double x) {
  double s = 0.0;
  for (int m = 0; 2 * m <= n; ++m)
    s += std::pow(-1.0, m) * std::pow(x, n - 2 * m) /
         (std::tgamma(m + 1.0) * std::tgamma(n - 2 * m + 1.0) * std::pow(2.0, m));
  return std::tgamma(n + 1.0) * s;
}

inline double psi(const std::vector<int>& alpha, const std::vector<double>& xi) {
  double v = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    v *= hermite(alpha[i], xi[i]) / std::sqrt(std::tgamma(alpha[i] + 1.0));
  return v;
}

/// Haar-distributed orthogonal matrix from the QR factors of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) g(i, k) = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k)
    if (r(k, k) < 0) q.col(k) *= -1.0;
  return q;
}

/// All exponent vectors of dimension d and total order <= p, any order.
inline std::vector<std::vector<int>> all_indices(int d, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(d, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == d) {
      out.push_back(a);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      a[i] = v;
      rec(i + 1, left - v);
    }
    a[i] = 0;
  };
  rec(0, p);
  return out;
}

}  // namespace oracle
