#pragma once

// Multi-index sets, probabilists' Hermite polynomials and truncated Hermite
// chaos expansions u(x, xi) = sum_alpha u_alpha(x) psi_alpha(xi).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/grid.hpp"

namespace hcadapt {

/// Largest total order supported anywhere in the library.
inline constexpr int kMaxOrder = 10;

/// Default bound on d * |J_p| accepted by build_index_set.
inline constexpr std::size_t kDefaultIndexBudget = std::size_t{1} << 26;

/// Exponent vector alpha of a multivariate Hermite polynomial.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exponents);
  static MultiIndex zero(std::size_t d) { return MultiIndex(std::vector<int>(d, 0)); }
  /// n * e_i
  static MultiIndex unit(std::size_t d, std::size_t i, int n = 1);

  std::size_t dim() const { return exps_.size(); }
  int operator[](std::size_t i) const { return exps_[i]; }
  int order() const { return order_; }
  /// alpha! = prod alpha_i!, exact.
  std::uint64_t factorial() const;
  std::span<const int> exponents() const { return exps_; }

  /// Zero-pad to dimension d (d >= dim()).
  MultiIndex embedded(std::size_t d) const;
  std::string label() const;

  bool operator==(const MultiIndex& o) const { return exps_ == o.exps_; }

 private:
  std::vector<int> exps_;
  int order_ = 0;
};

std::ostream& operator<<(std::ostream& os, const MultiIndex& a);

/// n! as an exact integer; n <= 20.
std::uint64_t factorial(int n);
/// Binomial coefficient; throws on overflow.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// All multi-indices of dimension d and total order <= p, graded by total
/// order and, within a grade, in descending lexicographic order, so that
/// (2,0) < (1,1) < (0,2) and e_1 precedes e_2.
class IndexSet {
 public:
  IndexSet(std::size_t d, int p);

  std::size_t dim() const { return d_; }
  int max_order() const { return p_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  /// Position of alpha; throws if alpha is not in the set.
  std::size_t position(const MultiIndex& alpha) const;
  /// Position from a raw exponent vector, no validation beyond order.
  std::size_t position(std::span<const int> exps) const;
  bool contains(const MultiIndex& alpha) const;

  /// First position of the block with total order n.
  std::size_t block_begin(int n) const { return block_offsets_[static_cast<std::size_t>(n)]; }
  std::size_t block_end(int n) const { return block_offsets_[static_cast<std::size_t>(n) + 1]; }

  bool operator==(const IndexSet& o) const { return d_ == o.d_ && p_ == o.p_; }

 private:
  std::size_t rank_in_grade(std::span<const int> exps, int n) const;

  std::size_t d_;
  int p_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> block_offsets_;
  // compositions_[r][m] = number of ways to write r as an ordered sum of m
  // non-negative integers.
  std::vector<std::vector<std::uint64_t>> compositions_;
};

/// Builds J_p; rejects sets whose d * |J_p| exceeds `budget`.
std::shared_ptr<const IndexSet> build_index_set(std::size_t d, int p,
                                                std::size_t budget = kDefaultIndexBudget);

/// Probabilists' Hermite polynomial h_n(x) via h_{n+1} = x h_n - n h_{n-1}.
double hermite(int n, double x);

/// Normalized multivariate Hermite polynomial h_alpha(xi) / sqrt(alpha!).
double psi(const MultiIndex& alpha, std::span<const double> xi);

/// Table of h_k(xi_i) / sqrt(k!) for k <= p, one row per input dimension.
/// Evaluating every basis function at one xi costs O(|J_p| p) with it.
class NormalizedHermiteTable {
 public:
  NormalizedHermiteTable(std::span<const double> xi, int p);
  double operator()(std::size_t i, int k) const { return table_(static_cast<Eigen::Index>(i), k); }
  double psi(const MultiIndex& alpha) const;

 private:
  Eigen::MatrixXd table_;
};

/// Values psi_alpha(xi) for every alpha in the set.
Eigen::VectorXd evaluate_basis(const IndexSet& set, std::span<const double> xi);

/// Coefficient field u_alpha(x): one row per grid point, one column per
/// index-set entry (column 0 is the mean field).
class ChaosExpansion {
 public:
  ChaosExpansion(std::shared_ptr<const IndexSet> set, Eigen::MatrixXd coeffs,
                 SpatialGrid grid = SpatialGrid::single_point());

  const IndexSet& index_set() const { return *set_; }
  std::shared_ptr<const IndexSet> index_set_ptr() const { return set_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  Eigen::MatrixXd& coeffs() { return coeffs_; }
  const SpatialGrid& grid() const { return grid_; }
  std::size_t dim() const { return set_->dim(); }
  std::size_t num_points() const { return static_cast<std::size_t>(coeffs_.rows()); }

  double coeff(std::size_t point, const MultiIndex& alpha) const;

 private:
  std::shared_ptr<const IndexSet> set_;
  Eigen::MatrixXd coeffs_;
  SpatialGrid grid_;
};

/// u(x_point, xi).
double eval_expansion(const ChaosExpansion& e, std::span<const double> xi, std::size_t point);

struct Moments {
  double mean;
  double variance;
};

/// Mean and variance from the orthonormal coefficients.
Moments moments(const ChaosExpansion& e, std::size_t point);

// Columnar file: one JSON header line, then one CSV row of coefficients per
// grid point in index-set order. Values are written with 17 significant
// digits so a round trip is exact.
void write_expansion(std::ostream& os, const ChaosExpansion& e);
ChaosExpansion read_expansion(std::istream& is);
void save_expansion(const std::string& path, const ChaosExpansion& e);
ChaosExpansion load_expansion(const std::string& path);

}  // namespace hcadapt
