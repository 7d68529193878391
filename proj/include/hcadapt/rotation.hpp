#pragma once

// Exact change of basis for Hermite chaos coefficients under eta = A xi.
//
// The inner products <psi_alpha(xi), psi_beta(A xi)> vanish across total
// orders. Within an order they are sums over complete pairings between the
// alpha-copies of xi and the beta-copies of eta; grouping pairings by how many
// edges join eta_i to xi_k gives a contingency table M with row sums beta and
// column sums alpha, each contributing
//
//     alpha! beta! / prod M_ik!  *  prod a_ik^M_ik.

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/chaos.hpp"

namespace hcadapt {

/// Largest total order accepted by the contingency-table gram_entry.
inline constexpr int kMaxGramOrder = 6;

/// Tolerance of the orthogonality check A A^T = I.
inline constexpr double kIsometryTolerance = 1e-10;

/// Orthogonal d x d matrix; validated on construction.
class Isometry {
 public:
  explicit Isometry(Eigen::MatrixXd a, double tol = kIsometryTolerance);
  static Isometry identity(std::size_t d) { return Isometry(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))); }

  std::size_t dim() const { return static_cast<std::size_t>(a_.rows()); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  double operator()(std::size_t i, std::size_t k) const {
    return a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }
  /// eta = A xi.
  Eigen::VectorXd apply(std::span<const double> xi) const;

 private:
  Eigen::MatrixXd a_;
};

/// max |A A^T - I|.
double orthogonality_defect(const Eigen::MatrixXd& a);

/// <psi_alpha(xi), psi_beta(A xi)> by enumerating contingency tables.
/// Zero when |alpha| != |beta|; throws above kMaxGramOrder.
double gram_entry(const MultiIndex& alpha, const MultiIndex& beta, const Isometry& a);

/// <h_alpha(xi), h_n(eta_i)> = n! prod_k a_ik^alpha_k (zero unless |alpha| = n).
/// With `normalized` the value is divided by sqrt(alpha! n!).
double gram_entry_1d(const MultiIndex& alpha, int n, std::size_t row, const Isometry& a,
                     bool normalized = true);

/// Column C_{., beta} restricted to the order-|beta| block of `set`, ordered as
/// the block. Computed by expanding prod_i (a_i . t)^beta_i, whose coefficient
/// of t^alpha times alpha! is the unnormalized inner product.
Eigen::VectorXd gram_column(const IndexSet& set, const MultiIndex& beta, const Isometry& a);

/// Full |J_p| x |J_p| Gram matrix; columns outside `retained_mask` (if given)
/// are zero.
Eigen::MatrixXd gram_matrix(const IndexSet& set, const Isometry& a,
                            const std::vector<bool>* retained_mask = nullptr);

/// CSV dump with multi-index row and column labels.
void write_gram_csv(std::ostream& os, const IndexSet& set, const Eigen::MatrixXd& c);

/// Gram columns for a retained list of target indices under one isometry.
class RotationPlan {
 public:
  RotationPlan(const IndexSet& set, const Isometry& a, std::span<const MultiIndex> retained);

  /// u^A_beta for each retained beta, from one coefficient row over `set`.
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::RowVectorXd>& w) const;
  /// C C^T w with C restricted to the retained columns.
  Eigen::VectorXd reconstruct(const Eigen::Ref<const Eigen::RowVectorXd>& w) const;

  std::size_t size() const { return columns_.size(); }

 private:
  const IndexSet* set_;
  std::vector<int> orders_;
  std::vector<Eigen::VectorXd> columns_;
};

/// Validates that every retained index belongs to `set` and returns them.
std::vector<MultiIndex> check_retained(const IndexSet& set, std::span<const MultiIndex> retained);

/// Embeds a (smaller-dimensional) index set into dimension d by zero padding,
/// i.e. the terms over the first set.dim() adapted variables.
std::vector<MultiIndex> embed_index_set(const IndexSet& set, std::size_t d);

/// u^A_beta(x) = sum_{|alpha| = |beta|} u_alpha(x) C_{alpha,beta} for every
/// retained beta and every grid point. Result: points x |retained|.
Eigen::MatrixXd rotate_coefficients(const ChaosExpansion& e, const Isometry& a,
                                    std::span<const MultiIndex> retained);

/// Rotation onto the full J_p.
ChaosExpansion rotate_coefficients(const ChaosExpansion& e, const Isometry& a);

/// Closed forms for the coefficients of 1, h_1(eta), h_2(eta)/sqrt2,
/// h_3(eta)/sqrt6 with eta = a . xi (|a| = 1), up to `max_order` <= 3.
Eigen::VectorXd explicit_coeffs_1d(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                   std::span<const double> a, int max_order);

}  // namespace hcadapt
