#pragma once

// Spatially varying adaptation isometries A(x), reduced expansions in the
// adapted variables eta(x) = A(x) xi, and the covariance kernels of eta_i(x).

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/chaos.hpp"
#include "hcadapt/rotation.hpp"

namespace hcadapt {

enum class AdaptationScheme { gaussian, quadratic, custom };

std::string to_string(AdaptationScheme s);
AdaptationScheme parse_scheme(const std::string& s);

/// Per-grid-point orthogonal matrices; the adapted subspace is spanned by the
/// first `rows_retained()` rows.
class IsometryField {
 public:
  IsometryField(SpatialGrid grid, std::size_t rows_retained, std::vector<Eigen::MatrixXd> matrices,
                AdaptationScheme scheme);

  const SpatialGrid& grid() const { return grid_; }
  std::size_t dim() const { return d_; }
  std::size_t rows_retained() const { return n_; }
  AdaptationScheme scheme() const { return scheme_; }
  std::size_t num_points() const { return matrices_.size(); }
  const Eigen::MatrixXd& matrix(std::size_t point) const { return matrices_.at(point); }
  Isometry isometry(std::size_t point) const { return Isometry(matrices_.at(point)); }

  /// Eigenvalues of S(x) in row order (quadratic scheme only).
  const std::vector<Eigen::VectorXd>& spectra() const { return spectra_; }
  void set_spectra(std::vector<Eigen::VectorXd> s) { spectra_ = std::move(s); }

  /// eta(x) = A(x) xi restricted to the retained rows, one row per point.
  Eigen::MatrixXd sample_eta(std::span<const double> xi) const;

 private:
  SpatialGrid grid_;
  std::size_t d_;
  std::size_t n_;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<Eigen::VectorXd> spectra_;
  AdaptationScheme scheme_;
};

// Header line of JSON (grid, d, n, scheme) then d rows of d values per point,
// row-major, points in grid order.
void write_isometry_field(std::ostream& os, const IsometryField& f);
IsometryField read_isometry_field(std::istream& is);

/// Completes k orthonormal rows to a d x d orthogonal matrix by Gram-Schmidt
/// against e_1, ..., e_d in order, skipping candidates whose residual norm is
/// below 1e-8. Throws if the rows are not orthonormal.
Eigen::MatrixXd complete_isometry(const Eigen::MatrixXd& rows);

/// Isometry whose first row is the normalized first-order coefficient vector.
Eigen::MatrixXd gaussian_isometry(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                  std::size_t point = 0);

/// Symmetric matrix of the second-order part: xi^T S xi reproduces the
/// quadratic terms, i.e. S_ii = u_{2e_i} / sqrt2 and S_ij = u_{e_i+e_j} / 2.
Eigen::MatrixXd quadratic_form(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w);

struct QuadraticIsometry {
  Eigen::MatrixXd a;            // rows are eigenvectors of S
  Eigen::VectorXd eigenvalues;  // D, same order as the rows
};

/// S = A^T D A, rows sorted by decreasing |eigenvalue|, each row signed so its
/// largest-magnitude entry is positive.
QuadraticIsometry quadratic_isometry(const Eigen::MatrixXd& s);

IsometryField gaussian_adaptation(const ChaosExpansion& e);
IsometryField quadratic_adaptation(const ChaosExpansion& e, std::size_t n);

/// Reduced expansion sum_{beta in I} u^A_beta(x) psi_beta(eta(x)) with I an
/// index set over the first n adapted variables.
class AdaptedExpansion {
 public:
  AdaptedExpansion(std::shared_ptr<const IndexSet> retained, Eigen::MatrixXd coeffs, SpatialGrid grid,
                   std::size_t base_dim);

  const IndexSet& retained() const { return *retained_; }
  std::shared_ptr<const IndexSet> retained_ptr() const { return retained_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  const SpatialGrid& grid() const { return grid_; }
  std::size_t base_dim() const { return base_dim_; }
  std::size_t num_points() const { return static_cast<std::size_t>(coeffs_.rows()); }

  /// Value at a point given the adapted variables eta (length retained().dim()).
  double eval_eta(std::size_t point, std::span<const double> eta) const;
  /// Value at a point given the original input xi, via eta = A(x) xi.
  double eval(const IsometryField& field, std::size_t point, std::span<const double> xi) const;

  /// Coefficients as an expansion over the n adapted variables.
  ChaosExpansion as_expansion() const;

 private:
  std::shared_ptr<const IndexSet> retained_;
  Eigen::MatrixXd coeffs_;
  SpatialGrid grid_;
  std::size_t base_dim_;
};

AdaptedExpansion project(const ChaosExpansion& e, const IsometryField& field,
                         std::shared_ptr<const IndexSet> retained);

struct ProjectionError {
  Eigen::VectorXd error;  // (I - C C^T) w over J_p
  double norm;
};

/// Coefficient-space error of keeping only `retained` after rotating by A.
ProjectionError projection_error(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                 const Isometry& a, std::span<const MultiIndex> retained);

/// (integral over D of |w - w^{A,I}|^2)^{1/2} with cell-area weights.
double global_error_norm(const ChaosExpansion& e, const IsometryField& field,
                         std::span<const MultiIndex> retained);

/// Covariance kernel k_i(x, y) = a_i(x) . a_i(y) of eta_i and its spectrum.
struct EtaKernel {
  std::size_t row;
  Eigen::MatrixXd values;          // k_i on grid points
  Eigen::VectorXd eigenvalues;     // area-weighted operator, descending
  Eigen::MatrixXd eigenfunctions;  // columns, orthonormal under cell areas
  double hs_norm;                  // sum_x sum_y w_x w_y k^2
  double hs_bound;                 // sum_{j,k} |a_ij|^2 |a_ik|^2 (L2(D) norms)

  /// Number of eigenvalues above rel_tol * lambda_max.
  std::size_t rank(double rel_tol = 1e-10) const;
};

EtaKernel eta_kernel(const IsometryField& field, std::size_t row);

/// Nonzero spectrum of the same operator from the d x d matrix R^T W R, with
/// R the points x d matrix of row-i vectors.
Eigen::VectorXd eta_kernel_spectrum_reduced(const IsometryField& field, std::size_t row);

}  // namespace hcadapt
