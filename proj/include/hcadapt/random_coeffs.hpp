#pragma once

// Expansions whose coefficients are themselves random: the input is split into
// an adapted block xi_hat and a parameter block zeta_hat, and the coefficients
// over xi_hat are polynomials in zeta_hat.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/adaptation.hpp"
#include "hcadapt/chaos.hpp"

namespace hcadapt {

/// Which base variables form the adapted block (in order); the remaining
/// variables form the parameter block, also in increasing order.
struct VariableSplit {
  std::vector<std::size_t> adapted;
  std::vector<std::size_t> parameters;

  /// First d1 variables adapted, the rest parameters.
  static VariableSplit leading(std::size_t d, std::size_t d1);
  /// Checks the blocks are disjoint, cover 0..d-1 and the adapted block is
  /// non-empty.
  void validate(std::size_t d) const;
};

/// Coefficient table u_{alpha,beta}(x) over pairs with |alpha| + |beta| <= p.
class SplitExpansion {
 public:
  struct Pair {
    std::size_t alpha;  // position in adapted_set()
    std::size_t beta;   // position in parameter_set(), 0 when d2 = 0
  };

  SplitExpansion(std::shared_ptr<const IndexSet> base_set, VariableSplit split, std::vector<Pair> pairs,
                 Eigen::MatrixXd table, SpatialGrid grid);

  const IndexSet& base_set() const { return *base_set_; }
  std::shared_ptr<const IndexSet> base_set_ptr() const { return base_set_; }
  const VariableSplit& split() const { return split_; }
  std::size_t adapted_dim() const { return split_.adapted.size(); }
  std::size_t parameter_dim() const { return split_.parameters.size(); }
  const IndexSet& adapted_set() const { return *adapted_set_; }
  std::shared_ptr<const IndexSet> adapted_set_ptr() const { return adapted_set_; }
  /// Null when the parameter block is empty.
  const IndexSet* parameter_set() const { return parameter_set_.get(); }
  const std::vector<Pair>& pairs() const { return pairs_; }
  /// points x pairs, column k holds u_{pairs()[k]}.
  const Eigen::MatrixXd& table() const { return table_; }
  const SpatialGrid& grid() const { return grid_; }
  std::size_t num_points() const { return static_cast<std::size_t>(table_.rows()); }

  /// u(x, xi_hat, zeta) from the regrouped form.
  double eval(std::size_t point, std::span<const double> xi_hat, std::span<const double> zeta) const;

 private:
  std::shared_ptr<const IndexSet> base_set_;
  std::shared_ptr<const IndexSet> adapted_set_;
  std::shared_ptr<const IndexSet> parameter_set_;
  VariableSplit split_;
  std::vector<Pair> pairs_;
  Eigen::MatrixXd table_;
  SpatialGrid grid_;
};

SplitExpansion regroup(const ChaosExpansion& base, const VariableSplit& split);

/// Inverse of regroup.
ChaosExpansion merge(const SplitExpansion& se);

/// Scatter (xi_hat, zeta) back into a base input vector.
std::vector<double> merge_inputs(const VariableSplit& split, std::span<const double> xi_hat,
                                 std::span<const double> zeta);

/// U_alpha(x, zeta) = sum_beta u_{alpha,beta}(x) psi_beta(zeta) for every alpha
/// over the adapted block.
Eigen::VectorXd conditional_coefficients(const SplitExpansion& se, std::span<const double> zeta, std::size_t point);

/// Same for every grid point: points x |adapted_set|.
Eigen::MatrixXd conditional_coefficients(const SplitExpansion& se, std::span<const double> zeta);

struct ConditionalAdaptation {
  Eigen::VectorXd coeffs;  // U^A over the retained set
  Eigen::MatrixXd a;       // A(x, zeta)
};

/// Builds A(x, zeta) from the conditional coefficients with the given scheme,
/// rotates them and keeps the first `retained` terms.
ConditionalAdaptation conditional_adapt(const SplitExpansion& se, std::span<const double> zeta, std::size_t point,
                                        AdaptationScheme scheme, const IndexSet& retained);

struct ExpectedAdaptation {
  Eigen::MatrixXd mean;      // points x |retained|, E over zeta of U^A
  Eigen::VectorXd u0;        // deterministic mean field u_{0,0}
  std::size_t samples = 0;
};

/// Monte-Carlo mean of the adapted coefficients over zeta draws
/// standard_normal_draw(seed, n, d2), n < samples.
ExpectedAdaptation expected_adapted_coefficients(const SplitExpansion& se, AdaptationScheme scheme,
                                                 const IndexSet& retained, std::size_t samples, std::uint64_t seed);

/// Grid CSV: cell, x, y, u0, then one column per retained term.
void write_expected_coefficients_csv(std::ostream& os, const SplitExpansion& se, const IndexSet& retained,
                                     const ExpectedAdaptation& ex);

}  // namespace hcadapt
