#include "hcadapt/random_coeffs.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "hcadapt/error.hpp"
#include "hcadapt/parallel.hpp"
#include "hcadapt/random_field.hpp"
#include "hcadapt/rotation.hpp"

namespace hcadapt {

VariableSplit VariableSplit::leading(std::size_t d, std::size_t d1) {
  if (d1 == 0 || d1 > d) throw InvalidArgument("adapted block must hold between 1 and d variables");
  VariableSplit s;
  for (std::size_t i = 0; i < d; ++i) (i < d1 ? s.adapted : s.parameters).push_back(i);
  return s;
}

void VariableSplit::validate(std::size_t d) const {
  if (adapted.empty()) throw InvalidArgument("adapted block is empty");
  if (adapted.size() + parameters.size() != d) throw InvalidArgument("split blocks do not cover all variables");
  std::vector<int> seen(d, 0);
  for (auto v : adapted) {
    if (v >= d) throw InvalidArgument("split variable out of range");
    ++seen[v];
  }
  for (auto v : parameters) {
    if (v >= d) throw InvalidArgument("split variable out of range");
    ++seen[v];
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
    throw InvalidArgument("split blocks must be disjoint");
}

SplitExpansion::SplitExpansion(std::shared_ptr<const IndexSet> base_set, VariableSplit split, std::vector<Pair> pairs,
                               Eigen::MatrixXd table, SpatialGrid grid)
    : base_set_(std::move(base_set)), split_(std::move(split)), pairs_(std::move(pairs)), table_(std::move(table)),
      grid_(grid) {
  split_.validate(base_set_->dim());
  adapted_set_ = build_index_set(split_.adapted.size(), base_set_->max_order());
  if (!split_.parameters.empty()) parameter_set_ = build_index_set(split_.parameters.size(), base_set_->max_order());
  if (static_cast<std::size_t>(table_.cols()) != pairs_.size())
    throw DimensionMismatch("coefficient table needs one column per (alpha, beta) pair");
  if (static_cast<std::size_t>(table_.rows()) != grid_.size())
    throw DimensionMismatch("coefficient table needs one row per grid point");
}

double SplitExpansion::eval(std::size_t point, std::span<const double> xi_hat, std::span<const double> zeta) const {
  if (xi_hat.size() != adapted_dim() || zeta.size() != parameter_dim())
    throw DimensionMismatch("input lengths do not match the split");
  const Eigen::VectorXd pa = evaluate_basis(*adapted_set_, xi_hat);
  const Eigen::VectorXd pb = parameter_set_ ? evaluate_basis(*parameter_set_, zeta) : Eigen::VectorXd::Ones(1);
  const auto r = static_cast<Eigen::Index>(point);
  double s = 0.0;
  for (std::size_t k = 0; k < pairs_.size(); ++k)
    s += table_(r, static_cast<Eigen::Index>(k)) * pa[static_cast<Eigen::Index>(pairs_[k].alpha)] *
         pb[static_cast<Eigen::Index>(pairs_[k].beta)];
  return s;
}

SplitExpansion regroup(const ChaosExpansion& base, const VariableSplit& split) {
  const IndexSet& set = base.index_set();
  split.validate(set.dim());
  const auto aset = build_index_set(split.adapted.size(), set.max_order());
  std::shared_ptr<const IndexSet> bset;
  if (!split.parameters.empty()) bset = build_index_set(split.parameters.size(), set.max_order());
  std::vector<SplitExpansion::Pair> pairs;
  pairs.reserve(set.size());
  std::vector<int> ea(split.adapted.size());
  std::vector<int> eb(split.parameters.size());
  for (const auto& alpha : set) {
    for (std::size_t i = 0; i < ea.size(); ++i) ea[i] = alpha[split.adapted[i]];
    for (std::size_t i = 0; i < eb.size(); ++i) eb[i] = alpha[split.parameters[i]];
    pairs.push_back({aset->position(std::span<const int>(ea)), bset ? bset->position(std::span<const int>(eb)) : 0});
  }
  return SplitExpansion(base.index_set_ptr(), split, std::move(pairs), base.coeffs(), base.grid());
}

ChaosExpansion merge(const SplitExpansion& se) {
  const IndexSet& set = se.base_set();
  const auto& split = se.split();
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(se.table().rows(), static_cast<Eigen::Index>(set.size()));
  std::vector<int> exps(set.dim());
  for (std::size_t k = 0; k < se.pairs().size(); ++k) {
    const auto& a = se.adapted_set()[se.pairs()[k].alpha];
    for (std::size_t i = 0; i < split.adapted.size(); ++i) exps[split.adapted[i]] = a[i];
    if (const IndexSet* ps = se.parameter_set()) {
      const auto& b = (*ps)[se.pairs()[k].beta];
      for (std::size_t i = 0; i < split.parameters.size(); ++i) exps[split.parameters[i]] = b[i];
    }
    coeffs.col(static_cast<Eigen::Index>(set.position(MultiIndex(exps)))) += se.table().col(static_cast<Eigen::Index>(k));
  }
  return ChaosExpansion(se.base_set_ptr(), std::move(coeffs), se.grid());
}

std::vector<double> merge_inputs(const VariableSplit& split, std::span<const double> xi_hat,
                                 std::span<const double> zeta) {
  if (xi_hat.size() != split.adapted.size() || zeta.size() != split.parameters.size())
    throw DimensionMismatch("input lengths do not match the split");
  std::vector<double> xi(xi_hat.size() + zeta.size());
  for (std::size_t i = 0; i < xi_hat.size(); ++i) xi[split.adapted[i]] = xi_hat[i];
  for (std::size_t i = 0; i < zeta.size(); ++i) xi[split.parameters[i]] = zeta[i];
  return xi;
}

namespace {

Eigen::VectorXd parameter_basis(const SplitExpansion& se, std::span<const double> zeta) {
  if (zeta.size() != se.parameter_dim()) throw DimensionMismatch("zeta length differs from the parameter block");
  if (const IndexSet* ps = se.parameter_set()) return evaluate_basis(*ps, zeta);
  return Eigen::VectorXd::Ones(1);
}

// |beta set| x |alpha set| matrix of u_{alpha,beta} at one point.
Eigen::MatrixXd pair_matrix(const SplitExpansion& se, std::size_t point) {
  const auto nb = static_cast<Eigen::Index>(se.parameter_set() ? se.parameter_set()->size() : 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nb, static_cast<Eigen::Index>(se.adapted_set().size()));
  const auto r = static_cast<Eigen::Index>(point);
  for (std::size_t k = 0; k < se.pairs().size(); ++k) {
    const auto& pr = se.pairs()[k];
    m(static_cast<Eigen::Index>(pr.beta), static_cast<Eigen::Index>(pr.alpha)) += se.table()(r, static_cast<Eigen::Index>(k));
  }
  return m;
}

Eigen::MatrixXd adapt_matrix(const IndexSet& aset, const Eigen::VectorXd& u, std::size_t point,
                             AdaptationScheme scheme) {
  switch (scheme) {
    case AdaptationScheme::gaussian:
      return gaussian_isometry(aset, u.transpose(), point);
    case AdaptationScheme::quadratic:
      if (aset.max_order() < 2) throw InvalidArgument("quadratic adaptation needs order >= 2");
      return quadratic_isometry(quadratic_form(aset, u.transpose())).a;
    case AdaptationScheme::custom:
      break;
  }
  throw InvalidArgument("conditional adaptation supports the gaussian and quadratic schemes only");
}

}  // namespace

Eigen::VectorXd conditional_coefficients(const SplitExpansion& se, std::span<const double> zeta, std::size_t point) {
  if (point >= se.num_points()) throw InvalidArgument("grid point out of range");
  const Eigen::VectorXd pb = parameter_basis(se, zeta);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(se.adapted_set().size()));
  const auto r = static_cast<Eigen::Index>(point);
  for (std::size_t k = 0; k < se.pairs().size(); ++k) {
    const auto& pr = se.pairs()[k];
    u[static_cast<Eigen::Index>(pr.alpha)] +=
        se.table()(r, static_cast<Eigen::Index>(k)) * pb[static_cast<Eigen::Index>(pr.beta)];
  }
  return u;
}

Eigen::MatrixXd conditional_coefficients(const SplitExpansion& se, std::span<const double> zeta) {
  const Eigen::VectorXd pb = parameter_basis(se, zeta);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(se.num_points()),
                                            static_cast<Eigen::Index>(se.adapted_set().size()));
  for (std::size_t k = 0; k < se.pairs().size(); ++k) {
    const auto& pr = se.pairs()[k];
    u.col(static_cast<Eigen::Index>(pr.alpha)) +=
        se.table().col(static_cast<Eigen::Index>(k)) * pb[static_cast<Eigen::Index>(pr.beta)];
  }
  return u;
}

ConditionalAdaptation conditional_adapt(const SplitExpansion& se, std::span<const double> zeta, std::size_t point,
                                        AdaptationScheme scheme, const IndexSet& retained) {
  if (retained.dim() > se.adapted_dim()) throw InvalidArgument("retained set has more variables than the adapted block");
  const Eigen::VectorXd u = conditional_coefficients(se, zeta, point);
  ConditionalAdaptation out;
  out.a = adapt_matrix(se.adapted_set(), u, point, scheme);
  const auto targets = embed_index_set(retained, se.adapted_dim());
  const RotationPlan plan(se.adapted_set(), Isometry(out.a), targets);
  out.coeffs = plan.apply(u.transpose());
  return out;
}

ExpectedAdaptation expected_adapted_coefficients(const SplitExpansion& se, AdaptationScheme scheme,
                                                 const IndexSet& retained, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("expected coefficients need at least one sample");
  if (retained.dim() > se.adapted_dim()) throw InvalidArgument("retained set has more variables than the adapted block");
  const std::size_t points = se.num_points();
  const auto nb = static_cast<Eigen::Index>(se.parameter_set() ? se.parameter_set()->size() : 1);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(samples), nb);
  parallel_for(samples, [&](std::size_t n) {
    const auto zeta = standard_normal_draw(seed, n, se.parameter_dim());
    basis.row(static_cast<Eigen::Index>(n)) = parameter_basis(se, zeta).transpose();
  });

  const auto targets = embed_index_set(retained, se.adapted_dim());
  ExpectedAdaptation out;
  out.samples = samples;
  out.mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points), static_cast<Eigen::Index>(targets.size()));
  out.u0.resize(static_cast<Eigen::Index>(points));
  parallel_for(points, [&](std::size_t p) {
    const Eigen::MatrixXd m = pair_matrix(se, p);
    out.u0[static_cast<Eigen::Index>(p)] = m(0, 0);
    const Eigen::MatrixXd u = basis * m;  // samples x |alpha set|
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets.size()));
    for (Eigen::Index n = 0; n < u.rows(); ++n) {
      const Eigen::VectorXd un = u.row(n).transpose();
      const Eigen::MatrixXd a = adapt_matrix(se.adapted_set(), un, p, scheme);
      acc += RotationPlan(se.adapted_set(), Isometry(a), targets).apply(un.transpose());
    }
    out.mean.row(static_cast<Eigen::Index>(p)) = acc.transpose() / static_cast<double>(samples);
  });
  return out;
}

void write_expected_coefficients_csv(std::ostream& os, const SplitExpansion& se, const IndexSet& retained,
                                     const ExpectedAdaptation& ex) {
  os << "cell,x,y,u0";
  for (const auto& b : retained) os << ",EU_" << b.label();
  os << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < se.num_points(); ++c) {
    const auto x = se.grid().center(c);
    const auto r = static_cast<Eigen::Index>(c);
    os << c << ',' << x[0] << ',' << x[1] << ',' << ex.u0[r];
    for (Eigen::Index k = 0; k < ex.mean.cols(); ++k) os << ',' << ex.mean(r, k);
    os << '\n';
  }
}

}  // namespace hcadapt
