#include "hcadapt/rotation.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "hcadapt/error.hpp"

namespace hcadapt {

double orthogonality_defect(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a * a.transpose() - Eigen::MatrixXd::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff();
}

Isometry::Isometry(Eigen::MatrixXd a, double tol) : a_(std::move(a)) {
  if (a_.rows() == 0 || a_.rows() != a_.cols()) throw DimensionMismatch("isometry must be a non-empty square matrix");
  const double defect = orthogonality_defect(a_);
  if (!(defect <= tol))
    throw InvalidArgument("matrix is not orthogonal: max |A A^T - I| = " + std::to_string(defect));
}

Eigen::VectorXd Isometry::apply(std::span<const double> xi) const {
  if (xi.size() != dim()) throw DimensionMismatch("isometry applied to a sample of the wrong length");
  return a_ * Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<Eigen::Index>(xi.size()));
}

namespace {

struct TableWalk {
  const Isometry& a;
  std::vector<std::size_t> rows;  // eta indices with beta_i > 0
  std::vector<std::size_t> cols;  // xi indices with alpha_k > 0
  std::vector<int> row_rem;
  std::vector<int> col_rem;
  std::uint64_t numerator;        // alpha! beta!
  double sum = 0.0;

  // Fills cell (r, c) of M. `power` is prod a^M and `denom` is prod M! over
  // the cells filled so far.
  void walk(std::size_t r, std::size_t c, double power, std::uint64_t denom) {
    if (r == rows.size()) {
      sum += static_cast<double>(numerator / denom) * power;
      return;
    }
    const std::size_t nr = (c + 1 == cols.size()) ? r + 1 : r;
    const std::size_t nc = (c + 1 == cols.size()) ? 0 : c + 1;
    const int hi = std::min(row_rem[r], col_rem[c]);
    // The last column of a row takes whatever the row still needs.
    const int lo = (c + 1 == cols.size()) ? row_rem[r] : 0;
    if (lo > hi) return;
    const double entry = a(rows[r], cols[c]);
    for (int m = lo; m <= hi; ++m) {
      row_rem[r] -= m;
      col_rem[c] -= m;
      walk(nr, nc, power * std::pow(entry, m), denom * factorial(m));
      row_rem[r] += m;
      col_rem[c] += m;
    }
  }
};

}  // namespace

double gram_entry(const MultiIndex& alpha, const MultiIndex& beta, const Isometry& a) {
  const std::size_t d = a.dim();
  if (alpha.dim() != d || beta.dim() != d) throw DimensionMismatch("gram_entry: dimensions differ");
  if (alpha.order() > kMaxGramOrder || beta.order() > kMaxGramOrder)
    throw InvalidArgument("gram_entry: order exceeds the combinatorial bound");
  if (alpha.order() != beta.order()) return 0.0;
  if (alpha.order() == 0) return 1.0;

  const std::uint64_t af = alpha.factorial();
  const std::uint64_t bf = beta.factorial();
  TableWalk w{a, {}, {}, {}, {}, af * bf};
  for (std::size_t i = 0; i < d; ++i) {
    if (beta[i] > 0) {
      w.rows.push_back(i);
      w.row_rem.push_back(beta[i]);
    }
    if (alpha[i] > 0) {
      w.cols.push_back(i);
      w.col_rem.push_back(alpha[i]);
    }
  }
  w.walk(0, 0, 1.0, 1);
  return w.sum / std::sqrt(static_cast<double>(af) * static_cast<double>(bf));
}

double gram_entry_1d(const MultiIndex& alpha, int n, std::size_t row, const Isometry& a, bool normalized) {
  if (alpha.dim() != a.dim()) throw DimensionMismatch("gram_entry_1d: dimensions differ");
  if (row >= a.dim()) throw DimensionMismatch("gram_entry_1d: row out of range");
  if (n < 0) throw InvalidArgument("gram_entry_1d: negative order");
  if (alpha.order() != n) return 0.0;
  double v = static_cast<double>(factorial(n));
  for (std::size_t k = 0; k < alpha.dim(); ++k)
    if (alpha[k] != 0) v *= std::pow(a(row, k), alpha[k]);
  if (normalized) v /= std::sqrt(static_cast<double>(alpha.factorial()) * static_cast<double>(factorial(n)));
  return v;
}

Eigen::VectorXd gram_column(const IndexSet& set, const MultiIndex& beta, const Isometry& a) {
  const std::size_t d = set.dim();
  if (beta.dim() != d || a.dim() != d) throw DimensionMismatch("gram_column: dimensions differ");
  const int n = beta.order();
  if (n > set.max_order()) throw InvalidArgument("gram_column: order exceeds the index set");

  // Homogeneous polynomial of the current degree, stored over that block.
  int degree = 0;
  Eigen::VectorXd poly = Eigen::VectorXd::Ones(1);
  std::vector<int> exps(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (int rep = 0; rep < beta[i]; ++rep) {
      const std::size_t src0 = set.block_begin(degree);
      const std::size_t dst0 = set.block_begin(degree + 1);
      Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.block_end(degree + 1) - dst0));
      for (Eigen::Index s = 0; s < poly.size(); ++s) {
        const double c = poly[s];
        if (c == 0.0) continue;
        const auto src = set[src0 + static_cast<std::size_t>(s)].exponents();
        std::copy(src.begin(), src.end(), exps.begin());
        for (std::size_t k = 0; k < d; ++k) {
          const double aik = a(i, k);
          if (aik == 0.0) continue;
          ++exps[k];
          next[static_cast<Eigen::Index>(set.position(exps) - dst0)] += c * aik;
          --exps[k];
        }
      }
      poly = std::move(next);
      ++degree;
    }
  }

  // C_{alpha,beta} = alpha! [t^alpha] / sqrt(alpha! beta!) = [t^alpha] sqrt(alpha!/beta!).
  const double bf = static_cast<double>(beta.factorial());
  const std::size_t b0 = set.block_begin(n);
  for (Eigen::Index s = 0; s < poly.size(); ++s)
    poly[s] *= std::sqrt(static_cast<double>(set[b0 + static_cast<std::size_t>(s)].factorial()) / bf);
  return poly;
}

Eigen::MatrixXd gram_matrix(const IndexSet& set, const Isometry& a, const std::vector<bool>* retained_mask) {
  const auto n = static_cast<Eigen::Index>(set.size());
  if (retained_mask && retained_mask->size() != set.size())
    throw DimensionMismatch("gram_matrix: mask length differs from index set");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t b = 0; b < set.size(); ++b) {
    if (retained_mask && !(*retained_mask)[b]) continue;
    const int ord = set[b].order();
    const auto col = gram_column(set, set[b], a);
    c.block(static_cast<Eigen::Index>(set.block_begin(ord)), static_cast<Eigen::Index>(b), col.size(), 1) = col;
  }
  return c;
}

void write_gram_csv(std::ostream& os, const IndexSet& set, const Eigen::MatrixXd& c) {
  os << "alpha\\beta";
  for (const auto& b : set) os << ",\"" << b.label() << '"';
  os << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < set.size(); ++r) {
    os << '"' << set[r].label() << '"';
    for (std::size_t k = 0; k < set.size(); ++k)
      os << ',' << c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    os << '\n';
  }
}

std::vector<MultiIndex> check_retained(const IndexSet& set, std::span<const MultiIndex> retained) {
  for (const auto& b : retained)
    if (!set.contains(b)) throw InvalidArgument("retained index " + b.label() + " is not in J_p");
  return {retained.begin(), retained.end()};
}

std::vector<MultiIndex> embed_index_set(const IndexSet& set, std::size_t d) {
  std::vector<MultiIndex> out;
  out.reserve(set.size());
  for (const auto& a : set) out.push_back(a.embedded(d));
  return out;
}

RotationPlan::RotationPlan(const IndexSet& set, const Isometry& a, std::span<const MultiIndex> retained)
    : set_(&set) {
  check_retained(set, retained);
  if (a.dim() != set.dim()) throw DimensionMismatch("isometry dimension differs from expansion dimension");
  orders_.reserve(retained.size());
  columns_.reserve(retained.size());
  for (const auto& b : retained) {
    orders_.push_back(b.order());
    columns_.push_back(gram_column(set, b, a));
  }
}

Eigen::VectorXd RotationPlan::apply(const Eigen::Ref<const Eigen::RowVectorXd>& w) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const auto b0 = static_cast<Eigen::Index>(set_->block_begin(orders_[k]));
    out[static_cast<Eigen::Index>(k)] = w.segment(b0, columns_[k].size()).dot(columns_[k].transpose());
  }
  return out;
}

Eigen::VectorXd RotationPlan::reconstruct(const Eigen::Ref<const Eigen::RowVectorXd>& w) const {
  const Eigen::VectorXd rotated = apply(w);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
  for (std::size_t k = 0; k < columns_.size(); ++k) {
    const auto b0 = static_cast<Eigen::Index>(set_->block_begin(orders_[k]));
    out.segment(b0, columns_[k].size()) += rotated[static_cast<Eigen::Index>(k)] * columns_[k];
  }
  return out;
}

Eigen::MatrixXd rotate_coefficients(const ChaosExpansion& e, const Isometry& a, std::span<const MultiIndex> retained) {
  const RotationPlan plan(e.index_set(), a, retained);
  Eigen::MatrixXd out(e.coeffs().rows(), static_cast<Eigen::Index>(retained.size()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) = plan.apply(e.coeffs().row(r)).transpose();
  return out;
}

ChaosExpansion rotate_coefficients(const ChaosExpansion& e, const Isometry& a) {
  auto coeffs = rotate_coefficients(e, a, e.index_set().indices());
  return ChaosExpansion(e.index_set_ptr(), std::move(coeffs), e.grid());
}

Eigen::VectorXd explicit_coeffs_1d(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                   std::span<const double> a, int max_order) {
  const std::size_t d = set.dim();
  if (max_order < 0 || max_order > 3) throw InvalidArgument("explicit_coeffs_1d supports orders 0..3 only");
  if (max_order > set.max_order()) throw InvalidArgument("explicit_coeffs_1d: order exceeds the expansion");
  if (a.size() != d) throw DimensionMismatch("explicit_coeffs_1d: row length differs from d");
  if (static_cast<std::size_t>(w.size()) != set.size()) throw DimensionMismatch("explicit_coeffs_1d: coefficient row length");
  double norm2 = 0.0;
  for (double v : a) norm2 += v * v;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-10) throw InvalidArgument("explicit_coeffs_1d: row is not a unit vector");

  std::vector<int> e(d, 0);
  auto u = [&](std::initializer_list<std::size_t> vars) {
    std::fill(e.begin(), e.end(), 0);
    for (auto v : vars) ++e[v];
    return w[static_cast<Eigen::Index>(set.position(e))];
  };

  Eigen::VectorXd out = Eigen::VectorXd::Zero(max_order + 1);
  out[0] = w[0];
  if (max_order >= 1)
    for (std::size_t k = 0; k < d; ++k) out[1] += a[k] * u({k});
  if (max_order >= 2) {
    const double r2 = std::sqrt(2.0);
    for (std::size_t k = 0; k < d; ++k) {
      out[2] += u({k, k}) * a[k] * a[k];
      for (std::size_t j = k + 1; j < d; ++j) out[2] += r2 * u({k, j}) * a[k] * a[j];
    }
  }
  if (max_order >= 3) {
    const double r3 = std::sqrt(3.0);
    const double r6 = std::sqrt(6.0);
    for (std::size_t k = 0; k < d; ++k) {
      out[3] += u({k, k, k}) * a[k] * a[k] * a[k];
      // 2e_k + e_j for every j != k.
      for (std::size_t j = 0; j < d; ++j)
        if (j != k) out[3] += r3 * u({k, k, j}) * a[k] * a[k] * a[j];
      for (std::size_t j = k + 1; j < d; ++j)
        for (std::size_t l = j + 1; l < d; ++l) out[3] += r6 * u({k, j, l}) * a[k] * a[j] * a[l];
    }
  }
  return out;
}

}  // namespace hcadapt
