#include "hcadapt/chaos.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "hcadapt/error.hpp"

namespace hcadapt {

MultiIndex::MultiIndex(std::vector<int> exponents) : exps_(std::move(exponents)) {
  for (int a : exps_) {
    if (a < 0) throw InvalidArgument("multi-index entries must be non-negative");
    order_ += a;
  }
}

MultiIndex MultiIndex::unit(std::size_t d, std::size_t i, int n) {
  if (i >= d) throw DimensionMismatch("unit multi-index position out of range");
  std::vector<int> e(d, 0);
  e[i] = n;
  return MultiIndex(std::move(e));
}

std::uint64_t MultiIndex::factorial() const {
  std::uint64_t f = 1;
  for (int a : exps_) f *= hcadapt::factorial(a);
  return f;
}

MultiIndex MultiIndex::embedded(std::size_t d) const {
  if (d < exps_.size()) throw DimensionMismatch("cannot embed multi-index into a smaller dimension");
  std::vector<int> e(exps_);
  e.resize(d, 0);
  return MultiIndex(std::move(e));
}

std::string MultiIndex::label() const {
  std::string s;
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(exps_[i]);
  }
  return s;
}

std::ostream& operator<<(std::ostream& os, const MultiIndex& a) { return os << '(' << a.label() << ')'; }

std::uint64_t factorial(int n) {
  if (n < 0 || n > 20) throw InvalidArgument("factorial argument out of range");
  std::uint64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
  return f;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    const std::uint64_t g = std::gcd(r, i);
    const std::uint64_t rr = r / g;
    const std::uint64_t den = i / g;
    if (rr > std::numeric_limits<std::uint64_t>::max() / num) throw InvalidArgument("binomial overflow");
    r = rr * num / den;
  }
  return r;
}

namespace {

// Appends every composition of `remaining` into exps[pos..] in descending
// lexicographic order.
void enumerate_grade(std::vector<int>& exps, std::size_t pos, int remaining,
                     std::vector<MultiIndex>& out) {
  if (pos + 1 == exps.size()) {
    exps[pos] = remaining;
    out.emplace_back(exps);
    return;
  }
  for (int v = remaining; v >= 0; --v) {
    exps[pos] = v;
    enumerate_grade(exps, pos + 1, remaining - v, out);
  }
  exps[pos] = 0;
}

}  // namespace

IndexSet::IndexSet(std::size_t d, int p) : d_(d), p_(p) {
  if (d == 0) throw InvalidArgument("index set dimension must be positive");
  if (p < 0 || p > kMaxOrder) throw InvalidArgument("index set order must lie in [0, 10]");

  compositions_.assign(static_cast<std::size_t>(p) + 1, std::vector<std::uint64_t>(d + 1, 0));
  for (int r = 0; r <= p; ++r) {
    compositions_[static_cast<std::size_t>(r)][0] = (r == 0) ? 1 : 0;
    for (std::size_t m = 1; m <= d; ++m)
      compositions_[static_cast<std::size_t>(r)][m] = binomial(static_cast<std::uint64_t>(r) + m - 1, m - 1);
  }

  block_offsets_.push_back(0);
  std::vector<int> exps(d, 0);
  for (int n = 0; n <= p; ++n) {
    enumerate_grade(exps, 0, n, indices_);
    block_offsets_.push_back(indices_.size());
  }
}

std::size_t IndexSet::rank_in_grade(std::span<const int> exps, int n) const {
  std::size_t rank = 0;
  int remaining = n;
  for (std::size_t i = 0; i + 1 < d_; ++i) {
    const std::size_t tail = d_ - i - 1;
    // Entries whose i-th component exceeds exps[i] come first.
    for (int v = remaining; v > exps[i]; --v)
      rank += compositions_[static_cast<std::size_t>(remaining - v)][tail];
    remaining -= exps[i];
  }
  return rank;
}

std::size_t IndexSet::position(std::span<const int> exps) const {
  int n = 0;
  for (int a : exps) n += a;
  if (exps.size() != d_ || n > p_) throw InvalidArgument("multi-index not in index set");
  return block_offsets_[static_cast<std::size_t>(n)] + rank_in_grade(exps, n);
}

std::size_t IndexSet::position(const MultiIndex& alpha) const {
  if (alpha.dim() != d_) throw DimensionMismatch("multi-index dimension does not match index set");
  return position(alpha.exponents());
}

bool IndexSet::contains(const MultiIndex& alpha) const {
  return alpha.dim() == d_ && alpha.order() <= p_;
}

std::shared_ptr<const IndexSet> build_index_set(std::size_t d, int p, std::size_t budget) {
  if (d == 0) throw InvalidArgument("index set dimension must be positive");
  if (p < 0 || p > kMaxOrder) throw InvalidArgument("index set order must lie in [0, 10]");
  const std::uint64_t card = binomial(d + static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(p));
  if (card > budget / d) throw InvalidArgument("index set exceeds the configured memory bound");
  return std::make_shared<const IndexSet>(d, p);
}

double hermite(int n, double x) {
  if (n < 0) throw InvalidArgument("Hermite degree must be non-negative");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double psi(const MultiIndex& alpha, std::span<const double> xi) {
  if (xi.size() != alpha.dim()) throw DimensionMismatch("psi: sample length differs from multi-index dimension");
  double v = 1.0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    if (alpha[i] != 0) v *= hermite(alpha[i], xi[i]);
  return v / std::sqrt(static_cast<double>(alpha.factorial()));
}

NormalizedHermiteTable::NormalizedHermiteTable(std::span<const double> xi, int p)
    : table_(static_cast<Eigen::Index>(xi.size()), p + 1) {
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double prev = 1.0;
    double cur = xi[i];
    table_(r, 0) = 1.0;
    if (p >= 1) table_(r, 1) = cur;
    for (int k = 1; k < p; ++k) {
      const double next = xi[i] * cur - k * prev;
      prev = cur;
      cur = next;
      table_(r, k + 1) = cur;
    }
    double f = 1.0;
    for (int k = 2; k <= p; ++k) {
      f *= k;
      table_(r, k) /= std::sqrt(f);
    }
  }
}

double NormalizedHermiteTable::psi(const MultiIndex& alpha) const {
  double v = 1.0;
  for (std::size_t i = 0; i < alpha.dim(); ++i)
    if (alpha[i] != 0) v *= (*this)(i, alpha[i]);
  return v;
}

Eigen::VectorXd evaluate_basis(const IndexSet& set, std::span<const double> xi) {
  if (xi.size() != set.dim()) throw DimensionMismatch("sample length differs from expansion dimension");
  const NormalizedHermiteTable table(xi, set.max_order());
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) out[static_cast<Eigen::Index>(k)] = table.psi(set[k]);
  return out;
}

ChaosExpansion::ChaosExpansion(std::shared_ptr<const IndexSet> set, Eigen::MatrixXd coeffs, SpatialGrid grid)
    : set_(std::move(set)), coeffs_(std::move(coeffs)), grid_(grid) {
  if (!set_) throw InvalidArgument("expansion requires an index set");
  if (static_cast<std::size_t>(coeffs_.cols()) != set_->size())
    throw DimensionMismatch("coefficient matrix must have one column per index-set entry");
  if (static_cast<std::size_t>(coeffs_.rows()) != grid_.size())
    throw DimensionMismatch("coefficient matrix must have one row per grid point");
}

double ChaosExpansion::coeff(std::size_t point, const MultiIndex& alpha) const {
  if (point >= num_points()) throw InvalidArgument("grid point index out of range");
  return coeffs_(static_cast<Eigen::Index>(point), static_cast<Eigen::Index>(set_->position(alpha)));
}

double eval_expansion(const ChaosExpansion& e, std::span<const double> xi, std::size_t point) {
  if (point >= e.num_points()) throw InvalidArgument("grid point index out of range");
  const Eigen::VectorXd basis = evaluate_basis(e.index_set(), xi);
  return e.coeffs().row(static_cast<Eigen::Index>(point)).dot(basis);
}

Moments moments(const ChaosExpansion& e, std::size_t point) {
  if (point >= e.num_points()) throw InvalidArgument("grid point index out of range");
  const auto row = e.coeffs().row(static_cast<Eigen::Index>(point));
  const double mean = row[0];
  const double var = row.tail(row.size() - 1).squaredNorm();
  return {mean, var};
}

void write_expansion(std::ostream& os, const ChaosExpansion& e) {
  nlohmann::json header{{"format", "hcadapt-expansion"},
                        {"version", 1},
                        {"d", e.dim()},
                        {"p", e.index_set().max_order()},
                        {"ordering", "graded-lex"},
                        {"terms", e.index_set().size()},
                        {"grid", {{"nx", e.grid().nx()},
                                  {"ny", e.grid().ny()},
                                  {"length_x", e.grid().length_x()},
                                  {"length_y", e.grid().length_y()}}}};
  os << header.dump() << '\n';
  os << std::setprecision(17);
  const auto& c = e.coeffs();
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      if (k) os << ',';
      os << c(r, k);
    }
    os << '\n';
  }
}

ChaosExpansion read_expansion(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("expansion file is empty");
  const auto header = nlohmann::json::parse(line);
  if (header.value("ordering", "") != "graded-lex") throw InvalidArgument("unsupported index ordering");
  const auto d = header.at("d").get<std::size_t>();
  const int p = header.at("p").get<int>();
  const auto& g = header.at("grid");
  const SpatialGrid grid(g.at("length_x").get<double>(), g.at("length_y").get<double>(),
                         g.at("nx").get<std::size_t>(), g.at("ny").get<std::size_t>());
  auto set = build_index_set(d, p);
  Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(set->size()));
  for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
    if (!std::getline(is, line)) throw InvalidArgument("expansion file truncated");
    std::istringstream row(line);
    std::string cell;
    for (Eigen::Index k = 0; k < coeffs.cols(); ++k) {
      if (!std::getline(row, cell, ',')) throw InvalidArgument("expansion row has too few values");
      coeffs(r, k) = std::stod(cell);
    }
  }
  return ChaosExpansion(std::move(set), std::move(coeffs), grid);
}

void save_expansion(const std::string& path, const ChaosExpansion& e) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_expansion(os, e);
}

ChaosExpansion load_expansion(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_expansion(is);
}

}  // namespace hcadapt
