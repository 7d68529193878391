#include "hcadapt/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "json.hpp"

#include "hcadapt/error.hpp"
#include "hcadapt/parallel.hpp"

namespace hcadapt {

std::string to_string(AdaptationScheme s) {
  switch (s) {
    case AdaptationScheme::gaussian: return "gaussian";
    case AdaptationScheme::quadratic: return "quadratic";
    case AdaptationScheme::custom: return "custom";
  }
  return "custom";
}

AdaptationScheme parse_scheme(const std::string& s) {
  if (s == "gaussian") return AdaptationScheme::gaussian;
  if (s == "quadratic") return AdaptationScheme::quadratic;
  if (s == "custom") return AdaptationScheme::custom;
  throw InvalidArgument("unknown adaptation scheme '" + s + "'");
}

IsometryField::IsometryField(SpatialGrid grid, std::size_t rows_retained, std::vector<Eigen::MatrixXd> matrices,
                             AdaptationScheme scheme)
    : grid_(grid), d_(0), n_(rows_retained), matrices_(std::move(matrices)), scheme_(scheme) {
  if (matrices_.size() != grid_.size()) throw DimensionMismatch("one isometry per grid point required");
  d_ = static_cast<std::size_t>(matrices_.front().rows());
  if (n_ == 0 || n_ > d_) throw InvalidArgument("retained rows must lie in [1, d]");
  for (std::size_t p = 0; p < matrices_.size(); ++p) {
    const auto& m = matrices_[p];
    if (static_cast<std::size_t>(m.rows()) != d_ || static_cast<std::size_t>(m.cols()) != d_)
      throw DimensionMismatch("isometry field matrices must all be d x d");
    if (!(orthogonality_defect(m) <= kIsometryTolerance))
      throw InvalidArgument("isometry at grid point " + std::to_string(p) + " is not orthogonal");
  }
}

Eigen::MatrixXd IsometryField::sample_eta(std::span<const double> xi) const {
  if (xi.size() != d_) throw DimensionMismatch("sample length differs from isometry dimension");
  const Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<Eigen::Index>(xi.size()));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(num_points()), static_cast<Eigen::Index>(n_));
  for (std::size_t p = 0; p < num_points(); ++p)
    out.row(static_cast<Eigen::Index>(p)) = (matrices_[p].topRows(static_cast<Eigen::Index>(n_)) * x).transpose();
  return out;
}

void write_isometry_field(std::ostream& os, const IsometryField& f) {
  nlohmann::json header{{"format", "hcadapt-isometry-field"},
                        {"version", 1},
                        {"d", f.dim()},
                        {"n", f.rows_retained()},
                        {"scheme", to_string(f.scheme())},
                        {"grid", {{"nx", f.grid().nx()},
                                  {"ny", f.grid().ny()},
                                  {"length_x", f.grid().length_x()},
                                  {"length_y", f.grid().length_y()}}}};
  os << header.dump() << '\n' << std::setprecision(17);
  for (std::size_t p = 0; p < f.num_points(); ++p) {
    const auto& m = f.matrix(p);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) os << ',';
        os << m(r, c);
      }
      os << '\n';
    }
  }
}

IsometryField read_isometry_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("isometry field file is empty");
  const auto header = nlohmann::json::parse(line);
  const auto d = header.at("d").get<std::size_t>();
  const auto n = header.at("n").get<std::size_t>();
  const auto& g = header.at("grid");
  const SpatialGrid grid(g.at("length_x").get<double>(), g.at("length_y").get<double>(),
                         g.at("nx").get<std::size_t>(), g.at("ny").get<std::size_t>());
  std::vector<Eigen::MatrixXd> mats(grid.size(), Eigen::MatrixXd(d, d));
  for (auto& m : mats) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!std::getline(is, line)) throw InvalidArgument("isometry field file truncated");
      std::istringstream row(line);
      std::string cell;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (!std::getline(row, cell, ',')) throw InvalidArgument("isometry row has too few values");
        m(r, c) = std::stod(cell);
      }
    }
  }
  return IsometryField(grid, n, std::move(mats), parse_scheme(header.at("scheme").get<std::string>()));
}

Eigen::MatrixXd complete_isometry(const Eigen::MatrixXd& rows) {
  const Eigen::Index k = rows.rows();
  const Eigen::Index d = rows.cols();
  if (k == 0 || k > d) throw InvalidArgument("complete_isometry: need between 1 and d rows");
  const Eigen::MatrixXd gram = rows * rows.transpose();
  if ((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > kIsometryTolerance)
    throw InvalidArgument("complete_isometry: supplied rows are not orthonormal (rank deficient)");

  Eigen::MatrixXd a(d, d);
  a.topRows(k) = rows;
  Eigen::Index filled = k;
  for (Eigen::Index j = 0; j < d && filled < d; ++j) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(d, j);
    // Two passes of classical Gram-Schmidt keep the result orthogonal to
    // machine precision even for nearly dependent candidates.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd proj = a.topRows(filled) * v.transpose();
      v -= proj.transpose() * a.topRows(filled);
    }
    const double norm = v.norm();
    if (norm < 1e-8) continue;
    a.row(filled++) = v / norm;
  }
  if (filled < d) throw ConvergenceFailure("complete_isometry: could not complete the basis");
  return a;
}

Eigen::MatrixXd gaussian_isometry(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                  std::size_t point) {
  if (set.max_order() < 1) throw InvalidArgument("Gaussian adaptation requires first-order terms");
  const auto d = static_cast<Eigen::Index>(set.dim());
  const Eigen::RowVectorXd first = w.segment(static_cast<Eigen::Index>(set.block_begin(1)), d);
  const double norm = first.norm();
  if (norm < 1e-14)
    throw DegenerateGaussianPart("first-order coefficients vanish at grid point " + std::to_string(point), point);
  return complete_isometry(first / norm);
}

Eigen::MatrixXd quadratic_form(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w) {
  if (set.max_order() < 2) throw InvalidArgument("quadratic adaptation requires second-order terms");
  const std::size_t d = set.dim();
  Eigen::MatrixXd s(d, d);
  std::vector<int> e(d, 0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      ++e[i];
      ++e[j];
      const double u = w[static_cast<Eigen::Index>(set.position(e))];
      --e[i];
      --e[j];
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      if (i == j) {
        s(ii, ii) = u / std::sqrt(2.0);
      } else {
        s(ii, jj) = u / 2.0;
        s(jj, ii) = u / 2.0;
      }
    }
  }
  return s;
}

QuadraticIsometry quadratic_isometry(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success) throw ConvergenceFailure("eigendecomposition of S did not converge");
  const Eigen::Index d = s.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& lam = eig.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(lam[a]) > std::abs(lam[b]); });
  QuadraticIsometry out{Eigen::MatrixXd(d, d), Eigen::VectorXd(d)};
  for (Eigen::Index r = 0; r < d; ++r) {
    const Eigen::Index src = order[static_cast<std::size_t>(r)];
    Eigen::RowVectorXd v = eig.eigenvectors().col(src).transpose();
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v[big] < 0) v = -v;
    out.a.row(r) = v;
    out.eigenvalues[r] = lam[src];
  }
  return out;
}

IsometryField gaussian_adaptation(const ChaosExpansion& e) {
  std::vector<Eigen::MatrixXd> mats(e.num_points());
  parallel_for(e.num_points(), [&](std::size_t p) {
    mats[p] = gaussian_isometry(e.index_set(), e.coeffs().row(static_cast<Eigen::Index>(p)), p);
  });
  return IsometryField(e.grid(), 1, std::move(mats), AdaptationScheme::gaussian);
}

IsometryField quadratic_adaptation(const ChaosExpansion& e, std::size_t n) {
  if (n == 0 || n > e.dim()) throw InvalidArgument("quadratic adaptation dimension must lie in [1, d]");
  std::vector<Eigen::MatrixXd> mats(e.num_points());
  std::vector<Eigen::VectorXd> spectra(e.num_points());
  parallel_for(e.num_points(), [&](std::size_t p) {
    auto q = quadratic_isometry(quadratic_form(e.index_set(), e.coeffs().row(static_cast<Eigen::Index>(p))));
    mats[p] = std::move(q.a);
    spectra[p] = std::move(q.eigenvalues);
  });
  IsometryField field(e.grid(), n, std::move(mats), AdaptationScheme::quadratic);
  field.set_spectra(std::move(spectra));
  return field;
}

AdaptedExpansion::AdaptedExpansion(std::shared_ptr<const IndexSet> retained, Eigen::MatrixXd coeffs,
                                   SpatialGrid grid, std::size_t base_dim)
    : retained_(std::move(retained)), coeffs_(std::move(coeffs)), grid_(grid), base_dim_(base_dim) {
  if (!retained_) throw InvalidArgument("adapted expansion requires a retained index set");
  if (retained_->dim() > base_dim_) throw DimensionMismatch("retained set has more variables than the base");
  if (static_cast<std::size_t>(coeffs_.cols()) != retained_->size() ||
      static_cast<std::size_t>(coeffs_.rows()) != grid_.size())
    throw DimensionMismatch("adapted coefficient matrix has the wrong shape");
}

double AdaptedExpansion::eval_eta(std::size_t point, std::span<const double> eta) const {
  if (point >= num_points()) throw InvalidArgument("grid point index out of range");
  return coeffs_.row(static_cast<Eigen::Index>(point)).dot(evaluate_basis(*retained_, eta));
}

double AdaptedExpansion::eval(const IsometryField& field, std::size_t point, std::span<const double> xi) const {
  if (xi.size() != base_dim_) throw DimensionMismatch("sample length differs from base dimension");
  const auto n = static_cast<Eigen::Index>(retained_->dim());
  const Eigen::VectorXd eta =
      field.matrix(point).topRows(n) * Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<Eigen::Index>(xi.size()));
  return eval_eta(point, std::span<const double>(eta.data(), static_cast<std::size_t>(eta.size())));
}

ChaosExpansion AdaptedExpansion::as_expansion() const { return ChaosExpansion(retained_, coeffs_, grid_); }

AdaptedExpansion project(const ChaosExpansion& e, const IsometryField& field, std::shared_ptr<const IndexSet> retained) {
  if (!retained) throw InvalidArgument("project: retained set required");
  if (field.dim() != e.dim() || field.num_points() != e.num_points())
    throw DimensionMismatch("project: isometry field does not match the expansion");
  if (retained->dim() > e.dim() || retained->max_order() > e.index_set().max_order())
    throw InvalidArgument("project: retained set is not a subset of J_p");
  const auto targets = embed_index_set(*retained, e.dim());
  Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(e.num_points()), static_cast<Eigen::Index>(targets.size()));
  parallel_for(e.num_points(), [&](std::size_t p) {
    const RotationPlan plan(e.index_set(), field.isometry(p), targets);
    coeffs.row(static_cast<Eigen::Index>(p)) = plan.apply(e.coeffs().row(static_cast<Eigen::Index>(p))).transpose();
  });
  return AdaptedExpansion(std::move(retained), std::move(coeffs), e.grid(), e.dim());
}

ProjectionError projection_error(const IndexSet& set, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                                 const Isometry& a, std::span<const MultiIndex> retained) {
  const RotationPlan plan(set, a, retained);
  Eigen::VectorXd err = w.transpose() - plan.reconstruct(w);
  const double norm = err.norm();
  return {std::move(err), norm};
}

double global_error_norm(const ChaosExpansion& e, const IsometryField& field, std::span<const MultiIndex> retained) {
  if (field.num_points() != e.num_points()) throw DimensionMismatch("global_error_norm: field/expansion mismatch");
  std::vector<double> local(e.num_points());
  parallel_for(e.num_points(), [&](std::size_t p) {
    local[p] = projection_error(e.index_set(), e.coeffs().row(static_cast<Eigen::Index>(p)), field.isometry(p),
                                retained).norm;
  });
  double sum = 0.0;
  for (double v : local) sum += v * v;
  return std::sqrt(sum * e.grid().cell_area());
}

std::size_t EtaKernel::rank(double rel_tol) const {
  if (eigenvalues.size() == 0) return 0;
  const double cut = rel_tol * eigenvalues[0];
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] > cut) ++r;
  return r;
}

namespace {

Eigen::MatrixXd row_vectors(const IsometryField& field, std::size_t row) {
  if (row >= field.dim()) throw InvalidArgument("eta_kernel: row out of range");
  Eigen::MatrixXd r(static_cast<Eigen::Index>(field.num_points()), static_cast<Eigen::Index>(field.dim()));
  for (std::size_t p = 0; p < field.num_points(); ++p)
    r.row(static_cast<Eigen::Index>(p)) = field.matrix(p).row(static_cast<Eigen::Index>(row));
  return r;
}

}  // namespace

EtaKernel eta_kernel(const IsometryField& field, std::size_t row) {
  const Eigen::MatrixXd r = row_vectors(field, row);
  const double w = field.grid().cell_area();
  EtaKernel out;
  out.row = row;
  out.values = r * r.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * out.values);
  if (eig.info() != Eigen::Success) throw ConvergenceFailure("eta kernel eigendecomposition did not converge");
  out.eigenvalues = eig.eigenvalues().reverse();
  out.eigenfunctions = eig.eigenvectors().rowwise().reverse() / std::sqrt(w);
  for (Eigen::Index c = 0; c < out.eigenfunctions.cols(); ++c) {
    Eigen::Index big = 0;
    out.eigenfunctions.col(c).cwiseAbs().maxCoeff(&big);
    if (out.eigenfunctions(big, c) < 0) out.eigenfunctions.col(c) *= -1.0;
  }
  out.hs_norm = w * w * out.values.squaredNorm();
  const Eigen::VectorXd l2sq = w * r.colwise().squaredNorm().transpose();
  out.hs_bound = l2sq.sum() * l2sq.sum();
  return out;
}

Eigen::VectorXd eta_kernel_spectrum_reduced(const IsometryField& field, std::size_t row) {
  const Eigen::MatrixXd r = row_vectors(field, row);
  const Eigen::MatrixXd m = field.grid().cell_area() * (r.transpose() * r);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  return eig.eigenvalues().reverse();
}

}  // namespace hcadapt
