#include "hcadapt/estimation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>

#include "json.hpp"

#include "hcadapt/error.hpp"
#include "hcadapt/parallel.hpp"

namespace hcadapt {

void SampleStore::validate() const {
  if (inputs.rows() != outputs.rows()) throw DimensionMismatch("sample store row counts differ");
  if (static_cast<std::size_t>(outputs.cols()) != grid.size())
    throw DimensionMismatch("sample store outputs must have one column per grid point");
}

namespace {

static_assert(std::endian::native == std::endian::little, "sample store I/O assumes little-endian doubles");

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!is) throw InvalidArgument("sample store truncated");
  return rm;
}

}  // namespace

void write_sample_store(std::ostream& os, const SampleStore& s) {
  s.validate();
  nlohmann::json header{{"format", "hcadapt-samples"},
                        {"version", 1},
                        {"rows", s.inputs.rows()},
                        {"d", s.inputs.cols()},
                        {"points", s.outputs.cols()},
                        {"seed", s.seed},
                        {"grid", {{"nx", s.grid.nx()},
                                  {"ny", s.grid.ny()},
                                  {"length_x", s.grid.length_x()},
                                  {"length_y", s.grid.length_y()}}}};
  os << header.dump() << '\n';
  write_matrix(os, s.inputs);
  write_matrix(os, s.outputs);
}

SampleStore read_sample_store(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("sample store is empty");
  const auto h = nlohmann::json::parse(line);
  const auto& g = h.at("grid");
  SampleStore s;
  s.grid = SpatialGrid(g.at("length_x").get<double>(), g.at("length_y").get<double>(), g.at("nx").get<std::size_t>(),
                       g.at("ny").get<std::size_t>());
  s.seed = h.at("seed").get<std::uint64_t>();
  const auto rows = h.at("rows").get<Eigen::Index>();
  s.inputs = read_matrix(is, rows, h.at("d").get<Eigen::Index>());
  s.outputs = read_matrix(is, rows, h.at("points").get<Eigen::Index>());
  s.validate();
  return s;
}

FitResult fit_coefficients(const SampleStore& store, std::shared_ptr<const IndexSet> set) {
  store.validate();
  if (static_cast<std::size_t>(store.inputs.cols()) != set->dim())
    throw DimensionMismatch("sample inputs do not match the index-set dimension");
  const std::size_t n = store.size();
  if (n == 0) throw InvalidArgument("cannot fit coefficients from an empty sample store");
  const auto terms = static_cast<Eigen::Index>(set->size());
  const auto points = store.outputs.cols();

  // Fixed chunk boundaries and a fixed-order reduction keep the result
  // independent of the thread count.
  constexpr std::size_t kChunk = 2048;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Eigen::MatrixXd> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(n, lo + kChunk);
    const auto rows = static_cast<Eigen::Index>(hi - lo);
    Eigen::MatrixXd basis(rows, terms);
    std::vector<double> xi(set->dim());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto src = store.inputs.row(static_cast<Eigen::Index>(lo) + r);
      for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = src[static_cast<Eigen::Index>(i)];
      basis.row(r) = evaluate_basis(*set, xi).transpose();
    }
    partial[c] = store.outputs.middleRows(static_cast<Eigen::Index>(lo), rows).transpose() * basis;
  });
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(points, terms);
  for (const auto& p : partial) coeffs += p;
  coeffs /= static_cast<double>(n);
  const bool under = n < 10 * set->size();
  return {ChaosExpansion(std::move(set), std::move(coeffs), store.grid), under};
}

double DensityEstimate::at(double t) const {
  if (x.empty() || t < x.front() || t > x.back()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), t);
  if (it == x.end()) return density.back();
  const auto k = static_cast<std::size_t>(it - x.begin());
  if (k == 0) return density.front();
  const double f = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return density[k - 1] + f * (density[k] - density[k - 1]);
}

double DensityEstimate::integral() const {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (density[i] + density[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw InvalidArgument("bandwidth needs at least two samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

DensityEstimate kde_on(std::span<const double> samples, std::span<const double> abscissae, double bandwidth) {
  if (samples.size() < 100) throw InvalidArgument("kde needs at least 100 samples");
  if (!(bandwidth > 0.0)) throw InvalidArgument("kde bandwidth must be positive");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  DensityEstimate out;
  out.x.assign(abscissae.begin(), abscissae.end());
  out.density.assign(out.x.size(), 0.0);
  out.bandwidth = bandwidth;
  out.samples = s.size();
  const double norm = 1.0 / (static_cast<double>(s.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  // Kernel contributions beyond 9 bandwidths are below 3e-18 and skipped.
  const double cutoff = 9.0 * bandwidth;
  parallel_for(out.x.size(), [&](std::size_t i) {
    const double t = out.x[i];
    const auto lo = std::lower_bound(s.begin(), s.end(), t - cutoff);
    const auto hi = std::upper_bound(lo, s.end(), t + cutoff);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (t - *it) / bandwidth;
      acc += std::exp(-0.5 * z * z);
    }
    out.density[i] = acc * norm;
  });
  return out;
}

DensityEstimate kde(std::span<const double> samples, const KdeSettings& settings) {
  if (samples.size() < 100) throw InvalidArgument("kde needs at least 100 samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (!(*mx > *mn)) throw InvalidArgument("kde rejects samples with zero variance");
  const double h = settings.bandwidth > 0.0 ? settings.bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) throw InvalidArgument("kde rejects samples with zero variance");
  if (settings.points < 2) throw InvalidArgument("kde needs at least two abscissae");
  const double lo = *mn - settings.margin * h;
  const double hi = *mx + settings.margin * h;
  std::vector<double> x(settings.points);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(x.size() - 1);
  return kde_on(samples, x, h);
}

DensityDistance density_distance(const DensityEstimate& p, const DensityEstimate& q) {
  if (p.x.size() < 2 || q.x.size() < 2) throw InvalidArgument("density_distance needs tabulated densities");
  if (p.x.back() <= q.x.front() || q.x.back() <= p.x.front())
    throw InvalidArgument("density_distance: supports are disjoint");
  const double lo = std::min(p.x.front(), q.x.front());
  const double hi = std::max(p.x.back(), q.x.back());
  const double step = std::min((p.x.back() - p.x.front()) / static_cast<double>(p.x.size() - 1),
                               (q.x.back() - q.x.front()) / static_cast<double>(q.x.size() - 1));
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  const std::size_t m = std::clamp<std::size_t>(n, 2 * std::max(p.x.size(), q.x.size()), 1u << 20);
  double l1 = 0.0;
  double h2 = 0.0;
  double prev_l1 = 0.0;
  double prev_h2 = 0.0;
  const double dx = (hi - lo) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const double t = lo + dx * static_cast<double>(i);
    const double a = p.at(t);
    const double b = q.at(t);
    const double cur_l1 = std::abs(a - b);
    const double r = std::sqrt(a) - std::sqrt(b);
    const double cur_h2 = r * r;
    if (i > 0) {
      l1 += 0.5 * (cur_l1 + prev_l1) * dx;
      h2 += 0.5 * (cur_h2 + prev_h2) * dx;
    }
    prev_l1 = cur_l1;
    prev_h2 = cur_h2;
  }
  return {l1, std::sqrt(0.5 * h2)};
}

void write_density_csv(std::ostream& os, const std::vector<std::string>& names,
                       const std::vector<const DensityEstimate*>& curves) {
  if (names.size() != curves.size()) throw DimensionMismatch("one name per density curve required");
  os << "curve,x,density\n" << std::setprecision(12);
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t i = 0; i < curves[c]->x.size(); ++i)
      os << names[c] << ',' << curves[c]->x[i] << ',' << curves[c]->density[i] << '\n';
}

double ks_statistic_normal(std::span<const double> samples) {
  std::vector<double> s(samples.begin(), samples.end());
  if (s.empty()) throw InvalidArgument("KS statistic needs samples");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-s[i] / std::numbers::sqrt2);
    dmax = std::max({dmax, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return dmax;
}

}  // namespace hcadapt
