#include "hcadapt/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hcadapt/error.hpp"
#include "hcadapt/geometric.hpp"
#include "hcadapt/parallel.hpp"

namespace hcadapt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json to_json(const PipelineConfig& c) {
  json probes = json::array();
  for (const auto& p : c.pdf.probes) probes.push_back({p[0], p[1]});
  return json{
      {"experiment", c.experiment},
      {"seed", c.seed},
      {"threads", c.threads},
      {"output_dir", c.output_dir.string()},
      {"grid", {{"length_x", c.length_x}, {"length_y", c.length_y}, {"nx", c.nx}, {"ny", c.ny}}},
      {"kernel",
       {{"variance", c.field.variance},
        {"length_x", c.field.length_x},
        {"length_y", c.field.length_y},
        {"mean", c.field.mean}}},
      {"energy_fraction", c.energy_fraction},
      {"modes", c.modes},
      {"source",
       {{"amplitude", c.source.amplitude},
        {"source", c.source.source_center},
        {"sink", c.source.sink_center},
        {"width", c.source.width}}},
      {"solver", {{"tolerance", c.solver.tolerance}, {"max_iterations", c.solver.max_iterations}}},
      {"order", c.order},
      {"samples", c.samples},
      {"adaptation",
       {{"scheme", to_string(c.adaptation.scheme)},
        {"dim", c.adaptation.dim},
        {"order", c.adaptation.order},
        {"compare_gaussian", c.adaptation.compare_gaussian}}},
      {"pdf", {{"samples", c.pdf.samples}, {"probes", probes}}},
      {"velocity_samples", c.velocity_samples},
      {"geometric", {{"x", c.geometric.x}, {"d", c.geometric.d}, {"samples", c.geometric.samples}}},
      {"random_coeffs",
       {{"adapted", c.random_coeffs.adapted},
        {"scheme", to_string(c.random_coeffs.scheme)},
        {"order", c.random_coeffs.order},
        {"expectation_samples", c.random_coeffs.expectation_samples},
        {"pdf_samples", c.random_coeffs.pdf_samples}}},
  };
}

// Overwrites defaults with the user's values; any key absent from the
// defaults is an error.
void overlay(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw InvalidArgument("config: '" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw InvalidArgument("config: unknown key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object())
      overlay(slot, it.value(), key);
    else
      slot = it.value();
  }
}

PipelineConfig from_json(const json& j) {
  PipelineConfig c;
  try {
    c.experiment = j.at("experiment").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<unsigned>();
    c.output_dir = j.at("output_dir").get<std::string>();
    const auto& g = j.at("grid");
    c.length_x = g.at("length_x").get<double>();
    c.length_y = g.at("length_y").get<double>();
    c.nx = g.at("nx").get<std::size_t>();
    c.ny = g.at("ny").get<std::size_t>();
    const auto& k = j.at("kernel");
    c.field = {k.at("variance").get<double>(), k.at("length_x").get<double>(), k.at("length_y").get<double>(),
               k.at("mean").get<double>()};
    c.energy_fraction = j.at("energy_fraction").get<double>();
    c.modes = j.at("modes").get<std::size_t>();
    const auto& s = j.at("source");
    c.source.amplitude = s.at("amplitude").get<double>();
    c.source.source_center = s.at("source").get<std::array<double, 2>>();
    c.source.sink_center = s.at("sink").get<std::array<double, 2>>();
    c.source.width = s.at("width").get<std::array<double, 2>>();
    c.solver.tolerance = j.at("solver").at("tolerance").get<double>();
    c.solver.max_iterations = j.at("solver").at("max_iterations").get<int>();
    c.order = j.at("order").get<int>();
    c.samples = j.at("samples").get<std::size_t>();
    const auto& a = j.at("adaptation");
    c.adaptation.scheme = parse_scheme(a.at("scheme").get<std::string>());
    c.adaptation.dim = a.at("dim").get<std::size_t>();
    c.adaptation.order = a.at("order").get<int>();
    c.adaptation.compare_gaussian = a.at("compare_gaussian").get<bool>();
    c.pdf.samples = j.at("pdf").at("samples").get<std::size_t>();
    for (const auto& p : j.at("pdf").at("probes")) c.pdf.probes.push_back(p.get<std::array<std::size_t, 2>>());
    c.velocity_samples = j.at("velocity_samples").get<std::size_t>();
    const auto& geo = j.at("geometric");
    c.geometric.x = geo.at("x").get<std::vector<double>>();
    c.geometric.d = geo.at("d").get<std::vector<std::size_t>>();
    c.geometric.samples = geo.at("samples").get<std::size_t>();
    const auto& rc = j.at("random_coeffs");
    c.random_coeffs.adapted = rc.at("adapted").get<std::size_t>();
    c.random_coeffs.scheme = parse_scheme(rc.at("scheme").get<std::string>());
    c.random_coeffs.order = rc.at("order").get<int>();
    c.random_coeffs.expectation_samples = rc.at("expectation_samples").get<std::size_t>();
    c.random_coeffs.pdf_samples = rc.at("pdf_samples").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument("config: " + msg);
}

}  // namespace

void PipelineConfig::validate() const {
  require(experiment == "elliptic" || experiment == "geometric" || experiment == "random-coeffs",
          "experiment must be elliptic, geometric or random-coeffs");
  require(length_x > 0 && length_y > 0, "grid lengths must be positive");
  require(nx >= 1 && ny >= 1, "grid needs at least one cell per axis");
  require(field.variance > 0, "kernel.variance must be positive");
  require(field.length_x > 0 && field.length_y > 0, "kernel lengths must be positive");
  require(energy_fraction > 0 && energy_fraction <= 1, "energy_fraction must lie in (0, 1]");
  require(modes <= nx * ny, "modes exceeds the number of grid cells");
  require(source.width[0] > 0 && source.width[1] > 0, "source.width must be positive");
  require(solver.tolerance > 0 && solver.max_iterations > 0, "solver settings must be positive");
  require(order >= 0 && order <= kMaxOrder, "order must lie in [0, 10]");
  require(samples >= 1, "samples must be positive");
  require(adaptation.scheme != AdaptationScheme::custom, "adaptation.scheme must be gaussian or quadratic");
  require(adaptation.scheme != AdaptationScheme::quadratic || order >= 2,
          "quadratic adaptation needs order >= 2");
  require(adaptation.scheme != AdaptationScheme::gaussian || order >= 1, "gaussian adaptation needs order >= 1");
  require(adaptation.dim >= 1, "adaptation.dim must be positive");
  require(adaptation.scheme != AdaptationScheme::gaussian || adaptation.dim == 1,
          "gaussian adaptation is one-dimensional");
  require(modes == 0 || adaptation.dim <= modes, "adaptation.dim exceeds the number of modes");
  require(adaptation.order >= 0 && adaptation.order <= order, "adaptation.order must lie in [0, order]");
  require(pdf.samples >= 100, "pdf.samples must be at least 100");
  for (const auto& p : pdf.probes) require(p[0] < nx && p[1] < ny, "probe outside the grid");
  for (double x : geometric.x) require(x >= 0 && x < 1, "geometric.x values must lie in [0, 1)");
  for (auto d : geometric.d) require(d >= 1, "geometric.d values must be positive");
  require(geometric.samples >= 100, "geometric.samples must be at least 100");
  require(random_coeffs.adapted >= 1, "random_coeffs.adapted must be positive");
  require(modes == 0 || random_coeffs.adapted <= modes, "random_coeffs.adapted exceeds the number of modes");
  require(random_coeffs.scheme != AdaptationScheme::custom, "random_coeffs.scheme must be gaussian or quadratic");
  require(random_coeffs.scheme != AdaptationScheme::quadratic || order >= 2,
          "quadratic adaptation needs order >= 2");
  require(random_coeffs.order >= 0 && random_coeffs.order <= order, "random_coeffs.order must lie in [0, order]");
  require(random_coeffs.expectation_samples >= 1, "random_coeffs.expectation_samples must be positive");
  require(random_coeffs.pdf_samples >= 100, "random_coeffs.pdf_samples must be at least 100");
}

PipelineConfig parse_config(const std::string& text) {
  json base = to_json(PipelineConfig{});
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  overlay(base, user, "");
  auto c = from_json(base);
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const PipelineConfig& c) { return to_json(c).dump(2); }

std::string config_hash(const PipelineConfig& c) {
  json j = to_json(c);
  // Where results go and how many workers produce them does not change them.
  j.erase("output_dir");
  j.erase("threads");
  return fnv1a(j.dump());
}

std::vector<std::size_t> probe_lattice(const SpatialGrid& grid) {
  std::vector<std::size_t> out;
  for (std::size_t l = 1; l <= 3; ++l)
    for (std::size_t k = 1; k <= 3; ++k) out.push_back(grid.cell(k * grid.nx() / 4, l * grid.ny() / 4));
  return out;
}

std::vector<std::size_t> probe_cells(const PipelineConfig& c) {
  const auto grid = c.grid();
  if (c.pdf.probes.empty()) return probe_lattice(grid);
  std::vector<std::size_t> out;
  for (const auto& p : c.pdf.probes) out.push_back(grid.cell(p[0], p[1]));
  return out;
}

SampleStore run_ensemble(const KLBasis& kl, const SourceSpec& source, const SolverSettings& solver, std::size_t n,
                         std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(kl.modes());
  SampleStore store;
  store.grid = kl.grid;
  store.seed = seed;
  store.inputs.resize(static_cast<Eigen::Index>(n), d);
  store.outputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kl.grid.size()));
  const Eigen::VectorXd g = assemble_source(source, kl.grid);
  parallel_for(n, [&](std::size_t k) {
    const auto xi = standard_normal_draw(seed, k, kl.modes());
    const EllipticProblem problem{kl.grid, sample_transmissivity(kl, xi), g, solver};
    const auto r = static_cast<Eigen::Index>(k);
    store.inputs.row(r) = Eigen::Map<const Eigen::RowVectorXd>(xi.data(), d);
    store.outputs.row(r) = solve_pressure(problem).pressure.transpose();
  });
  return store;
}

Eigen::MatrixXd sample_full(const ChaosExpansion& e, std::span<const std::size_t> probes, std::size_t n,
                            std::uint64_t seed) {
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(probes.size()), e.coeffs().cols());
  for (std::size_t k = 0; k < probes.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = e.coeffs().row(static_cast<Eigen::Index>(probes[k]));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(probes.size()));
  parallel_for(n, [&](std::size_t k) {
    const auto xi = standard_normal_draw(seed, k, e.dim());
    out.row(static_cast<Eigen::Index>(k)) = (sub * evaluate_basis(e.index_set(), xi)).transpose();
  });
  return out;
}

Eigen::MatrixXd sample_adapted(const AdaptedExpansion& a, const IsometryField& field,
                               std::span<const std::size_t> probes, std::size_t n, std::uint64_t seed) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(probes.size()));
  parallel_for(n, [&](std::size_t k) {
    const auto xi = standard_normal_draw(seed, k, a.base_dim());
    for (std::size_t p = 0; p < probes.size(); ++p)
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) = a.eval(field, probes[p], xi);
  });
  return out;
}

Eigen::MatrixXd sample_random_coeffs(const SplitExpansion& se, AdaptationScheme scheme, const IndexSet& retained,
                                     std::span<const std::size_t> probes, std::size_t n, std::uint64_t seed) {
  const std::size_t d = se.base_set().dim();
  const auto& split = se.split();
  const auto m = static_cast<Eigen::Index>(retained.dim());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(probes.size()));
  parallel_for(n, [&](std::size_t k) {
    const auto xi = standard_normal_draw(seed, k, d);
    Eigen::VectorXd xi_hat(static_cast<Eigen::Index>(split.adapted.size()));
    std::vector<double> zeta(split.parameters.size());
    for (std::size_t i = 0; i < split.adapted.size(); ++i) xi_hat[static_cast<Eigen::Index>(i)] = xi[split.adapted[i]];
    for (std::size_t i = 0; i < zeta.size(); ++i) zeta[i] = xi[split.parameters[i]];
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const auto ca = conditional_adapt(se, zeta, probes[p], scheme, retained);
      const Eigen::VectorXd eta = ca.a.topRows(m) * xi_hat;
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) =
          ca.coeffs.dot(evaluate_basis(retained, std::span<const double>(eta.data(), static_cast<std::size_t>(m))));
    }
  });
  return out;
}

ProbeComparison compare_columns(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& candidate) {
  if (reference.cols() != candidate.cols()) throw DimensionMismatch("compare_columns: column counts differ");
  ProbeComparison out;
  for (Eigen::Index c = 0; c < reference.cols(); ++c) {
    const Eigen::VectorXd r = reference.col(c);
    const Eigen::VectorXd s = candidate.col(c);
    out.reference.push_back(kde(std::span<const double>(r.data(), static_cast<std::size_t>(r.size()))));
    out.candidate.push_back(kde(std::span<const double>(s.data(), static_cast<std::size_t>(s.size()))));
    out.distance.push_back(density_distance(out.reference.back(), out.candidate.back()));
  }
  return out;
}

// --- elliptic pipeline --------------------------------------------------

EllipticPipeline::EllipticPipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  hash_ = config_hash(config_);
  fs::create_directories(config_.output_dir);
}

std::string EllipticPipeline::stage_key(const std::string& stage) const {
  const json all = to_json(config_);
  json k{{"version", kVersion}, {"grid", all["grid"]}, {"kernel", all["kernel"]},
         {"energy_fraction", all["energy_fraction"]}, {"modes", all["modes"]}};
  if (stage == "kl") return fnv1a(k.dump());
  k["source"] = all["source"];
  k["solver"] = all["solver"];
  k["samples"] = all["samples"];
  k["seed"] = all["seed"];
  if (stage == "ensemble") return fnv1a(k.dump());
  k["order"] = all["order"];
  if (stage == "fit") return fnv1a(k.dump());
  k["stage"] = stage;
  k["adaptation"] = all["adaptation"];
  k["pdf"] = all["pdf"];
  k["velocity_samples"] = all["velocity_samples"];
  return fnv1a(k.dump());
}

bool EllipticPipeline::cached(const std::string& file, const std::string& key) const {
  std::ifstream in(config_.output_dir / (file + ".key"));
  std::string stored;
  return in && std::getline(in, stored) && stored == key && fs::exists(config_.output_dir / file);
}

void EllipticPipeline::mark(const std::string& file, const std::string& stage, const std::string& key) {
  std::ofstream(config_.output_dir / (file + ".key")) << key << '\n';
  written_[file] = stage;
}

std::size_t EllipticPipeline::adapted_dim(AdaptationScheme s) const {
  return s == AdaptationScheme::gaussian ? 1 : config_.adaptation.dim;
}

const KLBasis& EllipticPipeline::kl() {
  if (kl_) return *kl_;
  try {
    const auto grid = config_.grid();
    KLBasis kl = kl_decompose(config_.field, grid, config_.modes > 0 ? 1.0 : config_.energy_fraction);
    if (config_.modes > 0) kl = truncate_modes(kl, config_.modes);
    if (config_.adaptation.dim > kl.modes())
      throw InvalidArgument("adaptation.dim exceeds the " + std::to_string(kl.modes()) + " KL modes");
    const auto key = stage_key("kl");
    std::ofstream ev(config_.output_dir / "kl_eigenvalues.csv");
    write_kl_eigenvalues(ev, kl);
    std::ofstream ef(config_.output_dir / "kl_eigenfunctions.csv");
    write_kl_eigenfunctions(ef, kl);
    mark("kl_eigenvalues.csv", "kl", key);
    mark("kl_eigenfunctions.csv", "kl", key);
    kl_ = std::move(kl);
  } catch (const std::exception& e) {
    throw StageError("kl", e.what());
  }
  return *kl_;
}

const SampleStore& EllipticPipeline::ensemble() {
  if (store_) return *store_;
  const auto& basis = kl();
  const std::string file = "ensemble.bin";
  const auto key = stage_key("ensemble");
  try {
    if (cached(file, key)) {
      std::ifstream in(config_.output_dir / file, std::ios::binary);
      store_ = read_sample_store(in);
      written_[file] = "ensemble";
    } else {
      store_ = run_ensemble(basis, config_.source, config_.solver, config_.samples, config_.seed);
      std::ofstream out(config_.output_dir / file, std::ios::binary);
      write_sample_store(out, *store_);
      mark(file, "ensemble", key);
    }
  } catch (const std::exception& e) {
    throw StageError("ensemble", e.what());
  }
  return *store_;
}

const ChaosExpansion& EllipticPipeline::expansion() {
  if (expansion_) return *expansion_;
  const std::string file = "expansion.csv";
  const auto key = stage_key("fit");
  if (cached(file, key)) {
    expansion_ = load_expansion((config_.output_dir / file).string());
    written_[file] = "fit";
    return *expansion_;
  }
  const auto& store = ensemble();
  try {
    auto fit = fit_coefficients(store, build_index_set(store.inputs.cols(), config_.order));
    expansion_ = std::move(fit.expansion);
    save_expansion((config_.output_dir / file).string(), *expansion_);
    mark(file, "fit", key);
    json info{{"samples", store.size()}, {"terms", expansion_->index_set().size()},
              {"undersampled", fit.undersampled}};
    std::ofstream(config_.output_dir / "fit.json") << info.dump(2) << '\n';
    mark("fit.json", "fit", key);
  } catch (const std::exception& e) {
    throw StageError("fit", e.what());
  }
  return *expansion_;
}

const IsometryField& EllipticPipeline::field(AdaptationScheme scheme) {
  if (auto it = fields_.find(scheme); it != fields_.end()) return it->second;
  const auto& e = expansion();
  const std::string file = "isometry_" + to_string(scheme) + ".txt";
  const auto key = stage_key("adapt-" + to_string(scheme));
  try {
    if (cached(file, key) && (scheme != AdaptationScheme::quadratic || cached("quadratic_spectra.csv", key))) {
      std::ifstream in(config_.output_dir / file);
      IsometryField f = read_isometry_field(in);
      written_[file] = "adapt";
      if (scheme == AdaptationScheme::quadratic) {
        std::ifstream sp(config_.output_dir / "quadratic_spectra.csv");
        std::string line;
        std::getline(sp, line);
        std::vector<Eigen::VectorXd> spectra;
        while (std::getline(sp, line)) {
          std::stringstream row(line);
          std::string cell;
          std::getline(row, cell, ',');
          Eigen::VectorXd lam(static_cast<Eigen::Index>(f.dim()));
          for (Eigen::Index i = 0; i < lam.size(); ++i) {
            if (!std::getline(row, cell, ',')) throw InvalidArgument("quadratic_spectra.csv: short row");
            lam[i] = std::stod(cell);
          }
          spectra.push_back(std::move(lam));
        }
        if (spectra.size() != f.num_points()) throw InvalidArgument("quadratic_spectra.csv: wrong row count");
        f.set_spectra(std::move(spectra));
        written_["quadratic_spectra.csv"] = "adapt";
      }
      return fields_.emplace(scheme, std::move(f)).first->second;
    }
    IsometryField f = scheme == AdaptationScheme::gaussian ? gaussian_adaptation(e)
                                                           : quadratic_adaptation(e, adapted_dim(scheme));
    std::ofstream out(config_.output_dir / file);
    write_isometry_field(out, f);
    mark(file, "adapt", key);
    if (scheme == AdaptationScheme::quadratic) {
      std::ofstream sp(config_.output_dir / "quadratic_spectra.csv");
      sp << "cell" << std::setprecision(17);
      for (std::size_t i = 0; i < e.dim(); ++i) sp << ",lambda" << i + 1;
      sp << '\n';
      for (std::size_t c = 0; c < f.spectra().size(); ++c) {
        sp << c;
        for (Eigen::Index i = 0; i < f.spectra()[c].size(); ++i) sp << ',' << f.spectra()[c][i];
        sp << '\n';
      }
      mark("quadratic_spectra.csv", "adapt", key);
    }
    return fields_.emplace(scheme, std::move(f)).first->second;
  } catch (const std::exception& e) {
    throw StageError("adapt", e.what());
  }
}

const AdaptedExpansion& EllipticPipeline::adapted(AdaptationScheme scheme) {
  if (auto it = adapted_.find(scheme); it != adapted_.end()) return it->second;
  const auto& e = expansion();
  const auto& f = field(scheme);
  try {
    auto retained = build_index_set(adapted_dim(scheme), config_.adaptation.order);
    AdaptedExpansion a = project(e, f, retained);
    const std::string file = "adapted_" + to_string(scheme) + ".csv";
    save_expansion((config_.output_dir / file).string(), a.as_expansion());
    const auto key = stage_key("project-" + to_string(scheme));
    mark(file, "project", key);
    const auto targets = embed_index_set(*retained, e.dim());
    json err{{"scheme", to_string(scheme)},
             {"retained_terms", retained->size()},
             {"global_error_norm", global_error_norm(e, f, targets)}};
    const std::string efile = "projection_error_" + to_string(scheme) + ".json";
    std::ofstream(config_.output_dir / efile) << err.dump(2) << '\n';
    mark(efile, "project", key);
    return adapted_.emplace(scheme, std::move(a)).first->second;
  } catch (const std::exception& e) {
    throw StageError("project", e.what());
  }
}

void EllipticPipeline::write_kernel() {
  const auto scheme = config_.adaptation.scheme;
  const auto& f = field(scheme);
  try {
    const auto key = stage_key("kernel-" + to_string(scheme));
    std::ofstream out(config_.output_dir / "kernel_eigenvalues.csv");
    out << "row,index,eigenvalue\n" << std::setprecision(17);
    json summary = json::array();
    for (std::size_t r = 0; r < f.rows_retained(); ++r) {
      const auto k = eta_kernel(f, r);
      const auto count = std::min<Eigen::Index>(k.eigenvalues.size(), static_cast<Eigen::Index>(2 * f.dim()));
      for (Eigen::Index i = 0; i < count; ++i) out << r + 1 << ',' << i + 1 << ',' << k.eigenvalues[i] << '\n';
      summary.push_back({{"row", r + 1}, {"rank", k.rank()}, {"hs_norm", k.hs_norm}, {"hs_bound", k.hs_bound}});
      if (r == 0) {
        std::ofstream ef(config_.output_dir / "kernel_eigenfunctions.csv");
        ef << "cell" << std::setprecision(17);
        const auto m = std::min<Eigen::Index>(k.eigenfunctions.cols(), static_cast<Eigen::Index>(f.dim()));
        for (Eigen::Index i = 0; i < m; ++i) ef << ",phi" << i + 1;
        ef << '\n';
        for (Eigen::Index c = 0; c < k.eigenfunctions.rows(); ++c) {
          ef << c;
          for (Eigen::Index i = 0; i < m; ++i) ef << ',' << k.eigenfunctions(c, i);
          ef << '\n';
        }
        mark("kernel_eigenfunctions.csv", "kernel", key);
      }
    }
    std::ofstream(config_.output_dir / "kernel_summary.json") << summary.dump(2) << '\n';
    mark("kernel_eigenvalues.csv", "kernel", key);
    mark("kernel_summary.json", "kernel", key);
  } catch (const std::exception& e) {
    throw StageError("kernel", e.what());
  }
}

void EllipticPipeline::write_pdfs() {
  const auto& e = expansion();
  std::vector<AdaptationScheme> schemes{config_.adaptation.scheme};
  if (config_.adaptation.compare_gaussian && config_.adaptation.scheme != AdaptationScheme::gaussian)
    schemes.push_back(AdaptationScheme::gaussian);
  for (auto s : schemes) adapted(s);
  try {
    const auto probes = probe_cells(config_);
    const std::uint64_t pdf_seed = config_.seed + 1;
    const Eigen::MatrixXd full = sample_full(e, probes, config_.pdf.samples, pdf_seed);
    const auto key = stage_key("pdf");
    std::ofstream curves(config_.output_dir / "pdf_curves.csv");
    curves << "probe,cell,curve,x,density\n" << std::setprecision(12);
    std::ofstream dist(config_.output_dir / "pdf_distances.csv");
    dist << "probe,cell,x,y,scheme,l1,hellinger\n" << std::setprecision(12);
    bool full_written = false;
    for (auto s : schemes) {
      const Eigen::MatrixXd cand = sample_adapted(adapted_.at(s), fields_.at(s), probes, config_.pdf.samples, pdf_seed);
      const auto cmp = compare_columns(full, cand);
      for (std::size_t p = 0; p < probes.size(); ++p) {
        auto dump = [&](const DensityEstimate& de, const std::string& name) {
          for (std::size_t i = 0; i < de.x.size(); ++i)
            curves << p + 1 << ',' << probes[p] << ',' << name << ',' << de.x[i] << ',' << de.density[i] << '\n';
        };
        if (!full_written) dump(cmp.reference[p], "full");
        dump(cmp.candidate[p], to_string(s));
        const auto x = e.grid().center(probes[p]);
        dist << p + 1 << ',' << probes[p] << ',' << x[0] << ',' << x[1] << ',' << to_string(s) << ','
             << cmp.distance[p].l1 << ',' << cmp.distance[p].hellinger << '\n';
      }
      full_written = true;
    }
    mark("pdf_curves.csv", "pdf", key);
    mark("pdf_distances.csv", "pdf", key);
  } catch (const std::exception& ex) {
    throw StageError("pdf", ex.what());
  }
}

void EllipticPipeline::write_velocity() {
  if (config_.velocity_samples == 0) return;
  const auto& basis = kl();
  const auto& e = expansion();
  const auto scheme = config_.adaptation.scheme;
  const auto& f = field(scheme);
  const auto& a = adapted(scheme);
  try {
    const auto key = stage_key("velocity");
    std::ofstream out(config_.output_dir / "velocity_samples.csv");
    out << "sample,cell,x,y,vx_full,vy_full,vx_adapted,vy_adapted\n" << std::setprecision(12);
    const Eigen::VectorXd g = assemble_source(config_.source, basis.grid);
    for (std::size_t s = 0; s < config_.velocity_samples; ++s) {
      const auto xi = standard_normal_draw(config_.seed + 2, s, e.dim());
      const EllipticProblem problem{basis.grid, sample_transmissivity(basis, xi), g, config_.solver};
      const Eigen::VectorXd psi = evaluate_basis(e.index_set(), xi);
      const Eigen::VectorXd uf = e.coeffs() * psi;
      Eigen::VectorXd ua(uf.size());
      for (Eigen::Index c = 0; c < ua.size(); ++c) ua[c] = a.eval(f, static_cast<std::size_t>(c), xi);
      const auto vf = velocity(problem, uf);
      const auto va = velocity(problem, ua);
      for (std::size_t c = 0; c < basis.grid.size(); ++c) {
        const auto x = basis.grid.center(c);
        const auto r = static_cast<Eigen::Index>(c);
        out << s << ',' << c << ',' << x[0] << ',' << x[1] << ',' << vf.cell_vx[r] << ',' << vf.cell_vy[r] << ','
            << va.cell_vx[r] << ',' << va.cell_vy[r] << '\n';
      }
    }
    mark("velocity_samples.csv", "velocity", key);
  } catch (const std::exception& ex) {
    throw StageError("velocity", ex.what());
  }
}

void EllipticPipeline::run_all() {
  adapted(config_.adaptation.scheme);
  write_kernel();
  write_pdfs();
  write_velocity();
  write_manifest();
}

void EllipticPipeline::write_manifest() const {
  json files = json::object();
  for (const auto& [file, stage] : written_) files[file] = {{"stage", stage}};
  json m{{"version", kVersion}, {"config_hash", hash_}, {"seed", config_.seed},
         {"experiment", config_.experiment}, {"files", files}, {"config", json::parse(dump_config(config_))}};
  std::ofstream(config_.output_dir / "manifest.json") << m.dump(2) << '\n';
}

void run_elliptic(const PipelineConfig& config) {
  EllipticPipeline p(config);
  p.run_all();
}

void run_geometric(const PipelineConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  const auto hash = config_hash(config);
  json files = json::object();
  std::ofstream coeffs(config.output_dir / "geometric_coefficients.csv");
  coeffs << "x,d,u0,u1,u2,u0_hat,u1_hat,u2_hat\n" << std::setprecision(17);
  std::ofstream dist(config.output_dir / "geometric_distances.csv");
  dist << "x,d,l1_before,hellinger_before,l1_after,hellinger_after\n" << std::setprecision(12);
  for (double x : config.geometric.x) {
    for (auto d : config.geometric.d) {
      const auto ex = exact_adapted_coeffs(x);
      const auto tr = truncated_adapted_coeffs(x, d);
      coeffs << x << ',' << d << ',' << ex.u0 << ',' << ex.u1 << ',' << ex.u2 << ',' << tr.u0 << ',' << tr.u1 << ','
             << tr.u2 << '\n';
      const auto cmp = compare_pdfs(x, d, config.geometric.samples, config.seed);
      dist << x << ',' << d << ',' << cmp.before_to_exact.l1 << ',' << cmp.before_to_exact.hellinger << ','
           << cmp.after_to_exact.l1 << ',' << cmp.after_to_exact.hellinger << '\n';
      std::ostringstream name;
      name << "geometric_pdf_x" << x << "_d" << d << ".csv";
      std::ofstream pdf(config.output_dir / name.str());
      write_density_csv(pdf, {"exact", "before", "after"}, {&cmp.exact, &cmp.before, &cmp.after});
      files[name.str()] = {{"stage", "geometric"}};
    }
  }
  files["geometric_coefficients.csv"] = {{"stage", "geometric"}};
  files["geometric_distances.csv"] = {{"stage", "geometric"}};
  json m{{"version", kVersion}, {"config_hash", hash}, {"seed", config.seed},
         {"experiment", "geometric"}, {"files", files}, {"config", json::parse(dump_config(config))}};
  std::ofstream(config.output_dir / "manifest.json") << m.dump(2) << '\n';
}

void run_random_coeffs(const PipelineConfig& config) {
  EllipticPipeline p(config);
  const auto& e = p.expansion();
  const auto& rc = config.random_coeffs;
  try {
    if (rc.adapted > e.dim()) throw InvalidArgument("random_coeffs.adapted exceeds the number of modes");
    const auto se = regroup(e, VariableSplit::leading(e.dim(), rc.adapted));
    const std::size_t n = rc.scheme == AdaptationScheme::gaussian ? 1 : std::min(rc.adapted, config.adaptation.dim);
    const auto retained = build_index_set(n, rc.order);
    const auto ex = expected_adapted_coefficients(se, rc.scheme, *retained, rc.expectation_samples, config.seed + 3);
    std::ofstream out(config.output_dir / "random_coeffs_expected.csv");
    write_expected_coefficients_csv(out, se, *retained, ex);

    const auto probes = probe_cells(config);
    const Eigen::MatrixXd full = sample_full(e, probes, rc.pdf_samples, config.seed + 4);
    const Eigen::MatrixXd cand = sample_random_coeffs(se, rc.scheme, *retained, probes, rc.pdf_samples, config.seed + 4);
    const auto cmp = compare_columns(full, cand);
    std::ofstream dist(config.output_dir / "random_coeffs_pdf_distances.csv");
    dist << "probe,cell,l1,hellinger\n" << std::setprecision(12);
    std::ofstream curves(config.output_dir / "random_coeffs_pdf_curves.csv");
    curves << "probe,cell,curve,x,density\n" << std::setprecision(12);
    for (std::size_t k = 0; k < probes.size(); ++k) {
      dist << k + 1 << ',' << probes[k] << ',' << cmp.distance[k].l1 << ',' << cmp.distance[k].hellinger << '\n';
      for (const auto* de : {&cmp.reference[k], &cmp.candidate[k]})
        for (std::size_t i = 0; i < de->x.size(); ++i)
          curves << k + 1 << ',' << probes[k] << ',' << (de == &cmp.reference[k] ? "full" : "adapted") << ','
                 << de->x[i] << ',' << de->density[i] << '\n';
    }
  } catch (const std::exception& ex) {
    throw StageError("random-coeffs", ex.what());
  }
  json m{{"version", kVersion}, {"config_hash", config_hash(config)}, {"seed", config.seed},
         {"experiment", "random-coeffs"}, {"config", json::parse(dump_config(config))}};
  json files = json::object();
  for (const auto& [file, stage] : p.written()) files[file] = {{"stage", stage}};
  for (const char* f : {"random_coeffs_expected.csv", "random_coeffs_pdf_distances.csv", "random_coeffs_pdf_curves.csv"})
    files[f] = {{"stage", "random-coeffs"}};
  m["files"] = files;
  std::ofstream(config.output_dir / "manifest.json") << m.dump(2) << '\n';
}

void run_experiment(const PipelineConfig& config) {
  if (config.threads > 0) set_thread_count(config.threads);
  if (config.experiment == "elliptic") return run_elliptic(config);
  if (config.experiment == "geometric") return run_geometric(config);
  if (config.experiment == "random-coeffs") return run_random_coeffs(config);
  throw InvalidArgument("unknown experiment '" + config.experiment + "'");
}

}  // namespace hcadapt
