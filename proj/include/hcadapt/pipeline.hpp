#pragma once

// Configuration-driven runs of the elliptic, geometric and random-coefficient
// experiments. Every stage writes its artifact under the output directory and
// reuses it on later runs when the stage key (hash of the inputs that
// determine it) matches.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcadapt/adaptation.hpp"
#include "hcadapt/elliptic.hpp"
#include "hcadapt/estimation.hpp"
#include "hcadapt/random_coeffs.hpp"
#include "hcadapt/random_field.hpp"

namespace hcadapt {

inline constexpr const char* kVersion = "0.1.0";

struct AdaptationConfig {
  AdaptationScheme scheme = AdaptationScheme::quadratic;
  std::size_t dim = 5;   // adapted variables kept
  int order = 2;         // order of the retained set over them
  bool compare_gaussian = true;
};

struct PdfConfig {
  std::size_t samples = 100000;
  // Grid (i, j) pairs; empty selects the 3 x 3 interior lattice.
  std::vector<std::array<std::size_t, 2>> probes;
};

struct GeometricConfig {
  std::vector<double> x{0.3, 0.9, 0.99};
  std::vector<std::size_t> d{10, 50, 100};
  std::size_t samples = 100000;
};

struct RandomCoeffsConfig {
  std::size_t adapted = 4;  // leading variables forming xi_hat
  AdaptationScheme scheme = AdaptationScheme::gaussian;
  int order = 2;
  std::size_t expectation_samples = 1000;
  std::size_t pdf_samples = 100000;
};

struct PipelineConfig {
  std::string experiment = "elliptic";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::filesystem::path output_dir = "out";

  double length_x = 400.0;
  double length_y = 400.0;
  std::size_t nx = 40;
  std::size_t ny = 40;
  RandomFieldSpec field{};
  double energy_fraction = 0.97;
  std::size_t modes = 0;  // > 0 overrides the energy criterion
  SourceSpec source{};
  SolverSettings solver{};
  int order = 3;
  std::size_t samples = 100000;
  AdaptationConfig adaptation{};
  PdfConfig pdf{};
  std::size_t velocity_samples = 2;
  GeometricConfig geometric{};
  RandomCoeffsConfig random_coeffs{};

  SpatialGrid grid() const { return SpatialGrid(length_x, length_y, nx, ny); }
  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& c);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& c);

/// Cells (k nx / 4, l ny / 4), k, l = 1..3.
std::vector<std::size_t> probe_lattice(const SpatialGrid& grid);
std::vector<std::size_t> probe_cells(const PipelineConfig& c);

/// One PDE solve per draw xi_n = standard_normal_draw(seed, n, modes).
SampleStore run_ensemble(const KLBasis& kl, const SourceSpec& source, const SolverSettings& solver, std::size_t n,
                         std::uint64_t seed);

/// n x probes values of the full expansion at draws standard_normal_draw(seed, k, d).
Eigen::MatrixXd sample_full(const ChaosExpansion& e, std::span<const std::size_t> probes, std::size_t n,
                            std::uint64_t seed);
/// The adapted expansion on the same draws.
Eigen::MatrixXd sample_adapted(const AdaptedExpansion& a, const IsometryField& field,
                               std::span<const std::size_t> probes, std::size_t n, std::uint64_t seed);
/// Random-coefficient adaptation: A and U^A from zeta, evaluated on xi_hat.
Eigen::MatrixXd sample_random_coeffs(const SplitExpansion& se, AdaptationScheme scheme, const IndexSet& retained,
                                     std::span<const std::size_t> probes, std::size_t n, std::uint64_t seed);

struct ProbeComparison {
  std::vector<DensityEstimate> reference;
  std::vector<DensityEstimate> candidate;
  std::vector<DensityDistance> distance;
};

/// Column-wise KDEs and distances.
ProbeComparison compare_columns(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& candidate);

/// Wraps a stage failure with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "': " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Lazily evaluated, cached elliptic stages.
class EllipticPipeline {
 public:
  explicit EllipticPipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& output_dir() const { return config_.output_dir; }

  const KLBasis& kl();
  const SampleStore& ensemble();
  const ChaosExpansion& expansion();
  const IsometryField& field(AdaptationScheme scheme);
  const AdaptedExpansion& adapted(AdaptationScheme scheme);
  void write_kernel();
  void write_pdfs();
  void write_velocity();
  void run_all();

  /// Files written so far, relative to the output directory.
  const std::map<std::string, std::string>& written() const { return written_; }
  void write_manifest() const;

 private:
  std::string stage_key(const std::string& stage) const;
  bool cached(const std::string& file, const std::string& key) const;
  void mark(const std::string& file, const std::string& stage, const std::string& key);
  std::size_t adapted_dim(AdaptationScheme s) const;

  PipelineConfig config_;
  std::string hash_;
  std::optional<KLBasis> kl_;
  std::optional<SampleStore> store_;
  std::optional<ChaosExpansion> expansion_;
  std::map<AdaptationScheme, IsometryField> fields_;
  std::map<AdaptationScheme, AdaptedExpansion> adapted_;
  std::map<std::string, std::string> written_;
};

void run_elliptic(const PipelineConfig& config);
void run_geometric(const PipelineConfig& config);
void run_random_coeffs(const PipelineConfig& config);
/// Dispatch on config.experiment.
void run_experiment(const PipelineConfig& config);

}  // namespace hcadapt
