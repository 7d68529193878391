// Command-line driver for the adaptation pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "hcadapt/chaos.hpp"
#include "hcadapt/parallel.hpp"
#include "hcadapt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hcadapt;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON configuration file");
  app->add_option("--seed", f.seed, "Random seed (overrides the config)");
  app->add_option("--threads", f.threads, "Worker thread cap");
  app->add_option("--out", f.out, "Output directory (overrides the config)");
}

PipelineConfig resolve(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (!f.out.empty()) c.output_dir = f.out;
  c.validate();
  if (c.threads > 0) set_thread_count(c.threads);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Basis adaptation of Hermite chaos expansions"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::size_t dim = 20;
  int order = 3;
  auto* index_set = app.add_subcommand("index-set", "Write the multi-index set J_p as CSV");
  index_set->add_option("-d,--dim", dim, "Number of variables");
  index_set->add_option("-p,--order", order, "Total order");
  add_common(index_set, flags);

  struct Stage {
    const char* name;
    const char* help;
  };
  const Stage stages[] = {
      {"kl", "KL decomposition of the log-transmissivity field"},
      {"ensemble", "Monte-Carlo ensemble of pressure solves"},
      {"fit", "Projection estimate of the chaos coefficients"},
      {"adapt", "Adaptation isometries at every grid point"},
      {"project", "Adapted expansion and projection error"},
      {"kernel", "Covariance kernels of the adapted variables"},
      {"pdf", "Density comparisons at the probe points"},
      {"geometric", "Geometric-series benchmark"},
      {"run", "Run the experiment named in the config"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& s : stages) {
    subs[s.name] = app.add_subcommand(s.name, s.help);
    add_common(subs[s.name], flags);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (index_set->parsed()) {
      const auto c = resolve(flags);
      const auto set = build_index_set(dim, order);
      fs::create_directories(c.output_dir);
      const auto path = c.output_dir / "index_set.csv";
      std::ofstream out(path);
      out << "position,order";
      for (std::size_t i = 0; i < dim; ++i) out << ",a" << i + 1;
      out << '\n';
      for (std::size_t k = 0; k < set->size(); ++k) {
        const auto& a = (*set)[k];
        out << k << ',' << a.order();
        for (int e : a.exponents()) out << ',' << e;
        out << '\n';
      }
      std::cout << set->size() << " terms written to " << path.string() << '\n';
      return 0;
    }

    const auto c = resolve(flags);
    if (subs["geometric"]->parsed()) {
      run_geometric(c);
    } else if (subs["run"]->parsed()) {
      run_experiment(c);
    } else {
      EllipticPipeline p(c);
      if (subs["kl"]->parsed()) {
        p.kl();
      } else if (subs["ensemble"]->parsed()) {
        p.ensemble();
      } else if (subs["fit"]->parsed()) {
        p.expansion();
      } else if (subs["adapt"]->parsed()) {
        p.field(c.adaptation.scheme);
      } else if (subs["project"]->parsed()) {
        p.adapted(c.adaptation.scheme);
      } else if (subs["kernel"]->parsed()) {
        p.write_kernel();
      } else if (subs["pdf"]->parsed()) {
        p.write_pdfs();
      }
      p.write_manifest();
    }
    std::cout << "outputs in " << c.output_dir.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
