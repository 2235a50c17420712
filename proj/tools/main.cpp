#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ifepanel/errors.hpp"
#include "ifepanel/harness.hpp"
#include "ifepanel/panel.hpp"
#include "ifepanel/simulate.hpp"

namespace fs = std::filesystem;
using namespace ifepanel;

namespace {

int cmd_simulate(const std::string& spec_path, const std::string& out) {
  try {
    const DGPSpec spec = load_dgp_spec(spec_path);
    const Simulated sim = simulate(spec);
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    save_panel(sim.panel, out);
    const fs::path stem = p.parent_path() / p.stem();
    std::ofstream truth(stem.string() + ".truth.json");
    if (!truth) throw Error(ErrorKind::IOError, "cannot write truth sidecar");
    truth << truth_to_json(spec, sim.truth).dump(2) << '\n';
    std::cout << "wrote " << out << " (N=" << sim.panel.N() << ", T=" << sim.panel.T() << ", K=" << sim.panel.K()
              << ")\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int cmd_diagnose(const std::string& csv, const CsvSchema& schema, int reps, std::uint64_t seed,
                 const std::string& out) {
  try {
    const PanelData panel = load_panel(csv, schema);
    const Table t = diagnose_panel(panel, reps, seed);
    if (!out.empty()) {
      const fs::path p(out);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      write_table_files(t, out);
    }
    write_text(t, std::cout);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel estimators for interactive and grouped fixed effects"};
  app.require_subcommand(1);

  std::string config;
  auto* est = app.add_subcommand("estimate", "Run the estimators and diagnostics listed in a JSON config");
  est->add_option("config", config, "config file")->required();

  std::string spec, out;
  auto* sim = app.add_subcommand("simulate", "Draw one panel from a JSON DGP spec");
  sim->add_option("spec", spec, "DGP spec file")->required();
  sim->add_option("-o,--out", out, "output CSV")->required();

  std::string mc_spec, mc_config;
  auto* mc = app.add_subcommand("mc", "Monte Carlo over a DGP spec");
  mc->add_option("spec", mc_spec, "DGP spec file")->required();
  mc->add_option("config", mc_config, "Monte Carlo config file")->required();

  std::string csv, diag_out;
  CsvSchema schema;
  int reps = 30;
  std::uint64_t seed = 1;
  auto* dg = app.add_subcommand("diagnose", "Cross-sectional dependence summary of a panel CSV");
  dg->add_option("csv", csv, "panel CSV in long format")->required();
  dg->add_option("--unit", schema.unit, "unit column")->capture_default_str();
  dg->add_option("--time", schema.time, "time column")->capture_default_str();
  dg->add_option("--y", schema.y, "outcome column")->capture_default_str();
  dg->add_option("--reps", reps, "CDw weight draws")->check(CLI::Range(30, 1000000))->capture_default_str();
  dg->add_option("--seed", seed, "seed for CDw weights")->capture_default_str();
  dg->add_option("-o,--out", diag_out, "output stem for .csv and .txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*est) return run_config(config, std::cout);
  if (*sim) return cmd_simulate(spec, out);
  if (*mc) return run_mc(mc_spec, mc_config, std::cout);
  if (*dg) return cmd_diagnose(csv, schema, reps, seed, diag_out);
  return 2;
}
