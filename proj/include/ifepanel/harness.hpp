#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ifepanel/estimate.hpp"
#include "ifepanel/gfe.hpp"
#include "ifepanel/panel.hpp"
#include "ifepanel/simulate.hpp"

namespace ifepanel {

using json = nlohmann::json;

struct EstimatorSpec {
  std::string type;   // FE, TWFE, POLS, ILS, ILS-BC, CCEP, DCCEP, FSIV, TSIV, NNR, PNNR, GF, TSGFM
  std::string label;  // column header; defaults to type (plus m for ILS)
  json options = json::object();
};

struct DiagnosticsSpec {
  bool cd = true;
  bool cdw = true;
  bool cd_star = true;
  bool er = true;
  bool gos = true;
  int cdw_reps = 30;
};

struct RunConfig {
  std::string data_path;
  CsvSchema schema;
  std::vector<EstimatorSpec> estimators;
  DiagnosticsSpec diagnostics;
  bool any_diagnostic = true;
  std::string out_dir = ".";
  std::string out_name = "results";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

// Throws ConfigError. Relative paths resolve against base_dir.
RunConfig parse_run_config(const json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

std::vector<EstimatorSpec> parse_estimators(const json& list);
DGPSpec parse_dgp_spec(const json& j);
DGPSpec load_dgp_spec(const std::string& path);
json truth_to_json(const DGPSpec& spec, const Truth& truth);

struct ColumnResult {
  EstimatorSpec spec;
  bool ok = false;
  std::string status = "not run";
  EstimateResult est;
  int unit_clusters = 0;  // 0: not a grouped estimator
  int time_clusters = 0;
  std::optional<Grouping> grouping;
  double seconds = 0.0;
};

ColumnResult run_estimator(const PanelData& panel, const EstimatorSpec& spec, std::uint64_t seed, int threads = 1);

struct Table {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<std::string>> cells;  // [row][col]
};

// Fixed row inventory: coefficient and (se) rows per regressor, then
// N, Units, T, CD, CD p, CDw, CDw p, CD*, CD* p, m_ER, m_GOS,
// Clusters (units), Clusters (time), Converged, Iterations, m used, Status.
Table results_table(const PanelData& panel, const std::vector<ColumnResult>& cols, const DiagnosticsSpec& diag,
                    std::uint64_t seed);

void write_csv(const Table& t, std::ostream& out);
void write_text(const Table& t, std::ostream& out);
void write_table_files(const Table& t, const std::string& stem);  // stem.csv and stem.txt

// Exit code: 0 ok, 1 estimator failures, 2 config or IO error.
int run_config(const std::string& path, std::ostream& log);

struct McEstimatorSummary {
  std::string label;
  VectorXd bias, rmse, coverage;
  int successes = 0;
  int failures = 0;
  double mean_seconds = 0.0;
};

struct McReplication {
  int rep = 0;
  std::string label;
  std::string status;
  VectorXd beta, se;
};

struct McResult {
  std::vector<McEstimatorSummary> summary;
  std::vector<McReplication> replications;  // ordered by (rep, estimator)
  VectorXd true_beta;
  std::vector<std::string> var_names;
};

McResult mc_run(const DGPSpec& spec, const std::vector<EstimatorSpec>& estimators, int reps, std::uint64_t seed,
                int threads = 1);

Table mc_summary_table(const McResult& r);
Table mc_replication_table(const McResult& r);
Table mc_timing_table(const McResult& r);

// Exit code as run_config. mc config keys: estimators, reps, seed, threads, output.
int run_mc(const std::string& spec_path, const std::string& config_path, std::ostream& log);

// Per-variable CD, CDw, alpha, ER and GR with a pooled "All" row.
Table diagnose_panel(const PanelData& panel, int cdw_reps, std::uint64_t seed);

}  // namespace ifepanel
