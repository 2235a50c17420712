#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ifepanel/estimate.hpp"
#include "ifepanel/panel.hpp"

namespace ifepanel {

// Labels are 0-based internally; CSV exports write 1-based labels.
struct Grouping {
  std::vector<int> unit_groups;  // length N, in 0..G-1
  std::vector<int> time_groups;  // length T, in 0..C-1
  int G = 1;
  int C = 1;
  double objective = 0.0;
  std::vector<std::string> flags;
};

struct KMeansOptions {
  int starts = 1000;
  int max_iter = 100;
  std::uint64_t seed = 0;
  double tol = 0.0;  // relative objective decrease below which Lloyd stops early
  int threads = 1;
};

struct KMeansResult {
  std::vector<int> labels;
  MatrixXd centroids;  // G x d
  double objective = 0.0;
  int best_start = 0;
  std::vector<double> best_path;  // objective after each Lloyd iteration of the winning start
  bool repaired = false;
};

KMeansResult kmeans(const MatrixXd& points, int G, const KMeansOptions& opts);

struct GfFit {
  EstimateResult result;
  Grouping grouping;
  MatrixXd group_effects;  // G x T
  std::vector<double> objective_path;  // winning start
  int best_start = 0;
};

GfFit gf_estimate(const PanelData& panel, int G, const KMeansOptions& opts);

// beta and group-time effects for fixed assignments (0-based labels, all used).
GfFit gf_fixed_groups(const PanelData& panel, const std::vector<int>& groups, int G);

struct GfSelection {
  int G_hat = 1;
  std::vector<double> bic_path;  // G = 1..G_max
  std::vector<double> ssr_path;
  double penalty = 0.0;          // ln(NT)/NT
};

// BIC(G) = ln(SSR/NT) + (G*T + N + K) * ln(NT)/NT
GfSelection gf_select_G(const PanelData& panel, int G_max, const KMeansOptions& opts);

struct BlmReport {
  Grouping grouping;
  std::vector<double> Q_unit;  // k-means objective / N for G = 1..
  std::vector<double> Q_time;  // k-means objective / T for C = 1..
  double V_unit = 0.0;
  double V_time = 0.0;
  bool unit_cap_binding = false;
  bool time_cap_binding = false;
};

BlmReport discretize_blm(const PanelData& panel, double gamma, int G_max, int C_max,
                         const KMeansOptions& opts);

struct TsgfmOptions {
  double tol = 1e-13;
  int max_iter = 100000;
};

// y = X beta + delta_{i, l_t} + nu_{t, g_i} + e
EstimateResult tsgfm_estimate(const PanelData& panel, const Grouping& grouping,
                              const TsgfmOptions& opts = {});

// CSV exports with 1-based labels: "unit,group" and "time,group".
void write_unit_groups_csv(const Grouping& g, const std::vector<std::string>& unit_ids, std::ostream& out);
void write_time_groups_csv(const Grouping& g, const std::vector<std::string>& time_ids, std::ostream& out);

// Connected components of the bipartite incidence graph of the two dummy blocks.
int tsgfm_components(const Grouping& grouping, int N, int T);

}  // namespace ifepanel
