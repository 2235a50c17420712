#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace ifepanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Balanced N x T panel. y and every x[k] are N x T (row = unit, column = period).
struct PanelData {
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_ids;
  MatrixXd y;
  std::vector<MatrixXd> x;
  std::vector<std::string> var_names;

  int N() const { return static_cast<int>(y.rows()); }
  int T() const { return static_cast<int>(y.cols()); }
  int K() const { return static_cast<int>(x.size()); }

  // Throws DimensionMismatch / InvalidArgument when an invariant is violated.
  void validate() const;
};

// Builds a panel with default labels ("1".."N", "1".."T", "x1".."xK") where omitted.
PanelData make_panel(MatrixXd y, std::vector<MatrixXd> x,
                     std::vector<std::string> var_names = {},
                     std::vector<std::string> unit_ids = {},
                     std::vector<std::string> time_ids = {});

struct CsvSchema {
  std::string unit = "unit";
  std::string time = "time";
  std::string y = "y";
  std::vector<std::string> x;  // empty: every remaining column
};

PanelData load_panel(const std::string& path, const CsvSchema& schema = {});
PanelData read_panel_csv(std::istream& in, const CsvSchema& schema = {});
void write_panel_csv(const PanelData& panel, std::ostream& out);
void save_panel(const PanelData& panel, const std::string& path);

enum class DemeanMode { unit, time, two_way, none };

MatrixXd demean_matrix(const MatrixXd& a, DemeanMode mode);
PanelData demean(const PanelData& panel, DemeanMode mode);

enum class LagBoundary { backfill, trim };

/*
 * T x ((K+include_y)(p+1)) matrix of period means. Block j holds the series
 * lagged j periods, ordered (ybar, xbar_1..xbar_K). With backfill, cells before
 * the sample start repeat the first period; with trim the first p rows are dropped.
 */
MatrixXd cross_section_averages(const PanelData& panel, bool include_y, int lags,
                                LagBoundary boundary = LagBoundary::backfill);

// Largest p with p^3 <= T.
int cce_lag_order(int T);

// Unit-major stacking: row i*T + t.
VectorXd vec_panel(const MatrixXd& a);
MatrixXd unvec_panel(const VectorXd& v, int N, int T);
MatrixXd stack_regressors(const PanelData& panel);

// Panel restricted to periods [t0, T).
PanelData drop_leading_periods(const PanelData& panel, int t0);

}  // namespace ifepanel
