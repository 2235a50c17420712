#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ifepanel/numlin.hpp"
#include "ifepanel/panel.hpp"

namespace ifepanel {

enum class TestMethod { CD, CDw, CDwPlus, CDStar, Hausman };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::CD;
  std::map<std::string, double> aux;
};

double normal_two_sided_p(double z);

// Pairwise correlations of the rows of U; rows with zero variance are rejected.
MatrixXd row_correlations(const MatrixXd& U);

TestResult cd_test(const MatrixXd& U);

struct CdwOptions {
  int reps = 30;
  std::uint64_t seed = 0;
  bool force_unit_weights = false;  // test hook: every weight +1
  int threads = 1;
};

/*
 * Per draw r the weighted statistic CD_r uses w_i w_j rho_ij. Draws are
 * averaged and the mean is rescaled by its null standard deviation, the
 * square root of the average pairwise correlation between draws
 * (kappa_rs, computed from the weight vectors). All-ones weights give CD.
 */
TestResult cdw_test(const MatrixXd& U, const CdwOptions& opts);

enum class ScreenThreshold { printed, per_correlation };  // 2 sqrt(ln(N) T) or 2 sqrt(ln(N)/T)

TestResult cdw_plus(const MatrixXd& U, const CdwOptions& opts,
                    ScreenThreshold threshold = ScreenThreshold::printed);

struct CdStarOptions {
  int m = -1;                          // -1: eigenvalue ratio
  std::optional<double> theta_override;  // test hook
};

// Theta from loadings L (N x m) and idiosyncratic standard deviations s (N).
double cd_star_theta(const MatrixXd& L, const VectorXd& s);

TestResult cd_star(const MatrixXd& U, const CdStarOptions& opts = {});

struct ExponentEstimate {
  double alpha = 0.0;
  std::optional<double> se;
  enum class Kind { observed, residual } method = Kind::observed;
  std::optional<int> bootstrap_reps;
  std::map<std::string, double> aux;
};

ExponentEstimate alpha_observed(const MatrixXd& X);

struct AlphaResidualOptions {
  double sig = 0.05;
  int bootstrap_reps = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

ExponentEstimate alpha_residual(const MatrixXd& U, const AlphaResidualOptions& opts = {});

TestResult hausman_ife(const VectorXd& beta_twfe, const MatrixXd& vcov_twfe,
                       const VectorXd& beta_ils, const MatrixXd& vcov_ils);

// Fits TWFE and ILS(m) on the panel. Both covariances are heteroskedasticity-robust
// sandwiches on the ILS residuals, which stay valid under either hypothesis.
TestResult hausman_ife(const PanelData& panel, int m);

}  // namespace ifepanel
