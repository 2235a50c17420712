#pragma once

#include <vector>

#include "ifepanel/estimate.hpp"
#include "ifepanel/factor_select.hpp"
#include "ifepanel/numlin.hpp"
#include "ifepanel/panel.hpp"

namespace ifepanel {

// Pooled OLS on the demeaned panel; covariance clustered by unit.
EstimateResult fe_estimate(const PanelData& panel, DemeanMode mode);

enum class IlsInit { pooled_ols, two_way_within, user };

struct IlsOptions {
  int m = 1;
  IlsInit init = IlsInit::two_way_within;
  VectorXd user_beta;
  int max_iter = 1000;
  double tol = 1e-8;
  bool bias_correct = false;
};

struct IlsFit {
  EstimateResult result;
  FactorModel factors;
  std::vector<double> ssr_path;  // SSR after each factor step; entry 0 is the initializer
};

IlsFit ils_estimate(const PanelData& panel, const IlsOptions& opts);

// beta given factors F (T x m): pooled regression of y M_F on X M_F.
VectorXd beta_given_factors(const PanelData& panel, const MatrixXd& F);

struct BiasCorrectionOptions {
  bool b1 = true;
  bool b2 = true;
  bool b3 = true;
  bool homoskedastic = false;  // i.i.d. error variance: B2 and B3 vanish
  int bandwidth = -1;          // B1 truncation; -1 picks floor(T^{1/4})
};

struct BiasTerms {
  VectorXd b1, b2, b3;  // each K; zero when not requested
  MatrixXd W;           // K x K
  VectorXd delta;       // added to beta
};

BiasTerms ils_bias_terms(const IlsFit& fit, const PanelData& panel, const BiasCorrectionOptions& opts);
EstimateResult ils_bias_correct(const IlsFit& fit, const PanelData& panel,
                                const BiasCorrectionOptions& opts = {});

struct CcepOptions {
  MatrixXd extra_csa;         // T x e, optional
  MatrixXd observed_factors;  // T x n, optional
  bool dynamic = false;
  int lags = -1;  // dynamic lag order; -1 uses floor(T^{1/3})
  LagBoundary boundary = LagBoundary::backfill;
};

EstimateResult ccep_estimate(const PanelData& panel, const CcepOptions& opts = {});

struct TsivOptions {
  int m_x = -1;  // -1: eigenvalue ratio on the stacked regressors
  int m = -1;    // -1: eigenvalue ratio on first-stage residuals
  int m_max = -1;
};

struct TsivFit {
  EstimateResult fsiv;
  EstimateResult tsiv;
  int m_x = 0;
  int m = 0;
  MatrixXd Fx;
  MatrixXd F;
};

TsivFit tsiv_estimate(const PanelData& panel, const TsivOptions& opts = {});
TsivFit tsiv_known_factors(const PanelData& panel, const MatrixXd& Fx, const MatrixXd& F);

struct PnnrOptions {
  std::vector<double> psi_grid;  // empty: default log grid
  int grid_size = 10;
  double grid_span = 1e-4;
  int m_max = -1;  // -1 uses default_m_max
  FactorMethod selector = FactorMethod::IC1;
  int post_iterations = 200;
  double tol = 1e-10;
  int inner_max_iter = 500;
  double inner_tol = 1e-10;
};

struct PnnrFit {
  EstimateResult result;
  FactorModel factors;
  VectorXd beta_nnr;
  std::vector<double> psi_grid;
  std::vector<double> objective_path;  // Q_psi after each inner alternation
  FactorCountReport selection;
  int m_hat = 0;
  bool nnr_converged = true;
};

PnnrFit pnnr_estimate(const PanelData& panel, const PnnrOptions& opts = {});

// Q_psi(beta, Gamma) = ||Y - X beta - Gamma||^2/(2NT) + psi/sqrt(NT) ||Gamma||_*
double nnr_objective(const PanelData& panel, const VectorXd& beta, const MatrixXd& gamma, double psi);

// Factor-count selection by name; used by PNNR, TSIV and CD*.
FactorCountReport select_factor_count(const MatrixXd& U, FactorMethod method, int m_max);

}  // namespace ifepanel
