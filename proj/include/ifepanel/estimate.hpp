#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifepanel/panel.hpp"

namespace ifepanel {

enum class Method { POLS, FE, TFE, TWFE, ILS, ILS_BC, CCEP, DCCEP, FSIV, TSIV, NNR, PNNR, GF, TSGFM };

std::string_view to_string(Method m);

struct EstimateResult {
  VectorXd beta;
  VectorXd stderr_;
  MatrixXd vcov;
  MatrixXd residuals;  // N x T (rows trimmed away are absent for trimmed dynamic CCEP)
  Method method = Method::POLS;
  std::optional<int> m_used;
  int iterations = 0;
  bool converged = true;
  double ssr = 0.0;
  std::vector<std::string> flags;       // soft conditions, e.g. "RankDeficient"
  std::string variance = "cluster_unit";  // label of the covariance estimator

  bool has_flag(std::string_view f) const;
};

// Cluster-robust (by unit) covariance for pooled regressors Xs (NT x K, unit-major)
// with residuals e, bread = (Xs'Xs)^{-1}. Small-sample factor N/(N-1)*(NT-1)/(NT-K).
MatrixXd cluster_vcov(const MatrixXd& Xs, const VectorXd& e, const MatrixXd& bread, int N, int T);

// Heteroskedasticity-robust sandwich with instruments Z for the moment sum Z'e.
MatrixXd hc_vcov(const MatrixXd& Z, const VectorXd& e, const MatrixXd& bread);

void finalize_stderr(EstimateResult& r);

}  // namespace ifepanel
