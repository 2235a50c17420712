#include "ifepanel/estimate.hpp"

#include <algorithm>
#include <cmath>

namespace ifepanel {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::POLS: return "POLS";
    case Method::FE: return "FE";
    case Method::TFE: return "TFE";
    case Method::TWFE: return "TWFE";
    case Method::ILS: return "ILS";
    case Method::ILS_BC: return "ILS-BC";
    case Method::CCEP: return "CCEP";
    case Method::DCCEP: return "DCCEP";
    case Method::FSIV: return "FSIV";
    case Method::TSIV: return "TSIV";
    case Method::NNR: return "NNR";
    case Method::PNNR: return "PNNR";
    case Method::GF: return "GF";
    case Method::TSGFM: return "TSGF-M";
  }
  return "?";
}

bool EstimateResult::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

MatrixXd cluster_vcov(const MatrixXd& Xs, const VectorXd& e, const MatrixXd& bread, int N, int T) {
  const Eigen::Index K = Xs.cols();
  MatrixXd meat = MatrixXd::Zero(K, K);
  for (int i = 0; i < N; ++i) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(i) * T;
    const VectorXd s = Xs.middleRows(r0, T).transpose() * e.segment(r0, T);
    meat.noalias() += s * s.transpose();
  }
  const double nt = static_cast<double>(N) * T;
  double c = 1.0;
  if (N > 1 && nt > static_cast<double>(K)) c = N / (N - 1.0) * (nt - 1.0) / (nt - static_cast<double>(K));
  MatrixXd V = c * bread * meat * bread.transpose();
  return 0.5 * (V + V.transpose());
}

MatrixXd hc_vcov(const MatrixXd& Z, const VectorXd& e, const MatrixXd& bread) {
  const MatrixXd Ze = Z.array().colwise() * e.array();
  MatrixXd V = bread * (Ze.transpose() * Ze) * bread.transpose();
  return 0.5 * (V + V.transpose());
}

void finalize_stderr(EstimateResult& r) {
  r.stderr_.resize(r.vcov.rows());
  for (Eigen::Index k = 0; k < r.vcov.rows(); ++k) r.stderr_(k) = std::sqrt(std::max(r.vcov(k, k), 0.0));
}

}  // namespace ifepanel
