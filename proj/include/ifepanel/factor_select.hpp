#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <utility>

namespace ifepanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FactorMethod { PC1, PC2, PC3, IC1, IC2, IC3, ER, GR, ED, GOS };

std::string_view to_string(FactorMethod m);

struct FactorCountReport {
  FactorMethod method = FactorMethod::IC1;
  int m_hat = 0;
  VectorXd criterion_path;
  int m_max = 0;
  double threshold = 0.0;  // penalty g(N,T) for PC/IC/GOS, delta for ED
};

enum class BaiNgVariant { PC, IC };
// V(m) scale: nt divides the residual sum of squares by NT, n by N.
enum class BaiNgScale { nt, n };

FactorCountReport bai_ng(const MatrixXd& U, int m_max, BaiNgVariant variant, int penalty,
                         BaiNgScale scale = BaiNgScale::nt);
FactorCountReport bai_ng_from_eigenvalues(const VectorXd& eigs, int N, int T, int m_max,
                                          BaiNgVariant variant, int penalty,
                                          BaiNgScale scale = BaiNgScale::nt);
double bai_ng_penalty(int N, int T, int penalty);

// (ER, GR). Paths hold k = 0..m_max with the mock eigenvalue at k = 0.
std::pair<FactorCountReport, FactorCountReport> er_gr(const MatrixXd& U, int m_max);
std::pair<FactorCountReport, FactorCountReport> er_gr_from_eigenvalues(const VectorXd& eigs,
                                                                       int m_max, int min_nt);

// Path entry k >= 1 is (lambda_k - lambda_{k+1}) - delta; entry 0 is 0.
FactorCountReport onatski_ed(const MatrixXd& U, int m_max);
FactorCountReport onatski_ed_from_eigenvalues(const VectorXd& eigs, int m_max);

// Path entry k-1 is xi(k) for k = 1..m_max+1.
FactorCountReport gos(const MatrixXd& U, int m_max);
double gos_penalty(int N, int T);

// Default m_max used when a caller asks for automatic selection.
int default_m_max(int N, int T);

}  // namespace ifepanel
