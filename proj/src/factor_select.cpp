#include "ifepanel/factor_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifepanel/errors.hpp"
#include "ifepanel/numlin.hpp"

namespace ifepanel {

std::string_view to_string(FactorMethod m) {
  switch (m) {
    case FactorMethod::PC1: return "PC1";
    case FactorMethod::PC2: return "PC2";
    case FactorMethod::PC3: return "PC3";
    case FactorMethod::IC1: return "IC1";
    case FactorMethod::IC2: return "IC2";
    case FactorMethod::IC3: return "IC3";
    case FactorMethod::ER: return "ER";
    case FactorMethod::GR: return "GR";
    case FactorMethod::ED: return "ED";
    case FactorMethod::GOS: return "GOS";
  }
  return "?";
}

int default_m_max(int N, int T) { return std::max(1, std::min(8, std::min(N, T) - 1)); }

double bai_ng_penalty(int N, int T, int penalty) {
  const double n = N, t = T, nt = n * t, c2 = std::min(n, t);
  switch (penalty) {
    case 1: return (n + t) / nt * std::log(nt / (n + t));
    case 2: return (n + t) / nt * std::log(c2);
    case 3: return std::log(c2) / c2;
  }
  throw Error(ErrorKind::InvalidArgument, "bai_ng: penalty must be 1, 2 or 3");
}

FactorCountReport bai_ng_from_eigenvalues(const VectorXd& eigs, int N, int T, int m_max,
                                          BaiNgVariant variant, int penalty, BaiNgScale scale) {
  if (m_max < 1 || m_max >= std::min(N, T) || m_max >= eigs.size())
    throw Error(ErrorKind::InvalidMMax, "bai_ng: need 1 <= m_max < min(N,T)");
  const double g = bai_ng_penalty(N, T, penalty);
  const double s = scale == BaiNgScale::nt ? 1.0 : static_cast<double>(T);
  // V(m) = sum of the eigenvalues beyond m (eigenvalues of UU'/(NT)).
  VectorXd V(m_max + 1);
  double tail = eigs.sum();
  for (int m = 0; m <= m_max; ++m) {
    V(m) = std::max(tail, 0.0) * s;
    if (m < eigs.size()) tail -= eigs(m);
  }
  FactorCountReport r;
  r.m_max = m_max;
  r.threshold = g;
  r.criterion_path.resize(m_max + 1);
  const double sigma2 = V(m_max);
  constexpr double floor = std::numeric_limits<double>::min();
  for (int m = 0; m <= m_max; ++m) {
    r.criterion_path(m) = variant == BaiNgVariant::PC ? V(m) + m * sigma2 * g
                                                      : std::log(std::max(V(m), floor)) + m * g;
  }
  Eigen::Index arg;
  r.criterion_path.minCoeff(&arg);
  r.m_hat = static_cast<int>(arg);
  static constexpr FactorMethod pc[] = {FactorMethod::PC1, FactorMethod::PC2, FactorMethod::PC3};
  static constexpr FactorMethod ic[] = {FactorMethod::IC1, FactorMethod::IC2, FactorMethod::IC3};
  r.method = variant == BaiNgVariant::PC ? pc[penalty - 1] : ic[penalty - 1];
  return r;
}

FactorCountReport bai_ng(const MatrixXd& U, int m_max, BaiNgVariant variant, int penalty,
                         BaiNgScale scale) {
  const int N = static_cast<int>(U.rows()), T = static_cast<int>(U.cols());
  if (m_max < 1 || m_max >= std::min(N, T))
    throw Error(ErrorKind::InvalidMMax, "bai_ng: need 1 <= m_max < min(N,T)");
  bai_ng_penalty(N, T, penalty);
  return bai_ng_from_eigenvalues(panel_eigenvalues(U), N, T, m_max, variant, penalty, scale);
}

std::pair<FactorCountReport, FactorCountReport> er_gr_from_eigenvalues(const VectorXd& eigs,
                                                                       int m_max, int min_nt) {
  if (m_max < 1 || m_max >= min_nt || m_max + 1 >= eigs.size() + 1)
    throw Error(ErrorKind::InvalidMMax, "er_gr: need 1 <= m_max < min(N,T)");
  const Eigen::Index n = eigs.size();
  const double top = n > 0 ? std::max(eigs(0), 0.0) : 0.0;
  const double eps = std::max(top * 1e-14, std::numeric_limits<double>::min());
  // lam(0) is the mock eigenvalue, lam(j) = j-th largest for j >= 1.
  VectorXd lam(n + 1);
  lam(0) = eigs.sum() / std::log(static_cast<double>(std::max(min_nt, 3)));
  for (Eigen::Index j = 0; j < n; ++j) lam(j + 1) = std::max(eigs(j), eps);
  lam(0) = std::max(lam(0), eps);
  // V(k) = sum_{j>k} lam_j for k = -1..n, stored at k+1.
  VectorXd V(n + 2);
  V(n + 1) = 0.0;
  for (Eigen::Index k = n; k >= 0; --k) V(k) = V(k + 1) + lam(k);
  auto Vk = [&](int k) { return std::max(V(k + 1), eps); };

  FactorCountReport er, gr;
  er.method = FactorMethod::ER;
  gr.method = FactorMethod::GR;
  er.m_max = gr.m_max = m_max;
  er.criterion_path.resize(m_max + 1);
  gr.criterion_path.resize(m_max + 1);
  for (int k = 0; k <= m_max; ++k) {
    const double next = k + 1 <= n ? lam(k + 1) : eps;
    er.criterion_path(k) = lam(k) / next;
    const double den = std::log(Vk(k) / Vk(k + 1));
    const double num = std::log(Vk(k - 1) / Vk(k));
    gr.criterion_path(k) = den > 0.0 ? num / den : 0.0;
  }
  Eigen::Index a;
  er.criterion_path.maxCoeff(&a);
  er.m_hat = static_cast<int>(a);
  gr.criterion_path.maxCoeff(&a);
  gr.m_hat = static_cast<int>(a);
  return {er, gr};
}

std::pair<FactorCountReport, FactorCountReport> er_gr(const MatrixXd& U, int m_max) {
  const int min_nt = static_cast<int>(std::min(U.rows(), U.cols()));
  if (m_max < 1 || m_max >= min_nt) throw Error(ErrorKind::InvalidMMax, "er_gr: need 1 <= m_max < min(N,T)");
  return er_gr_from_eigenvalues(panel_eigenvalues(U), m_max, min_nt);
}

FactorCountReport onatski_ed_from_eigenvalues(const VectorXd& eigs, int m_max) {
  const int n = static_cast<int>(eigs.size());
  if (m_max < 1 || m_max + 5 >= n)
    throw Error(ErrorKind::InvalidMMax, "onatski_ed: need m_max + 5 < min(N,T)");
  auto lam = [&](int j) { return eigs(j - 1); };  // 1-based
  auto calibrate = [&](int j) {
    // slope of lam_j..lam_{j+4} on (j-1)^{2/3}..(j+3)^{2/3}
    double xm = 0, ym = 0;
    for (int h = 0; h < 5; ++h) {
      xm += std::pow(j - 1 + h, 2.0 / 3.0);
      ym += lam(j + h);
    }
    xm /= 5;
    ym /= 5;
    double sxy = 0, sxx = 0;
    for (int h = 0; h < 5; ++h) {
      const double dx = std::pow(j - 1 + h, 2.0 / 3.0) - xm;
      sxy += dx * (lam(j + h) - ym);
      sxx += dx * dx;
    }
    return 2.0 * std::abs(sxy / sxx);
  };
  auto count = [&](double delta) {
    int m = 0;
    for (int k = 1; k <= m_max; ++k)
      if (lam(k) - lam(k + 1) >= delta) m = k;
    return m;
  };
  int j = m_max + 2;
  double delta = calibrate(j);
  int m_hat = count(delta);
  for (int it = 0; it < 100; ++it) {
    const int jn = m_hat + 2;
    if (jn == j) break;
    j = jn;
    delta = calibrate(j);
    m_hat = count(delta);
  }
  FactorCountReport r;
  r.method = FactorMethod::ED;
  r.m_max = m_max;
  r.m_hat = m_hat;
  r.threshold = delta;
  r.criterion_path = VectorXd::Zero(m_max + 1);
  for (int k = 1; k <= m_max; ++k) r.criterion_path(k) = lam(k) - lam(k + 1) - delta;
  return r;
}

FactorCountReport onatski_ed(const MatrixXd& U, int m_max) {
  const int min_nt = static_cast<int>(std::min(U.rows(), U.cols()));
  if (m_max < 1 || m_max + 5 >= min_nt)
    throw Error(ErrorKind::InvalidMMax, "onatski_ed: need m_max + 5 < min(N,T)");
  return onatski_ed_from_eigenvalues(panel_eigenvalues(U), m_max);
}

double gos_penalty(int N, int T) {
  const double n = N, t = T, s = std::pow(std::sqrt(n) + std::sqrt(t), 2.0);
  return s / (n * t) * std::log(n * t / s);
}

FactorCountReport gos(const MatrixXd& U, int m_max) {
  const int N = static_cast<int>(U.rows()), T = static_cast<int>(U.cols());
  if (N <= T) throw Error(ErrorKind::RequiresNGreaterT, "gos: requires N > T");
  if (m_max < 1 || m_max >= T) throw Error(ErrorKind::InvalidMMax, "gos: need 1 <= m_max < T");
  MatrixXd S = U.colwise() - U.rowwise().mean();
  for (int i = 0; i < N; ++i) {
    const double sd = std::sqrt(S.row(i).squaredNorm() / T);
    if (sd > 0.0) S.row(i) /= sd;
  }
  const VectorXd mu = panel_eigenvalues(S);
  const double g = gos_penalty(N, T);
  FactorCountReport r;
  r.method = FactorMethod::GOS;
  r.m_max = m_max;
  r.threshold = g;
  r.criterion_path.resize(m_max + 1);
  for (int k = 1; k <= m_max + 1; ++k) r.criterion_path(k - 1) = mu(k - 1) - g;
  r.m_hat = m_max;
  for (int k = 1; k <= m_max + 1; ++k)
    if (r.criterion_path(k - 1) < 0.0) {
      r.m_hat = k - 1;
      break;
    }
  return r;
}

}  // namespace ifepanel
