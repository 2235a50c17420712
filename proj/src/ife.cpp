#include "ifepanel/ife.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifepanel/errors.hpp"

namespace ifepanel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MatrixXd residual_matrix(const PanelData& p, const VectorXd& beta) {
  MatrixXd r = p.y;
  for (int k = 0; k < p.K(); ++k) r -= beta(k) * p.x[k];
  return r;
}

double inner(const MatrixXd& a, const MatrixXd& b) { return a.cwiseProduct(b).sum(); }

// Solves A b = c for a symmetric positive definite Gram matrix, rejecting
// numerically singular designs.
VectorXd solve_gram(const MatrixXd& A, const VectorXd& c, const char* who) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * top)
    throw Error(ErrorKind::RankDeficientDesign, std::string(who) + ": regressors collinear after transformation");
  return A.ldlt().solve(c);
}

MatrixXd gram_inverse(const MatrixXd& A) {
  return A.ldlt().solve(MatrixXd::Identity(A.rows(), A.cols()));
}

MatrixXd stack(const std::vector<MatrixXd>& xs) {
  const Eigen::Index n = xs.empty() ? 0 : xs[0].size();
  MatrixXd s(n, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) s.col(static_cast<Eigen::Index>(k)) = vec_panel(xs[k]);
  return s;
}

// Heteroskedasticity-robust covariance using Z_k = M_L X_k M_F.
MatrixXd factor_robust_vcov(const PanelData& p, const MatrixXd& F, const MatrixXd& L, const MatrixXd& e) {
  const Projector PF(F.cols() ? F : MatrixXd(p.T(), 0));
  const Projector PL(L.cols() ? L : MatrixXd(p.N(), 0));
  std::vector<MatrixXd> z(p.K());
  for (int k = 0; k < p.K(); ++k) z[k] = PL.annihilate(PF.annihilate_rows(p.x[k]));
  const MatrixXd Zs = stack(z);
  const MatrixXd D = Zs.transpose() * Zs;
  return hc_vcov(Zs, vec_panel(e), gram_inverse(D));
}

}  // namespace

EstimateResult fe_estimate(const PanelData& panel, DemeanMode mode) {
  const PanelData d = demean(panel, mode);
  const MatrixXd Xs = stack_regressors(d);
  const VectorXd ys = vec_panel(d.y);
  const OlsResult o = ols(Xs, ys);
  if (o.rank_deficient) throw Error(ErrorKind::RankDeficientDesign, "fe_estimate: demeaned regressors are collinear");
  EstimateResult r;
  switch (mode) {
    case DemeanMode::none: r.method = Method::POLS; break;
    case DemeanMode::unit: r.method = Method::FE; break;
    case DemeanMode::time: r.method = Method::TFE; break;
    case DemeanMode::two_way: r.method = Method::TWFE; break;
  }
  r.beta = o.coef;
  r.residuals = unvec_panel(o.residuals, panel.N(), panel.T());
  r.ssr = o.residuals.squaredNorm();
  r.vcov = cluster_vcov(Xs, o.residuals, gram_inverse(Xs.transpose() * Xs), panel.N(), panel.T());
  r.iterations = 0;
  r.converged = true;
  finalize_stderr(r);
  return r;
}

VectorXd beta_given_factors(const PanelData& panel, const MatrixXd& F) {
  const int K = panel.K();
  const Projector P(F.cols() ? F : MatrixXd(panel.T(), 0));
  MatrixXd A(K, K);
  VectorXd c(K);
  std::vector<MatrixXd> xt(K);
  for (int k = 0; k < K; ++k) xt[k] = P.annihilate_rows(panel.x[k]);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l <= k; ++l) A(k, l) = A(l, k) = inner(xt[k], xt[l]);
    c(k) = inner(xt[k], panel.y);
  }
  return solve_gram(A, c, "ils");
}

IlsFit ils_estimate(const PanelData& panel, const IlsOptions& opts) {
  const int N = panel.N(), T = panel.T(), K = panel.K();
  if (opts.m < 0 || opts.m > std::min(N, T) - 1)
    throw Error(ErrorKind::InvalidM, "ils_estimate: need 0 <= m <= min(N,T)-1");
  if (!(opts.tol > 0.0) || opts.max_iter < 1)
    throw Error(ErrorKind::InvalidArgument, "ils_estimate: need tol > 0 and max_iter >= 1");

  VectorXd beta;
  switch (opts.init) {
    case IlsInit::pooled_ols: beta = beta_given_factors(panel, MatrixXd(T, 0)); break;
    case IlsInit::two_way_within: beta = fe_estimate(panel, DemeanMode::two_way).beta; break;
    case IlsInit::user:
      if (opts.user_beta.size() != K) throw Error(ErrorKind::DimensionMismatch, "ils_estimate: user beta has wrong length");
      beta = opts.user_beta;
      break;
  }

  auto factor_step = [&](const VectorXd& b) {
    FactorModel fm;
    const MatrixXd R = residual_matrix(panel, b);
    if (opts.m > 0) {
      fm = principal_components(R, opts.m);
    } else {
      fm.F = MatrixXd(T, 0);
      fm.Z = MatrixXd(N, 0);
      fm.eigenvalues = VectorXd(0);
    }
    return fm;
  };
  auto ssr_of = [&](const VectorXd& b, const FactorModel& fm) {
    MatrixXd R = residual_matrix(panel, b);
    if (fm.m > 0) R -= fm.Z * fm.F.transpose();
    return R.squaredNorm();
  };

  IlsFit fit;
  FactorModel fm = factor_step(beta);
  fit.ssr_path.push_back(ssr_of(beta, fm));
  bool converged = false;
  int it = 0;
  while (it < opts.max_iter) {
    ++it;
    const VectorXd nb = beta_given_factors(panel, fm.F);
    const double change = (nb - beta).lpNorm<Eigen::Infinity>();
    beta = nb;
    fm = factor_step(beta);
    fit.ssr_path.push_back(ssr_of(beta, fm));
    if (change < opts.tol) {
      converged = true;
      break;
    }
  }

  EstimateResult& r = fit.result;
  r.method = Method::ILS;
  r.beta = beta;
  r.m_used = opts.m;
  r.iterations = it;
  r.converged = converged;
  if (!converged) r.flags.push_back("NotConverged");
  r.residuals = residual_matrix(panel, beta);
  if (fm.m > 0) r.residuals -= fm.Z * fm.F.transpose();
  r.ssr = r.residuals.squaredNorm();
  r.vcov = factor_robust_vcov(panel, fm.F, fm.Z, r.residuals);
  r.variance = "hc_defactored";
  finalize_stderr(r);
  fit.factors = fm;

  if (opts.bias_correct && converged && opts.m > 0) {
    const EstimateResult bc = ils_bias_correct(fit, panel);
    fit.result = bc;
  }
  return fit;
}

BiasTerms ils_bias_terms(const IlsFit& fit, const PanelData& panel, const BiasCorrectionOptions& o) {
  if (!fit.result.converged)
    throw Error(ErrorKind::RequiresConvergedILS, "ils_bias_correct: ILS fit did not converge");
  const int N = panel.N(), T = panel.T(), K = panel.K();
  BiasTerms bt;
  bt.b1 = bt.b2 = bt.b3 = bt.delta = VectorXd::Zero(K);
  bt.W = MatrixXd::Zero(K, K);
  const int m = fit.factors.m;
  if (m == 0 || (!o.b1 && !o.b2 && !o.b3)) return bt;

  const MatrixXd& F = fit.factors.F;  // T x m
  const MatrixXd& L = fit.factors.Z;  // N x m
  const MatrixXd& e = fit.result.residuals;
  const Projector PF(F), PL(L);
  const MatrixXd FtFi = gram_inverse(F.transpose() * F);
  const MatrixXd LtLi = gram_inverse(L.transpose() * L);
  const MatrixXd PFm = F * FtFi * F.transpose();  // T x T
  const double nt = static_cast<double>(N) * T;

  std::vector<MatrixXd> z(K);
  for (int k = 0; k < K; ++k) z[k] = PL.annihilate(PF.annihilate_rows(panel.x[k]));
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l) bt.W(k, l) = inner(z[k], panel.x[l]) / nt;

  const int M = o.bandwidth >= 0 ? o.bandwidth
                                  : std::max(1, static_cast<int>(std::floor(std::pow(T, 0.25))));
  VectorXd s1(N), s2(T);
  if (o.homoskedastic) {
    s1.setConstant(e.squaredNorm() / nt);
    s2.setConstant(e.squaredNorm() / nt);
  } else {
    s1 = e.rowwise().squaredNorm() / T;
    s2 = e.colwise().squaredNorm().transpose() / N;
  }
  for (int k = 0; k < K; ++k) {
    const MatrixXd& X = panel.x[k];
    if (o.b1) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t)
        for (int s = t + 1; s <= std::min(T - 1, t + M); ++s)
          acc += PFm(t, s) * e.col(t).dot(X.col(s));
      bt.b1(k) = acc / N;
    }
    if (o.b2 && !o.homoskedastic) {
      // Tr[S1 M_L X F (F'F)^-1 (L'L)^-1 L']
      const MatrixXd A = PL.annihilate(X) * F * FtFi * LtLi;  // N x m
      double acc = 0.0;
      for (int i = 0; i < N; ++i) acc += s1(i) * A.row(i).dot(L.row(i));
      bt.b2(k) = acc;
    }
    if (o.b3 && !o.homoskedastic) {
      // Tr[S2 M_F X' L (L'L)^-1 (F'F)^-1 F']
      const MatrixXd B = PF.annihilate(X.transpose()) * L * LtLi * FtFi;  // T x m
      double acc = 0.0;
      for (int t = 0; t < T; ++t) acc += s2(t) * B.row(t).dot(F.row(t));
      bt.b3(k) = acc;
    }
  }
  const VectorXd total = bt.b1 / T + bt.b2 / N + bt.b3 / T;
  bt.delta = bt.W.fullPivLu().solve(total);
  return bt;
}

EstimateResult ils_bias_correct(const IlsFit& fit, const PanelData& panel, const BiasCorrectionOptions& o) {
  const BiasTerms bt = ils_bias_terms(fit, panel, o);
  if (!o.b1 && !o.b2 && !o.b3) return fit.result;
  EstimateResult r = fit.result;
  r.method = Method::ILS_BC;
  if (fit.factors.m == 0) return r;
  r.beta = fit.result.beta + bt.delta;
  r.residuals = residual_matrix(panel, r.beta) - fit.factors.Z * fit.factors.F.transpose();
  r.ssr = r.residuals.squaredNorm();
  return r;
}

EstimateResult ccep_estimate(const PanelData& panel, const CcepOptions& opts) {
  const int T0 = panel.T();
  int lags = 0;
  if (opts.dynamic) {
    if (T0 < 8) throw Error(ErrorKind::InvalidArgument, "dynamic CCEP needs T >= 8");
    lags = opts.lags >= 0 ? opts.lags : cce_lag_order(T0);
  }
  const MatrixXd csa = cross_section_averages(panel, true, lags, opts.boundary);
  const int t0 = (opts.boundary == LagBoundary::trim) ? lags : 0;
  const PanelData p = t0 > 0 ? drop_leading_periods(panel, t0) : panel;
  const int N = p.N(), T = p.T(), K = p.K();

  auto rows_of = [&](const MatrixXd& a, const char* what) -> MatrixXd {
    if (a.size() == 0) return MatrixXd(T, 0);
    if (a.rows() != T0) throw Error(ErrorKind::DimensionMismatch, std::string("ccep: ") + what + " must have T rows");
    return a.bottomRows(T);
  };
  const MatrixXd D = rows_of(opts.observed_factors, "observed factors");
  const MatrixXd E = rows_of(opts.extra_csa, "extra cross-section averages");
  MatrixXd W(T, D.cols() + csa.cols() + E.cols());
  W << D, csa, E;
  if (W.cols() >= T) throw Error(ErrorKind::TooManyCsaColumns, "ccep: augmentation columns must be fewer than T");

  EstimateResult r;
  r.method = opts.dynamic ? Method::DCCEP : Method::CCEP;
  const Projector M(W);
  if (M.rank() < W.cols()) r.flags.push_back("CsaRankDeficient");

  std::vector<int> keep;
  std::vector<MatrixXd> xt(K);
  for (int k = 0; k < K; ++k) {
    xt[k] = M.annihilate_rows(p.x[k]);
    if (xt[k].norm() > 1e-9 * std::max(1.0, p.x[k].norm())) keep.push_back(k);
  }
  if (keep.empty()) throw Error(ErrorKind::RankDeficientDesign, "ccep: every regressor is annihilated");
  if (static_cast<int>(keep.size()) < K) r.flags.push_back("DroppedAnnihilatedColumns");
  const int Kk = static_cast<int>(keep.size());
  const MatrixXd yt = M.annihilate_rows(p.y);
  MatrixXd A(Kk, Kk);
  VectorXd c(Kk);
  for (int a = 0; a < Kk; ++a) {
    for (int b = 0; b <= a; ++b) A(a, b) = A(b, a) = inner(xt[keep[a]], xt[keep[b]]);
    c(a) = inner(xt[keep[a]], yt);
  }
  const VectorXd bk = solve_gram(A, c, "ccep");
  r.beta = VectorXd::Constant(K, kNaN);
  MatrixXd e = yt;
  for (int a = 0; a < Kk; ++a) {
    r.beta(keep[a]) = bk(a);
    e -= bk(a) * xt[keep[a]];
  }
  r.residuals = e;
  r.ssr = e.squaredNorm();
  r.iterations = 0;
  r.converged = true;

  // Nonparametric variance from unit-specific slopes; cluster sandwich otherwise.
  MatrixXd Vk;
  bool nonparametric = N >= 10 && T - M.rank() > Kk;
  if (nonparametric) {
    std::vector<MatrixXd> Gi(N);
    std::vector<VectorXd> bi(N);
    MatrixXd Psi = MatrixXd::Zero(Kk, Kk);
    for (int i = 0; i < N && nonparametric; ++i) {
      MatrixXd Xi(T, Kk);
      for (int a = 0; a < Kk; ++a) Xi.col(a) = xt[keep[a]].row(i).transpose();
      Gi[i] = Xi.transpose() * Xi / T;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gi[i], Eigen::EigenvaluesOnly);
      const double top = es.eigenvalues().maxCoeff();
      if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * top) {
        nonparametric = false;
        break;
      }
      bi[i] = Gi[i].ldlt().solve(Xi.transpose() * yt.row(i).transpose() / T);
      Psi += Gi[i];
    }
    if (nonparametric) {
      Psi /= N;
      VectorXd bmg = VectorXd::Zero(Kk);
      for (int i = 0; i < N; ++i) bmg += bi[i];
      bmg /= N;
      MatrixXd R = MatrixXd::Zero(Kk, Kk);
      for (int i = 0; i < N; ++i) {
        const VectorXd v = Gi[i] * (bi[i] - bmg);
        R += v * v.transpose();
      }
      R /= (N - 1.0);
      const MatrixXd Pi = gram_inverse(Psi);
      Vk = Pi * R * Pi / N;
      Vk = 0.5 * (Vk + Vk.transpose());
      r.variance = "cce_nonparametric";
    }
  }
  if (!nonparametric) {
    std::vector<MatrixXd> xk;
    for (int k : keep) xk.push_back(xt[k]);
    const MatrixXd Xs = stack(xk);
    Vk = cluster_vcov(Xs, vec_panel(e), gram_inverse(A), N, T);
    r.variance = "cluster_unit";
  }
  r.vcov = MatrixXd::Constant(K, K, kNaN);
  for (int a = 0; a < Kk; ++a)
    for (int b = 0; b < Kk; ++b) r.vcov(keep[a], keep[b]) = Vk(a, b);
  r.stderr_.resize(K);
  for (int k = 0; k < K; ++k) r.stderr_(k) = std::isnan(r.vcov(k, k)) ? kNaN : std::sqrt(std::max(r.vcov(k, k), 0.0));
  return r;
}

namespace {

// IV fit with instruments zk (N x T each): beta = (sum Z'X)^{-1} sum Z'y.
EstimateResult iv_fit(const PanelData& p, const std::vector<MatrixXd>& zk, const Projector* resid_proj,
                      Method method) {
  const int K = p.K();
  MatrixXd A(K, K);
  VectorXd c(K);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) A(k, l) = inner(zk[k], p.x[l]);
    c(k) = inner(zk[k], p.y);
  }
  Eigen::JacobiSVD<MatrixXd> svd(A);
  const VectorXd& s = svd.singularValues();
  double scale = 0.0;  // instruments annihilated to rounding noise still give a well-conditioned A
  for (int k = 0; k < K; ++k) scale = std::max(scale, p.x[k].squaredNorm());
  if (!(s(0) > 0.0) || s(s.size() - 1) <= 1e-10 * std::max(s(0), scale))
    throw Error(ErrorKind::WeakInstrument, "tsiv: defactored regressors are nearly singular");
  EstimateResult r;
  r.method = method;
  const Eigen::FullPivLU<MatrixXd> lu(A);
  r.beta = lu.solve(c);
  MatrixXd e = residual_matrix(p, r.beta);
  if (resid_proj) e = resid_proj->annihilate_rows(e);
  r.residuals = e;
  r.ssr = e.squaredNorm();
  r.vcov = cluster_vcov(stack(zk), vec_panel(e), lu.inverse(), p.N(), p.T());
  r.variance = "cluster_unit";
  finalize_stderr(r);
  return r;
}

TsivFit tsiv_from_factors(const PanelData& panel, const MatrixXd& Fx, const MatrixXd* F_given,
                          int m, int m_max) {
  const int T = panel.T(), K = panel.K();
  TsivFit out;
  out.Fx = Fx;
  out.m_x = static_cast<int>(Fx.cols());
  const Projector Px(Fx.cols() ? Fx : MatrixXd(T, 0));
  std::vector<MatrixXd> xt(K);
  for (int k = 0; k < K; ++k) xt[k] = Px.annihilate_rows(panel.x[k]);
  out.fsiv = iv_fit(panel, xt, nullptr, Method::FSIV);
  out.fsiv.m_used = out.m_x;

  MatrixXd F;
  if (F_given) {
    F = *F_given;
  } else {
    const MatrixXd u = residual_matrix(panel, out.fsiv.beta);
    if (m < 0) m = select_factor_count(u, FactorMethod::ER, m_max).m_hat;
    F = m > 0 ? principal_components(u, m).F : MatrixXd(T, 0);
  }
  out.F = F;
  out.m = static_cast<int>(F.cols());
  const Projector Pf(F.cols() ? F : MatrixXd(T, 0));
  std::vector<MatrixXd> xtt(K);
  for (int k = 0; k < K; ++k) xtt[k] = Pf.annihilate_rows(xt[k]);
  out.tsiv = iv_fit(panel, xtt, &Pf, Method::TSIV);
  out.tsiv.m_used = out.m;
  return out;
}

}  // namespace

TsivFit tsiv_estimate(const PanelData& panel, const TsivOptions& opts) {
  const int N = panel.N(), T = panel.T(), K = panel.K();
  const int lim = std::min(N, T) - 1;
  if (opts.m_x > lim || opts.m > lim) throw Error(ErrorKind::InvalidM, "tsiv: need m_x, m <= min(N,T)-1");
  MatrixXd Xst(static_cast<Eigen::Index>(N) * K, T);
  for (int k = 0; k < K; ++k) Xst.middleRows(static_cast<Eigen::Index>(k) * N, N) = panel.x[k];
  const int m_max = opts.m_max > 0 ? opts.m_max : default_m_max(N, T);
  int m_x = opts.m_x;
  if (m_x < 0) m_x = select_factor_count(Xst, FactorMethod::ER, std::min(m_max, lim)).m_hat;
  const MatrixXd Fx = m_x > 0 ? principal_components(Xst, m_x).F : MatrixXd(T, 0);
  return tsiv_from_factors(panel, Fx, nullptr, opts.m, std::min(m_max, lim));
}

TsivFit tsiv_known_factors(const PanelData& panel, const MatrixXd& Fx, const MatrixXd& F) {
  if ((Fx.cols() && Fx.rows() != panel.T()) || (F.cols() && F.rows() != panel.T()))
    throw Error(ErrorKind::DimensionMismatch, "tsiv: factor matrices must have T rows");
  const MatrixXd Fg = F.cols() ? F : MatrixXd(panel.T(), 0);
  return tsiv_from_factors(panel, Fx.cols() ? Fx : MatrixXd(panel.T(), 0), &Fg, -1, 1);
}

FactorCountReport select_factor_count(const MatrixXd& U, FactorMethod method, int m_max) {
  switch (method) {
    case FactorMethod::PC1: return bai_ng(U, m_max, BaiNgVariant::PC, 1);
    case FactorMethod::PC2: return bai_ng(U, m_max, BaiNgVariant::PC, 2);
    case FactorMethod::PC3: return bai_ng(U, m_max, BaiNgVariant::PC, 3);
    case FactorMethod::IC1: return bai_ng(U, m_max, BaiNgVariant::IC, 1);
    case FactorMethod::IC2: return bai_ng(U, m_max, BaiNgVariant::IC, 2);
    case FactorMethod::IC3: return bai_ng(U, m_max, BaiNgVariant::IC, 3);
    case FactorMethod::ER: return er_gr(U, m_max).first;
    case FactorMethod::GR: return er_gr(U, m_max).second;
    case FactorMethod::ED: return onatski_ed(U, m_max);
    case FactorMethod::GOS: return gos(U, m_max);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown factor selection method");
}

double nnr_objective(const PanelData& panel, const VectorXd& beta, const MatrixXd& gamma, double psi) {
  const double nt = static_cast<double>(panel.N()) * panel.T();
  const MatrixXd R = residual_matrix(panel, beta) - gamma;
  Eigen::BDCSVD<MatrixXd> svd(gamma);
  return R.squaredNorm() / (2.0 * nt) + psi / std::sqrt(nt) * svd.singularValues().sum();
}

PnnrFit pnnr_estimate(const PanelData& panel, const PnnrOptions& opts) {
  const int N = panel.N(), T = panel.T(), K = panel.K();
  const double nt = static_cast<double>(N) * T;
  if (opts.post_iterations < 2) throw Error(ErrorKind::InvalidArgument, "pnnr: post_iterations must be >= 2");
  const int m_max = opts.m_max > 0 ? opts.m_max : default_m_max(N, T);

  const MatrixXd Xs = stack_regressors(panel);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Xs);
  if (cod.rank() < K) throw Error(ErrorKind::RankDeficientDesign, "pnnr: regressors are collinear");
  const MatrixXd pinv = cod.pseudoInverse();
  auto beta_given_gamma = [&](const MatrixXd& G) -> VectorXd { return pinv * vec_panel(panel.y - G); };

  PnnrFit fit;
  VectorXd beta = beta_given_gamma(MatrixXd::Zero(N, T));
  std::vector<double> grid = opts.psi_grid;
  if (grid.empty()) {
    if (opts.grid_size < 1 || !(opts.grid_span > 0.0) || opts.grid_span > 1.0)
      throw Error(ErrorKind::InvalidGrid, "pnnr: bad default grid parameters");
    Eigen::BDCSVD<MatrixXd> svd(residual_matrix(panel, beta));
    const double top = svd.singularValues()(0) / std::sqrt(nt);
    for (int j = 0; j < opts.grid_size; ++j) {
      const double frac = opts.grid_size == 1 ? 0.0 : static_cast<double>(j) / (opts.grid_size - 1);
      grid.push_back(top * std::pow(opts.grid_span, frac));
    }
  } else {
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (!(grid[j] > 0.0) || !std::isfinite(grid[j]) || (j > 0 && !(grid[j] < grid[j - 1])))
        throw Error(ErrorKind::InvalidGrid, "pnnr: psi grid must be positive and strictly decreasing");
  }
  fit.psi_grid = grid;

  MatrixXd gamma = MatrixXd::Zero(N, T);
  bool inner_ok = true;
  for (double psi : grid) {
    const double tau = psi * std::sqrt(nt);
    inner_ok = false;
    for (int it = 0; it < opts.inner_max_iter; ++it) {
      gamma = singular_value_threshold(residual_matrix(panel, beta), tau);
      const VectorXd nb = beta_given_gamma(gamma);
      const double change = (nb - beta).lpNorm<Eigen::Infinity>();
      beta = nb;
      fit.objective_path.push_back(nnr_objective(panel, beta, gamma, psi));
      if (change < opts.inner_tol) {
        inner_ok = true;
        break;
      }
    }
  }
  fit.nnr_converged = inner_ok;
  fit.beta_nnr = beta;

  fit.selection = select_factor_count(residual_matrix(panel, beta), opts.selector, m_max);
  const int m = fit.selection.m_hat;
  fit.m_hat = m;

  auto factors_of = [&](const VectorXd& b) {
    FactorModel fm;
    if (m > 0) {
      fm = principal_components(residual_matrix(panel, b), m);
    } else {
      fm.F = MatrixXd(T, 0);
      fm.Z = MatrixXd(N, 0);
    }
    return fm;
  };
  bool converged = false;
  int s = 0;
  FactorModel fm;
  while (s < opts.post_iterations) {
    ++s;
    fm = factors_of(beta);
    const VectorXd nb = beta_given_factors(panel, fm.F);
    const double change = (nb - beta).lpNorm<Eigen::Infinity>();
    beta = nb;
    if (s >= 2 && change < opts.tol) {
      converged = true;
      break;
    }
  }
  fm = factors_of(beta);

  EstimateResult& r = fit.result;
  r.method = Method::PNNR;
  r.beta = beta;
  r.m_used = m;
  r.iterations = s;
  r.converged = converged;
  if (!converged) r.flags.push_back("NotConverged");
  if (!inner_ok) r.flags.push_back("NNRNotConverged");
  r.residuals = residual_matrix(panel, beta);
  if (m > 0) r.residuals -= fm.Z * fm.F.transpose();
  r.ssr = r.residuals.squaredNorm();
  r.vcov = factor_robust_vcov(panel, fm.F, fm.Z, r.residuals);
  r.variance = "hc_defactored";
  finalize_stderr(r);
  fit.factors = fm;
  return fit;
}

}  // namespace ifepanel
