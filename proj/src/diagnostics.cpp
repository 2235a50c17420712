#include "ifepanel/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <vector>

#include "ifepanel/errors.hpp"
#include "ifepanel/estimate.hpp"
#include "ifepanel/factor_select.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/parallel.hpp"
#include "ifepanel/rng.hpp"

namespace ifepanel {

double normal_two_sided_p(double z) {
  if (!std::isfinite(z)) return std::isnan(z) ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  const boost::math::normal_distribution<double> nd;
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z))), 0.0, 1.0);
}

namespace {

struct Standardized {
  MatrixXd S;  // rows centred and scaled to unit norm
  int excluded = 0;
};

Standardized standardize_rows(const MatrixXd& U) {
  if (U.rows() < 2 || U.cols() < 2) throw Error(ErrorKind::DegenerateRows, "need N >= 2 and T >= 2");
  const MatrixXd C = U.colwise() - U.rowwise().mean();
  std::vector<Eigen::Index> keep;
  const double scale = std::max(1.0, U.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    if (C.row(i).norm() > 1e-13 * scale * std::sqrt(static_cast<double>(C.cols()))) keep.push_back(i);
  if (keep.size() < 2) throw Error(ErrorKind::DegenerateRows, "fewer than two rows with positive variance");
  Standardized s;
  s.excluded = static_cast<int>(C.rows() - static_cast<Eigen::Index>(keep.size()));
  s.S.resize(static_cast<Eigen::Index>(keep.size()), C.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) s.S.row(r) = C.row(keep[r]) / C.row(keep[r]).norm();
  return s;
}

double cd_from_corr(const MatrixXd& R, int T) {
  const double N = static_cast<double>(R.rows());
  const double pair_sum = (R.sum() - R.trace()) / 2.0;
  return std::sqrt(2.0 * T / (N * (N - 1.0))) * pair_sum;
}

}  // namespace

MatrixXd row_correlations(const MatrixXd& U) {
  const Standardized s = standardize_rows(U);
  return s.S * s.S.transpose();
}

TestResult cd_test(const MatrixXd& U) {
  const Standardized s = standardize_rows(U);
  const MatrixXd R = s.S * s.S.transpose();
  TestResult r;
  r.method = TestMethod::CD;
  r.statistic = cd_from_corr(R, static_cast<int>(U.cols()));
  r.p_value = normal_two_sided_p(r.statistic);
  r.aux["excluded_rows"] = s.excluded;
  r.aux["N"] = static_cast<double>(R.rows());
  return r;
}

TestResult cdw_test(const MatrixXd& U, const CdwOptions& opts) {
  if (opts.reps < 30) throw Error(ErrorKind::InvalidArgument, "cdw: reps must be at least 30");
  const Standardized s = standardize_rows(U);
  const MatrixXd R = s.S * s.S.transpose();
  const Eigen::Index N = R.rows();
  const int T = static_cast<int>(U.cols());
  const int reps = opts.reps;
  MatrixXd Wt(N, reps);
  const CounterRng root(opts.seed);
  for (int r = 0; r < reps; ++r) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(r));
    for (Eigen::Index i = 0; i < N; ++i) Wt(i, r) = opts.force_unit_weights ? 1.0 : rng.rademacher();
  }
  const double scale = std::sqrt(2.0 * T / (static_cast<double>(N) * (N - 1.0)));
  double sum_cd = 0.0, sum_cd2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const VectorXd w = Wt.col(r);
    const double cd = scale * (w.dot(R * w) - w.cwiseAbs2().dot(R.diagonal())) / 2.0;
    sum_cd += cd;
    sum_cd2 += cd * cd;
  }
  // kappa_rs = ((sum_i w_ri w_si)^2 - N) / (N(N-1)), kappa_rr = 1; summed via the N x N Gram
  const MatrixXd B = Wt * Wt.transpose();
  const double nn = static_cast<double>(N) * (N - 1.0);
  const double ksum = (B.squaredNorm() - static_cast<double>(reps) * reps * N) / nn;
  TestResult out;
  out.method = TestMethod::CDw;
  out.statistic = sum_cd / std::sqrt(ksum);
  out.p_value = normal_two_sided_p(out.statistic);
  out.aux["reps"] = reps;
  out.aux["mean_cd_draw"] = sum_cd / reps;
  out.aux["sd_cd_draw"] = std::sqrt(std::max(0.0, (sum_cd2 - sum_cd * sum_cd / reps) / (reps - 1.0)));
  out.aux["kappa_mean"] = ksum / (static_cast<double>(reps) * reps);
  out.aux["excluded_rows"] = s.excluded;
  return out;
}

TestResult cdw_plus(const MatrixXd& U, const CdwOptions& opts, ScreenThreshold threshold) {
  TestResult base = cdw_test(U, opts);
  const MatrixXd R = row_correlations(U);
  const double N = static_cast<double>(R.rows()), T = static_cast<double>(U.cols());
  const double thr = threshold == ScreenThreshold::printed ? 2.0 * std::sqrt(std::log(N) * T)
                                                           : 2.0 * std::sqrt(std::log(N) / T);
  double mass = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(R(i, j)) > thr) {
        mass += std::abs(R(i, j));
        ++count;
      }
  TestResult out = base;
  out.method = TestMethod::CDwPlus;
  out.statistic = base.statistic + mass;
  out.p_value = normal_two_sided_p(out.statistic);
  out.aux["cdw"] = base.statistic;
  out.aux["screened_pairs"] = count;
  out.aux["screened_mass"] = mass;
  out.aux["threshold"] = thr;
  return out;
}

double cd_star_theta(const MatrixXd& L, const VectorXd& s) {
  const Eigen::Index N = L.rows();
  if (L.cols() == 0) return 0.0;
  MatrixXd Phi = L;
  for (Eigen::Index i = 0; i < N; ++i) Phi.row(i) /= s(i);
  const VectorXd pbar = Phi.colwise().mean().transpose();
  const MatrixXd G = Phi.transpose() * Phi / static_cast<double>(N);
  return pbar.dot(G.completeOrthogonalDecomposition().solve(pbar));
}

TestResult cd_star(const MatrixXd& U, const CdStarOptions& opts) {
  const int N = static_cast<int>(U.rows()), T = static_cast<int>(U.cols());
  const int lim = std::min(N, T) - 1;
  if (opts.m > lim) throw Error(ErrorKind::InvalidM, "cd_star: need m <= min(N,T)-1");
  int m = opts.m;
  if (m < 0) m = lim >= 1 ? er_gr(U, default_m_max(N, T)).first.m_hat : 0;
  MatrixXd E = U;
  double theta = 0.0;
  if (m > 0) {
    const FactorModel fm = principal_components(U, m);
    E = U - fm.Z * fm.F.transpose();
    VectorXd sd(N);
    for (int i = 0; i < N; ++i) sd(i) = std::sqrt(E.row(i).squaredNorm() / T);
    if (sd.minCoeff() <= 0.0) throw Error(ErrorKind::DegenerateRows, "cd_star: defactored row without variance");
    theta = cd_star_theta(fm.Z, sd);
  }
  if (opts.theta_override) theta = *opts.theta_override;
  if (std::abs(1.0 - theta) < 1e-6) throw Error(ErrorKind::DegenerateTheta, "cd_star: theta too close to one");
  const TestResult cd = cd_test(E);
  TestResult r;
  r.method = TestMethod::CDStar;
  r.statistic = (cd.statistic + std::sqrt(T / 2.0) * theta) / (1.0 - theta);
  r.p_value = normal_two_sided_p(r.statistic);
  r.aux["theta"] = theta;
  r.aux["m"] = m;
  r.aux["cd"] = cd.statistic;
  return r;
}

ExponentEstimate alpha_observed(const MatrixXd& X) {
  const double N = static_cast<double>(X.rows());
  if (X.rows() < 4) throw Error(ErrorKind::InvalidArgument, "alpha_observed: need N >= 4");
  const VectorXd xbar = X.colwise().mean().transpose();
  const double var = (xbar.array() - xbar.mean()).square().mean();
  if (!(var > 0.0)) throw Error(ErrorKind::DegenerateCSA, "alpha_observed: cross-section average has no variance");
  ExponentEstimate e;
  e.method = ExponentEstimate::Kind::observed;
  e.alpha = 1.0 + 0.5 * std::log(var) / std::log(N);
  e.aux["var_csa"] = var;
  return e;
}

namespace {

double alpha_residual_point(const MatrixXd& U, double thr, double* quad) {
  const MatrixXd R = row_correlations(U);
  const double N = static_cast<double>(R.rows());
  double q = N;
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(R(i, j)) > thr) q += 2.0 * R(i, j);
  if (quad) *quad = q;
  // an exactly cancelling form leaves only rounding noise
  if (!(q > 64.0 * std::numeric_limits<double>::epsilon() * N))
    throw Error(ErrorKind::NegativeQuadForm, "alpha_residual: e'De <= 0");
  return std::log(q) / (2.0 * std::log(N));
}

}  // namespace

ExponentEstimate alpha_residual(const MatrixXd& U, const AlphaResidualOptions& opts) {
  const double N = static_cast<double>(U.rows()), T = static_cast<double>(U.cols());
  if (!(opts.sig > 0.0 && opts.sig < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha_residual: sig must lie in (0,1)");
  if (opts.bootstrap_reps < 0) throw Error(ErrorKind::InvalidArgument, "alpha_residual: negative bootstrap count");
  const boost::math::normal_distribution<double> nd;
  const double cv = boost::math::quantile(nd, 1.0 - opts.sig / (N * (N - 1.0)));
  const double thr = cv / std::sqrt(T);
  if (thr >= 1.0) throw Error(ErrorKind::InvalidArgument, "alpha_residual: T too small for the screening threshold");
  ExponentEstimate e;
  e.method = ExponentEstimate::Kind::residual;
  double quad = 0.0;
  e.alpha = alpha_residual_point(U, thr, &quad);
  e.aux["cv"] = cv;
  e.aux["threshold"] = thr;
  e.aux["sig"] = opts.sig;
  e.aux["quad_form"] = quad;
  if (opts.bootstrap_reps > 0) {
    const int B = opts.bootstrap_reps;
    std::vector<double> draws(B, std::numeric_limits<double>::quiet_NaN());
    const CounterRng root(opts.seed);
    const Eigen::Index n = U.rows();
    parallel_for(static_cast<std::size_t>(B), opts.threads, [&](std::size_t b) {
      CounterRng rng = root.split(b);
      MatrixXd Ub(n, U.cols());
      for (Eigen::Index i = 0; i < n; ++i) Ub.row(i) = U.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
      try {
        draws[b] = alpha_residual_point(Ub, thr, nullptr);
      } catch (const Error&) {
      }
    });
    double s = 0.0, s2 = 0.0;
    int ok = 0;
    for (double d : draws)
      if (std::isfinite(d)) {
        s += d;
        ++ok;
      }
    if (ok > 1) {
      const double mean = s / ok;
      for (double d : draws)
        if (std::isfinite(d)) s2 += (d - mean) * (d - mean);
      e.se = std::sqrt(s2 / (ok - 1));
    }
    e.bootstrap_reps = B;
    e.aux["bootstrap_failures"] = B - ok;
  }
  return e;
}

TestResult hausman_ife(const VectorXd& beta_twfe, const MatrixXd& vcov_twfe, const VectorXd& beta_ils,
                       const MatrixXd& vcov_ils) {
  const Eigen::Index K = beta_twfe.size();
  if (beta_ils.size() != K || vcov_twfe.rows() != K || vcov_twfe.cols() != K || vcov_ils.rows() != K ||
      vcov_ils.cols() != K)
    throw Error(ErrorKind::DimensionMismatch, "hausman: dimensions disagree");
  const VectorXd d = beta_ils - beta_twfe;
  MatrixXd V = vcov_ils - vcov_twfe;
  V = 0.5 * (V + V.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(V);
  const VectorXd& ev = es.eigenvalues();
  const double floor = 1e-12 * ev.cwiseAbs().sum();
  int rank = 0, negative = 0;
  double J = 0.0;
  for (Eigen::Index j = 0; j < K; ++j) {
    if (ev(j) < -floor) ++negative;
    if (ev(j) > floor && ev(j) > 0.0) {
      const double proj = es.eigenvectors().col(j).dot(d);
      J += proj * proj / ev(j);
      ++rank;
    }
  }
  TestResult r;
  r.method = TestMethod::Hausman;
  r.statistic = J;
  if (rank == 0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
  } else {
    const boost::math::chi_squared_distribution<double> chi(rank);
    r.p_value = std::clamp(boost::math::cdf(boost::math::complement(chi, J)), 0.0, 1.0);
  }
  r.aux["df"] = rank;
  r.aux["negative_eigenvalues"] = negative;
  r.aux["indefinite"] = negative > 0 ? 1.0 : 0.0;
  return r;
}

TestResult hausman_ife(const PanelData& panel, int m) {
  const EstimateResult tw = fe_estimate(panel, DemeanMode::two_way);
  IlsOptions o;
  o.m = m;
  const IlsFit il = ils_estimate(panel, o);
  const VectorXd e = vec_panel(il.result.residuals);
  const MatrixXd Xd = stack_regressors(demean(panel, DemeanMode::two_way));
  const MatrixXd A = Xd.transpose() * Xd;
  const MatrixXd Vtw = hc_vcov(Xd, e, A.completeOrthogonalDecomposition().pseudoInverse());
  TestResult r = hausman_ife(tw.beta, Vtw, il.result.beta, il.result.vcov);
  r.aux["m"] = m;
  return r;
}

}  // namespace ifepanel
