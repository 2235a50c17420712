#include <doctest.h>

#include <cmath>
#include <functional>

#include "ifepanel/errors.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/simulate.hpp"
#include "support.hpp"

using namespace ifepanel;

namespace {

DGPSpec ife_spec(int N, int T, int m, double sigma, std::uint64_t seed) {
  DGPSpec s;
  s.N = N;
  s.T = T;
  s.K = 2;
  s.beta = {1.0, -0.5};
  s.heterogeneity = Heterogeneity::ife;
  s.m = m;
  s.loading_regressor_correlation = 0.5;
  s.sigma = sigma;
  s.seed = seed;
  return s;
}

double max_abs(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("fe: noiseless one-way and two-way designs") {
  std::mt19937_64 g(1);
  const MatrixXd x = support::randn(7, 5, g), a = support::randn(7, 1, g), b = support::randn(1, 5, g);
  const PanelData one = make_panel(2 * x + a.replicate(1, 5), {x});
  CHECK(std::abs(fe_estimate(one, DemeanMode::unit).beta(0) - 2.0) < 1e-10);
  const PanelData two = make_panel(2 * x + a.replicate(1, 5) + b.replicate(7, 1), {x});
  CHECK(std::abs(fe_estimate(two, DemeanMode::two_way).beta(0) - 2.0) < 1e-10);
}

TEST_CASE("fe: dummy-variable oracle on small panels") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int N = 3 + static_cast<int>(seed % 6), T = 2 + static_cast<int>(seed % 5);
    const PanelData p = support::random_panel(N, T, 2, 100 + seed);
    const MatrixXd Du = support::dummies(N, T, N, [](int i, int) { return i; });
    const MatrixXd Dt = support::dummies(N, T, T, [](int, int t) { return t; });
    CHECK(max_abs(fe_estimate(p, DemeanMode::unit).beta - support::dummy_ols(p, Du)) < 1e-8);
    CHECK(max_abs(fe_estimate(p, DemeanMode::time).beta - support::dummy_ols(p, Dt)) < 1e-8);
    CHECK(max_abs(fe_estimate(p, DemeanMode::two_way).beta - support::dummy_ols(p, support::hcat(Du, Dt))) < 1e-8);
    CHECK(max_abs(fe_estimate(p, DemeanMode::none).beta - support::dummy_ols(p, MatrixXd(N * T, 0))) < 1e-8);
  }
}

TEST_CASE("fe: covariance is symmetric PSD and collinear designs fail") {
  const PanelData p = support::random_panel(8, 6, 3, 4);
  const EstimateResult r = fe_estimate(p, DemeanMode::two_way);
  CHECK((r.vcov - r.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(r.vcov).eigenvalues().minCoeff() > -1e-8);
  CHECK(r.residuals.rows() == 8);
  CHECK(r.residuals.cols() == 6);
  // a regressor that only varies by unit is wiped out by unit demeaning
  std::mt19937_64 g(3);
  PanelData q = p;
  q.x[1] = support::randn(8, 1, g).replicate(1, 6);
  CHECK(kind_of([&] { fe_estimate(q, DemeanMode::unit); }) == ErrorKind::RankDeficientDesign);
}

TEST_CASE("ils: m = 0 is pooled OLS") {
  const PanelData p = support::random_panel(10, 8, 2, 5);
  IlsOptions o;
  o.m = 0;
  const IlsFit f = ils_estimate(p, o);
  CHECK(max_abs(f.result.beta - support::dummy_ols(p, MatrixXd(80, 0))) < 1e-10);
  CHECK(f.result.converged);
}

TEST_CASE("ils: noiseless planted factors, correct and overspecified m") {
  const Simulated sim = simulate(ife_spec(60, 60, 2, 0.0, 11));
  IlsOptions o;
  o.m = 2;
  const IlsFit f2 = ils_estimate(sim.panel, o);
  CHECK(f2.result.converged);
  CHECK(max_abs(f2.result.beta - sim.truth.beta) < 1e-6);
  CHECK(f2.result.ssr <= 1e-10);
  CHECK(f2.factors.m == 2);
  o.m = 3;
  const IlsFit f3 = ils_estimate(sim.panel, o);
  CHECK(max_abs(f3.result.beta - sim.truth.beta) < 1e-6);
}

TEST_CASE("ils: initializers agree at the optimum on clean data") {
  const Simulated sim = simulate(ife_spec(40, 30, 1, 0.0, 12));
  for (IlsInit init : {IlsInit::pooled_ols, IlsInit::two_way_within, IlsInit::user}) {
    IlsOptions o;
    o.init = init;
    o.user_beta = VectorXd::Zero(2);
    CHECK(max_abs(ils_estimate(sim.panel, o).result.beta - sim.truth.beta) < 1e-6);
  }
}

TEST_CASE("ils: SSR path is non-increasing and the fixed point holds") {
  const Simulated sim = simulate(ife_spec(30, 20, 2, 1.0, 13));
  IlsOptions o;
  o.m = 2;
  const IlsFit f = ils_estimate(sim.panel, o);
  for (std::size_t s = 1; s < f.ssr_path.size(); ++s) CHECK(f.ssr_path[s] <= f.ssr_path[s - 1] * (1 + 1e-12));
  CHECK(f.ssr_path.size() == static_cast<std::size_t>(f.result.iterations) + 1);
  MatrixXd R = sim.panel.y;
  for (int k = 0; k < 2; ++k) R -= f.result.beta(k) * sim.panel.x[k];
  const VectorXd again = beta_given_factors(sim.panel, principal_components(R, 2).F);
  CHECK(max_abs(again - f.result.beta) <= o.tol);
  CHECK(f.result.ssr == doctest::Approx(f.ssr_path.back()));
}

TEST_CASE("ils: truncation at max_iter = 1") {
  const Simulated sim = simulate(ife_spec(30, 20, 2, 1.0, 14));
  IlsOptions o;
  o.m = 2;
  o.max_iter = 1;
  const IlsFit f = ils_estimate(sim.panel, o);
  CHECK_FALSE(f.result.converged);
  CHECK(f.result.iterations == 1);
  CHECK(f.result.has_flag("NotConverged"));
  CHECK(kind_of([&] { ils_bias_correct(f, sim.panel); }) == ErrorKind::RequiresConvergedILS);
  o.m = 20;
  CHECK(kind_of([&] { ils_estimate(sim.panel, o); }) == ErrorKind::InvalidM);
}

TEST_CASE("ils bias correction: empty set, homoskedastic exogenous data") {
  const Simulated sim = simulate(ife_spec(60, 60, 1, 0.1, 15));
  IlsOptions o;
  const IlsFit f = ils_estimate(sim.panel, o);
  BiasCorrectionOptions none;
  none.b1 = none.b2 = none.b3 = false;
  const EstimateResult same = ils_bias_correct(f, sim.panel, none);
  CHECK(same.beta == f.result.beta);
  CHECK(same.method == Method::ILS);
  BiasCorrectionOptions homo;
  homo.homoskedastic = true;
  const EstimateResult bc = ils_bias_correct(f, sim.panel, homo);
  CHECK(bc.method == Method::ILS_BC);
  CHECK(max_abs(bc.beta - f.result.beta) <= 1e-3);
  const BiasTerms bt = ils_bias_terms(f, sim.panel, homo);
  CHECK(max_abs(bt.b2) == 0.0);
  CHECK(max_abs(bt.b3) == 0.0);
}

TEST_CASE("ils bias correction shrinks the dynamic-panel bias") {
  // unit and time effects are a two-factor structure whose constant factor produces the Nickell bias
  DGPSpec s = ife_spec(50, 50, 1, 1.0, 0);
  s.heterogeneity = Heterogeneity::additive;
  s.K = 1;
  s.beta = {1.0};
  s.lagged_y = 0.5;
  s.loading_regressor_correlation = 0.3;
  double raw = 0.0, corrected = 0.0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    s.seed = 50000 + r;
    const Simulated sim = simulate(s);
    IlsOptions o;
    o.m = 2;
    const IlsFit f = ils_estimate(sim.panel, o);
    const EstimateResult bc = ils_bias_correct(f, sim.panel);
    raw += f.result.beta(1) - 0.5;
    corrected += bc.beta(1) - 0.5;
  }
  MESSAGE("lagged-y bias: ILS " << raw / reps << ", ILS-BC " << corrected / reps);
  CHECK(std::abs(corrected) < std::abs(raw));
}

TEST_CASE("ccep: noiseless one-factor design is exact") {
  DGPSpec s = ife_spec(60, 60, 1, 0.0, 16);
  const Simulated sim = simulate(s);
  const EstimateResult r = ccep_estimate(sim.panel);
  CHECK(max_abs(r.beta - sim.truth.beta) < 1e-6);
  CHECK(r.variance == "cce_nonparametric");
  CHECK(r.residuals.rows() == 60);
}

TEST_CASE("ccep: averages appended as a regressor are dropped and flagged") {
  const Simulated sim = simulate(ife_spec(30, 20, 1, 1.0, 17));
  PanelData p = sim.panel;
  const MatrixXd w = cross_section_averages(p, true, 0);
  p.x.push_back(w.col(1).transpose().replicate(30, 1));
  p.var_names.push_back("xbar");
  const EstimateResult r = ccep_estimate(p);
  CHECK(r.has_flag("DroppedAnnihilatedColumns"));
  CHECK(std::isnan(r.beta(2)));
  CHECK(max_abs(r.beta.head(2) - ccep_estimate(sim.panel).beta) < 1e-8);
}

TEST_CASE("ccep: annihilator kills the averages, scale invariance, rank flag") {
  const Simulated sim = simulate(ife_spec(25, 30, 1, 1.0, 18));
  const MatrixXd W = cross_section_averages(sim.panel, true, 0);
  CHECK(annihilate(W, W).cwiseAbs().maxCoeff() < 1e-10);
  std::mt19937_64 g(2);
  CcepOptions a, b;
  a.observed_factors = support::randn(30, 2, g);
  b.observed_factors = a.observed_factors * Eigen::Vector2d(3.0, -0.25).asDiagonal();
  CHECK(max_abs(ccep_estimate(sim.panel, a).beta - ccep_estimate(sim.panel, b).beta) < 1e-10);
  CcepOptions dup;
  dup.extra_csa = W.col(0);
  const EstimateResult r = ccep_estimate(sim.panel, dup);
  CHECK(r.has_flag("CsaRankDeficient"));
  CHECK(max_abs(r.beta - ccep_estimate(sim.panel).beta) < 1e-8);
  CcepOptions many;
  many.extra_csa = support::randn(30, 27, g);
  CHECK(kind_of([&] { ccep_estimate(sim.panel, many); }) == ErrorKind::TooManyCsaColumns);
}

TEST_CASE("ccep: dynamic lags and boundary handling") {
  DGPSpec s = ife_spec(30, 27, 1, 1.0, 19);
  s.lagged_y = 0.4;
  const Simulated sim = simulate(s);
  CcepOptions o;
  o.dynamic = true;
  const EstimateResult back = ccep_estimate(sim.panel, o);
  CHECK(back.method == Method::DCCEP);
  CHECK(back.residuals.cols() == 27);
  o.boundary = LagBoundary::trim;
  const EstimateResult trim = ccep_estimate(sim.panel, o);
  CHECK(trim.residuals.cols() == 24);
  const PanelData shortp = drop_leading_periods(sim.panel, 20);
  CcepOptions d;
  d.dynamic = true;
  CHECK_THROWS_AS(ccep_estimate(shortp, d), Error);
}

TEST_CASE("ccep: overspecified averages with no factors stay unbiased") {
  DGPSpec s;
  s.N = 100;
  s.T = 50;
  s.K = 1;
  s.beta = {1.0};
  double bias = 0.0;
  for (int r = 0; r < 500; ++r) {
    s.seed = 70000 + r;
    bias += ccep_estimate(simulate(s).panel).beta(0) - 1.0;
  }
  CHECK(std::abs(bias / 500) <= 0.01);
}

TEST_CASE("tsiv: noiseless distinct factors, shared factor, no defactoring") {
  DGPSpec s = ife_spec(60, 60, 1, 0.0, 20);
  s.loading_regressor_correlation = 0.0;
  s.x_factors = 1;
  s.orthogonal_idiosyncratic = true;
  const Simulated sim = simulate(s);
  TsivOptions o;
  o.m_x = 1;
  o.m = 1;
  const TsivFit f = tsiv_estimate(sim.panel, o);
  CHECK(max_abs(f.tsiv.beta - sim.truth.beta) < 1e-6);

  DGPSpec sh = ife_spec(60, 60, 1, 0.0, 21);
  sh.loading_regressor_correlation = 0.6;
  sh.orthogonal_idiosyncratic = true;
  const TsivFit g = tsiv_estimate(simulate(sh).panel, o);
  CHECK(max_abs(g.tsiv.beta - g.fsiv.beta) < 1e-8);

  const PanelData p = support::random_panel(12, 9, 2, 3);
  TsivOptions zero;
  zero.m_x = 0;
  zero.m = 0;
  const TsivFit z = tsiv_estimate(p, zero);
  CHECK(max_abs(z.tsiv.beta - support::dummy_ols(p, MatrixXd(108, 0))) < 1e-10);
  CHECK(max_abs(z.fsiv.beta - z.tsiv.beta) < 1e-12);
}

TEST_CASE("tsiv: moment orthogonality, auto counts, errors") {
  const Simulated sim = simulate(ife_spec(40, 30, 1, 1.0, 22));
  const TsivFit f = tsiv_estimate(sim.panel);
  CHECK(f.m >= 0);
  CHECK(f.m_x >= 0);
  // sum_i Xtt_i' u_i = 0 at the solution
  const Projector Px(f.Fx.cols() ? f.Fx : MatrixXd(30, 0)), Pf(f.F.cols() ? f.F : MatrixXd(30, 0));
  MatrixXd u = sim.panel.y;
  for (int k = 0; k < 2; ++k) u -= f.tsiv.beta(k) * sim.panel.x[k];
  for (int k = 0; k < 2; ++k) {
    const MatrixXd z = Pf.annihilate_rows(Px.annihilate_rows(sim.panel.x[k]));
    CHECK(std::abs(z.cwiseProduct(u).sum()) < 1e-6 * z.norm() * u.norm());
  }
  TsivOptions bad;
  bad.m = 40;
  CHECK(kind_of([&] { tsiv_estimate(sim.panel, bad); }) == ErrorKind::InvalidM);
  // regressors that are pure factor structure vanish after defactoring
  std::mt19937_64 g(5);
  const MatrixXd F = support::randn(30, 1, g);
  PanelData q = sim.panel;
  q.x[0] = support::randn(40, 1, g) * F.transpose();
  q.x[1] = support::randn(40, 1, g) * F.transpose();
  CHECK(kind_of([&] { tsiv_known_factors(q, F, MatrixXd(30, 0)); }) == ErrorKind::WeakInstrument);
}

TEST_CASE("pnnr: full shrinkage gives pooled OLS") {
  const Simulated sim = simulate(ife_spec(20, 15, 1, 1.0, 23));
  const VectorXd pols = support::dummy_ols(sim.panel, MatrixXd(300, 0));
  MatrixXd R = sim.panel.y;
  for (int k = 0; k < 2; ++k) R -= pols(k) * sim.panel.x[k];
  const double top = Eigen::JacobiSVD<MatrixXd>(R).singularValues()(0) / std::sqrt(300.0);
  PnnrOptions o;
  o.psi_grid = {1.01 * top};
  const PnnrFit f = pnnr_estimate(sim.panel, o);
  CHECK(max_abs(f.beta_nnr - pols) < 1e-10);
}

TEST_CASE("pnnr: noiseless rank 2 recovery and agreement with ILS") {
  const Simulated sim = simulate(ife_spec(60, 60, 2, 0.0, 24));
  const PnnrFit f = pnnr_estimate(sim.panel);
  CHECK(f.m_hat == 2);
  CHECK(max_abs(f.result.beta - sim.truth.beta) < 1e-6);
  IlsOptions o;
  o.m = f.m_hat;
  CHECK(max_abs(f.result.beta - ils_estimate(sim.panel, o).result.beta) <= 1e-4);
  CHECK(f.result.iterations >= 2);
}

TEST_CASE("pnnr: objective non-increasing for a fixed psi, grid validation") {
  const Simulated sim = simulate(ife_spec(30, 25, 2, 1.0, 25));
  PnnrOptions o;
  o.psi_grid = {0.05};
  const PnnrFit f = pnnr_estimate(sim.panel, o);
  for (std::size_t s = 1; s < f.objective_path.size(); ++s)
    CHECK(f.objective_path[s] <= f.objective_path[s - 1] + 1e-12 * std::abs(f.objective_path[s - 1]));
  o.psi_grid = {0.1, 0.2};
  CHECK(kind_of([&] { pnnr_estimate(sim.panel, o); }) == ErrorKind::InvalidGrid);
  o.psi_grid = {0.1, -0.2};
  CHECK(kind_of([&] { pnnr_estimate(sim.panel, o); }) == ErrorKind::InvalidGrid);
  PnnrOptions short_post;
  short_post.post_iterations = 1;
  CHECK_THROWS_AS(pnnr_estimate(sim.panel, short_post), Error);
}

TEST_CASE("estimate results satisfy the shared invariants") {
  const Simulated sim = simulate(ife_spec(30, 20, 1, 1.0, 26));
  std::vector<EstimateResult> all = {fe_estimate(sim.panel, DemeanMode::two_way), ils_estimate(sim.panel, {}).result,
                                     ccep_estimate(sim.panel), tsiv_estimate(sim.panel).tsiv,
                                     pnnr_estimate(sim.panel).result};
  for (const auto& r : all) {
    CHECK(r.beta.size() == 2);
    CHECK(r.iterations >= 0);
    CHECK(r.residuals.rows() == 30);
    CHECK((r.vcov - r.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, r.vcov.cwiseAbs().maxCoeff()));
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(r.vcov).eigenvalues().minCoeff() >
          -1e-8 * std::max(1.0, r.vcov.cwiseAbs().maxCoeff()));
    CHECK((r.stderr_.array() >= 0).all());
  }
}
