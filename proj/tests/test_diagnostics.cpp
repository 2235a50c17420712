#include <doctest.h>

#include <cmath>

#include "ifepanel/diagnostics.hpp"
#include "ifepanel/errors.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/simulate.hpp"
#include "support.hpp"

using namespace ifepanel;

namespace {

MatrixXd one_factor(int N, int T, double load_sd, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  const MatrixXd z = (support::randn(N, 1, g) * load_sd).array() + 1.0;
  return z * support::randn(T, 1, g).transpose() + support::randn(N, T, g);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("cd: identical rows") {
  const MatrixXd row = (MatrixXd(1, 4) << 1, 3, 2, 5).finished();
  const TestResult r = cd_test(row.replicate(3, 1));
  CHECK(r.statistic == doctest::Approx(std::sqrt(8.0 / 6.0) * 3.0).epsilon(1e-12));
  CHECK(r.statistic == doctest::Approx(3.4641).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(2 * (1 - 0.99973398)).epsilon(1e-3));
}

TEST_CASE("cd: matches an explicit pairwise correlation sum") {
  std::mt19937_64 g(1);
  const MatrixXd U = support::randn(7, 12, g);
  double s = 0.0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < i; ++j) {
      const Eigen::ArrayXd a = U.row(i).array() - U.row(i).mean(), b = U.row(j).array() - U.row(j).mean();
      s += (a * b).sum() / std::sqrt((a * a).sum() * (b * b).sum());
    }
  CHECK(cd_test(U).statistic == doctest::Approx(std::sqrt(24.0 / 42.0) * s).epsilon(1e-12));
}

TEST_CASE("cd: invariant to row scaling and recentring") {
  std::mt19937_64 g(2);
  const MatrixXd U = support::randn(10, 15, g);
  MatrixXd V = U;
  for (int i = 0; i < 10; ++i) V.row(i) = V.row(i) * (0.5 + i) + VectorXd::Constant(15, 3.0 * i).transpose();
  CHECK(cd_test(V).statistic == doctest::Approx(cd_test(U).statistic).epsilon(1e-10));
  const double p = cd_test(U).p_value;
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
}

TEST_CASE("cd: zero-variance rows are excluded, too few rows is an error") {
  std::mt19937_64 g(3);
  MatrixXd U = support::randn(5, 10, g);
  U.row(2).setConstant(4.0);
  const TestResult r = cd_test(U);
  CHECK(r.aux.at("excluded_rows") == 1);
  MatrixXd V(4, 10);
  V << U.row(0), U.row(1), U.row(3), U.row(4);
  CHECK(r.statistic == doctest::Approx(cd_test(V).statistic));
  MatrixXd W = MatrixXd::Ones(3, 10);
  W.row(0) = U.row(0);
  CHECK(kind_of([&] { cd_test(W); }) == ErrorKind::DegenerateRows);
}

TEST_CASE("cdw: unit weights reduce to cd, seeds, threads") {
  std::mt19937_64 g(4);
  const MatrixXd U = support::randn(20, 30, g);
  CdwOptions o;
  o.force_unit_weights = true;
  CHECK(cdw_test(U, o).statistic == doctest::Approx(cd_test(U).statistic).epsilon(1e-12));
  CdwOptions a;
  a.seed = 42;
  CdwOptions b = a;
  b.threads = 4;
  CHECK(cdw_test(U, a).statistic == cdw_test(U, a).statistic);
  CHECK(cdw_test(U, a).statistic == cdw_test(U, b).statistic);
  CdwOptions c = a;
  c.seed = 43;
  CHECK(cdw_test(U, a).statistic != cdw_test(U, c).statistic);
  CdwOptions few;
  few.reps = 29;
  CHECK_THROWS_AS(cdw_test(U, few), Error);
}

TEST_CASE("cdw: weighted correlations average to zero over many draws") {
  std::mt19937_64 g(5);
  const MatrixXd U = support::randn(30, 40, g);
  CdwOptions o;
  o.reps = 10000;
  o.seed = 6;
  const TestResult r = cdw_test(U, o);
  const double se = r.aux.at("sd_cd_draw") / std::sqrt(10000.0);
  CHECK(std::abs(r.aux.at("mean_cd_draw")) <= 3.0 * se);
}

TEST_CASE("cdw+: empty screen, planted pair, nonnegative mass") {
  std::mt19937_64 g(7);
  const MatrixXd U = support::randn(30, 400, g);
  CdwOptions o;
  o.seed = 8;
  const TestResult base = cdw_test(U, o);
  const TestResult printed = cdw_plus(U, o);
  CHECK(printed.statistic == base.statistic);
  CHECK(printed.aux.at("screened_pairs") == 0);

  MatrixXd P = U;
  P.row(7) = P.row(3);
  const TestResult planted = cdw_plus(P, o, ScreenThreshold::per_correlation);
  CHECK(planted.aux.at("screened_pairs") == 1);
  CHECK(planted.aux.at("screened_mass") == doctest::Approx(1.0));

  const MatrixXd F = one_factor(30, 100, 0.2, 9);
  const TestResult w = cdw_test(F, o), wp = cdw_plus(F, o, ScreenThreshold::per_correlation);
  CHECK(wp.statistic >= w.statistic);
  CHECK(wp.aux.at("screened_pairs") > 0);
}

TEST_CASE("cd*: zero theta, degenerate theta, theta formula") {
  std::mt19937_64 g(10);
  const MatrixXd U = support::randn(15, 20, g);
  CdStarOptions o;
  o.m = 0;
  o.theta_override = 0.0;
  CHECK(cd_star(U, o).statistic == doctest::Approx(cd_test(U).statistic).epsilon(1e-14));
  o.theta_override = 1.0 - 1e-8;
  CHECK(kind_of([&] { cd_star(U, o); }) == ErrorKind::DegenerateTheta);
  CdStarOptions big;
  big.m = 15;
  CHECK(kind_of([&] { cd_star(U, big); }) == ErrorKind::InvalidM);
  // a constant loading column is fully in the span: theta = 1
  const MatrixXd L = MatrixXd::Ones(10, 1);
  CHECK(cd_star_theta(L, VectorXd::Ones(10)) == doctest::Approx(1.0));
  CHECK(cd_star_theta(MatrixXd(10, 0), VectorXd::Ones(10)) == 0.0);
}

TEST_CASE("cd*: size on defactored one-factor residuals") {
  int accept = 0, cd_accept = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    const MatrixXd U = one_factor(50, 50, 1.0, 20000 + r);
    CdStarOptions o;
    o.m = 1;
    const TestResult t = cd_star(U, o);
    accept += std::abs(t.statistic) <= 1.96;
    cd_accept += std::abs(t.aux.at("cd")) <= 1.96;
  }
  MESSAGE("CD* acceptance " << accept << "/" << reps << ", uncorrected CD acceptance " << cd_accept);
  CHECK(accept >= 920);
  CHECK(accept <= 975);
}

TEST_CASE("alpha observed: strong factor, independence, exact unit variance, scaling") {
  std::mt19937_64 g(11);
  const MatrixXd f = support::randn(1, 400, g);
  CHECK(std::abs(alpha_observed(f.replicate(100, 1)).alpha - 1.0) <= 0.05);
  CHECK(std::abs(alpha_observed(support::randn(1000, 400, g)).alpha - 0.5) <= 0.07);

  Eigen::RowVectorXd h = f.row(0);
  h.array() -= h.mean();
  h /= std::sqrt(h.squaredNorm() / 400.0);
  CHECK(alpha_observed(h.replicate(10, 1)).alpha == doctest::Approx(1.0).epsilon(1e-12));

  const MatrixXd X = support::randn(50, 60, g);
  const double c = 2.5;
  CHECK(alpha_observed(c * X).alpha - alpha_observed(X).alpha == doctest::Approx(std::log(c) / std::log(50.0)).epsilon(1e-12));
  CHECK(kind_of([] { alpha_observed(MatrixXd::Ones(5, 10)); }) == ErrorKind::DegenerateCSA);
  CHECK_THROWS_AS(alpha_observed(MatrixXd::Ones(3, 10)), Error);
}

TEST_CASE("alpha residual: identical rows, full screen, negative form") {
  std::mt19937_64 g(12);
  const MatrixXd row = support::randn(1, 40, g);
  const ExponentEstimate e = alpha_residual(row.replicate(12, 1));
  CHECK(e.alpha == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.aux.at("quad_form") == doctest::Approx(144.0));
  CHECK(e.aux.count("cv") == 1);
  CHECK(e.aux.at("cv") == doctest::Approx(3.367847180032717).epsilon(1e-12));  // upper 0.05/132 normal quantile

  const ExponentEstimate n = alpha_residual(support::randn(20, 100, g));
  CHECK(n.alpha == doctest::Approx(0.5).epsilon(1e-14));

  MatrixXd cancel(2, 10);
  cancel.row(0) = support::randn(1, 10, g);
  cancel.row(1) = -cancel.row(0);
  CHECK(kind_of([&] { alpha_residual(cancel); }) == ErrorKind::NegativeQuadForm);

  // corr(a,b) = corr(a,c) = -0.8 survive the screen, corr(b,c) = 0.28 does not: e'De = 3 - 3.2
  MatrixXd ae = support::randn(2, 20, g);
  ae = ae.colwise() - ae.rowwise().mean();
  ae.row(1) -= ae.row(1).dot(ae.row(0)) / ae.row(0).squaredNorm() * ae.row(0);
  ae.row(0).normalize();
  ae.row(1).normalize();
  MatrixXd neg(3, 20);
  neg << ae.row(0), -0.8 * ae.row(0) + 0.6 * ae.row(1), -0.8 * ae.row(0) - 0.6 * ae.row(1);
  CHECK(kind_of([&] { alpha_residual(neg); }) == ErrorKind::NegativeQuadForm);
  CHECK_THROWS_AS(alpha_residual(support::randn(50, 5, g)), Error);
}

TEST_CASE("alpha residual: one-factor residuals and bootstrap determinism") {
  int inside = 0;
  for (int r = 0; r < 200; ++r) {
    const double a = alpha_residual(one_factor(100, 200, 0.2, 30000 + r)).alpha;
    inside += a >= 0.9 && a <= 1.0;
  }
  CHECK(inside >= 160);
  const MatrixXd U = one_factor(40, 100, 0.5, 31);
  AlphaResidualOptions o;
  o.bootstrap_reps = 50;
  o.seed = 3;
  AlphaResidualOptions t = o;
  t.threads = 3;
  const ExponentEstimate a = alpha_residual(U, o), b = alpha_residual(U, t);
  REQUIRE(a.se.has_value());
  CHECK(*a.se == *b.se);
  CHECK(std::isfinite(*a.se));
  CHECK(a.bootstrap_reps == 50);
}

TEST_CASE("hausman: identical estimates, dimension check, flooring") {
  const VectorXd b = VectorXd::Ones(2);
  const MatrixXd V = MatrixXd::Identity(2, 2);
  const TestResult r = hausman_ife(b, V, b, 2 * V);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK_THROWS_AS(hausman_ife(b, V, VectorXd::Ones(3), V), Error);
  const TestResult z = hausman_ife(b, V, 2 * b, V);
  CHECK(z.aux.at("df") == 0);
  CHECK(z.p_value == 1.0);
  const TestResult i = hausman_ife(b, V, (VectorXd(2) << 2, 1).finished(), (MatrixXd(2, 2) << 2, 0, 0, 0.5).finished());
  CHECK(i.aux.at("indefinite") == 1.0);
  CHECK(i.aux.at("df") == 1);
  CHECK(i.statistic == doctest::Approx(1.0));
}

TEST_CASE("hausman: size under additive effects, power under correlated factors") {
  auto rejects = [](DGPSpec s, int m) {
    const Simulated sim = simulate(s);
    return hausman_ife(sim.panel, m).p_value < 0.05;
  };
  DGPSpec add;
  add.N = 40;
  add.T = 40;
  add.heterogeneity = Heterogeneity::additive;
  add.loading_regressor_correlation = 0.5;
  int rej = 0;
  for (int r = 0; r < 500; ++r) {
    add.seed = 40000 + r;
    rej += rejects(add, 2);
  }
  MESSAGE("Hausman size " << rej / 500.0);
  CHECK(rej / 500.0 >= 0.01);
  CHECK(rej / 500.0 <= 0.10);

  DGPSpec ife;
  ife.N = 100;
  ife.T = 100;
  ife.heterogeneity = Heterogeneity::ife;
  ife.loading_regressor_correlation = 0.5;
  int pow = 0;
  for (int r = 0; r < 50; ++r) {
    ife.seed = 41000 + r;
    pow += rejects(ife, 1);
  }
  CHECK(pow >= 45);
}
