// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "ifepanel/diagnostics.hpp"
#include "ifepanel/errors.hpp"
#include "ifepanel/factor_select.hpp"
#include "ifepanel/gfe.hpp"
#include "ifepanel/harness.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/rng.hpp"
#include "ifepanel/simulate.hpp"
#include "support.hpp"

using namespace ifepanel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
  std::fflush(stdout);
  failures += !o.pass;
}

double max_abs(const VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

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

MatrixXd factor_panel(int N, int T, int m, double sigma, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  MatrixXd U = sigma * support::randn(N, T, g);
  if (m > 0) U += support::randn(N, m, g) * support::randn(T, m, g).transpose();
  return U;
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int N = 4 + static_cast<int>(rng() % 7), T = 3 + static_cast<int>(rng() % 6);
    const int K = 1 + static_cast<int>(rng() % 3);
    const PanelData p = support::random_panel(N, T, K, 1000 + rep);
    const MatrixXd Du = support::dummies(N, T, N, [](int i, int) { return i; });
    const MatrixXd Dt = support::dummies(N, T, T, [](int, int t) { return t; });
    worst = std::max(worst, max_abs(fe_estimate(p, DemeanMode::unit).beta - support::dummy_ols(p, Du)));
    worst = std::max(worst, max_abs(fe_estimate(p, DemeanMode::two_way).beta - support::dummy_ols(p, support::hcat(Du, Dt))));

    Grouping g;
    g.G = 2;
    g.C = (N * 2 + T * 2 + K < N * T) ? 2 : 1;
    for (int i = 0; i < N; ++i) g.unit_groups.push_back(i < 2 ? i : static_cast<int>(rng() % 2));
    for (int t = 0; t < T; ++t) g.time_groups.push_back(t < g.C ? t : static_cast<int>(rng() % g.C));
    const MatrixXd Dg = support::dummies(N, T, 2 * T, [&](int i, int t) { return g.unit_groups[i] * T + t; });
    worst = std::max(worst, max_abs(gf_fixed_groups(p, g.unit_groups, 2).result.beta - support::dummy_ols(p, Dg)));
    const MatrixXd Da = support::dummies(N, T, N * g.C, [&](int i, int t) { return i * g.C + g.time_groups[t]; });
    const MatrixXd Db = support::dummies(N, T, T * g.G, [&](int i, int t) { return t * g.G + g.unit_groups[i]; });
    worst = std::max(worst, max_abs(tsgfm_estimate(p, g).beta - support::dummy_ols(p, support::hcat(Da, Db))));
  }
  const double s = elapsed_since(t0);
  return {worst <= 1e-8 && s < 10.0, fmt("max |beta - dummy OLS| = %.2e over 100 panels x 4 estimators", worst)};
}

Outcome noiseless_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Simulated s2 = simulate(ife_spec(60, 60, 2, 0.0, 11));
  IlsOptions o;
  o.m = 2;
  const double e_ils = max_abs(ils_estimate(s2.panel, o).result.beta - s2.truth.beta);
  const double e_pnnr = max_abs(pnnr_estimate(s2.panel).result.beta - s2.truth.beta);
  const Simulated s1 = simulate(ife_spec(60, 60, 1, 0.0, 16));
  const double e_ccep = max_abs(ccep_estimate(s1.panel).beta - s1.truth.beta);
  DGPSpec st = ife_spec(60, 60, 1, 0.0, 20);
  st.loading_regressor_correlation = 0.0;
  st.x_factors = 1;
  st.orthogonal_idiosyncratic = true;
  const Simulated s3 = simulate(st);
  TsivOptions to;
  to.m_x = 1;
  to.m = 1;
  const double e_tsiv = max_abs(tsiv_estimate(s3.panel, to).tsiv.beta - s3.truth.beta);
  const double worst = std::max({e_ils, e_pnnr, e_ccep, e_tsiv});
  const double s = elapsed_since(t0);
  std::ostringstream d;
  d << "errors ILS " << fmt("%.1e", e_ils) << ", CCEP " << fmt("%.1e", e_ccep) << ", TSIV " << fmt("%.1e", e_tsiv)
    << ", PNNR " << fmt("%.1e", e_pnnr);
  return {worst <= 1e-6 && s < 60.0, d.str()};
}

Outcome ils_monotonicity() {
  int violations = 0;
  for (int r = 0; r < 50; ++r) {
    const Simulated sim = simulate(ife_spec(40, 30, 2, 1.0, 100 + r));
    IlsOptions o;
    o.m = 2;
    const IlsFit f = ils_estimate(sim.panel, o);
    for (std::size_t s = 1; s < f.ssr_path.size(); ++s) violations += f.ssr_path[s] > f.ssr_path[s - 1] * (1 + 1e-12);
  }
  const Simulated sim = simulate(ife_spec(40, 30, 2, 1.0, 99));
  IlsOptions one;
  one.m = 2;
  one.max_iter = 1;
  const IlsFit t = ils_estimate(sim.panel, one);
  const bool trunc = !t.result.converged && t.result.iterations == 1 && t.result.has_flag("NotConverged");
  IlsOptions full;
  full.m = 2;
  const bool conv = ils_estimate(sim.panel, full).result.converged;
  return {violations == 0 && trunc && conv,
          fmt("%.0f SSR increases over 50 panels; max_iter=1 flagged unconverged: ", violations) +
              (trunc ? "yes" : "no")};
}

Outcome cd_size_power() {
  const auto t0 = std::chrono::steady_clock::now();
  int rej = 0;
  for (int r = 0; r < 2000; ++r) rej += cd_test(factor_panel(50, 50, 0, 1.0, 5000 + r)).p_value < 0.05;
  int pw = 0;
  for (int r = 0; r < 200; ++r) {
    std::mt19937_64 g(9000 + r);
    const MatrixXd z = support::randn(50, 1, g).array() + 1.0;
    pw += cd_test(z * support::randn(1, 50, g) + support::randn(50, 50, g)).p_value < 0.05;
  }
  const MatrixXd row = (MatrixXd(1, 4) << 1, 3, 2, 5).finished();
  const double cd = cd_test(row.replicate(3, 1)).statistic;
  const double size = rej / 2000.0, power = pw / 200.0;
  const bool ok = size >= 0.04 && size <= 0.06 && power >= 0.99 && std::abs(cd - std::sqrt(12.0)) < 1e-12 &&
                  std::round(cd * 1e4) / 1e4 == 3.4641 && elapsed_since(t0) < 120.0;
  return {ok, fmt("size %.4f, power %.3f, CD(3x4 identical rows) = %.4f", size, power, cd)};
}

Outcome cdw_fix() {
  int cd_rej = 0, cdw_rej = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    DGPSpec s;
    s.N = 50;
    s.T = 50;
    s.K = 1;
    s.beta = {1.0};
    s.heterogeneity = Heterogeneity::additive;
    s.loading_regressor_correlation = 0.3;
    s.seed = derive_seed(77, r);
    const MatrixXd e = fe_estimate(simulate(s).panel, DemeanMode::two_way).residuals;
    cd_rej += cd_test(e).p_value < 0.05;
    CdwOptions o;
    o.seed = derive_seed(78, r);
    cdw_rej += cdw_test(e, o).p_value < 0.05;
  }
  const double a = static_cast<double>(cdw_rej) / reps, b = static_cast<double>(cd_rej) / reps;
  return {a >= 0.03 && a <= 0.07 && b > 0.10, fmt("CDw size %.3f, CD size %.3f on TWFE residuals", a, b)};
}

Outcome factor_numbers() {
  int hits[5] = {0, 0, 0, 0, 0};
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const int m = 1 + r % 3;
    const MatrixXd U = factor_panel(100, 100, m, 0.1, 7000 + r);
    hits[0] += bai_ng(U, 8, BaiNgVariant::IC, 1).m_hat == m;
    const auto eg = er_gr(U, 8);
    hits[1] += eg.first.m_hat == m;
    hits[2] += eg.second.m_hat == m;
    hits[3] += onatski_ed(U, 8).m_hat == m;
    hits[4] += gos(factor_panel(200, 100, m, 0.1, 7000 + r), 8).m_hat == m;
  }
  bool gos_err = false;
  try {
    gos(factor_panel(100, 100, 1, 0.1, 1), 8);
  } catch (const Error& e) {
    gos_err = e.kind() == ErrorKind::RequiresNGreaterT;
  }
  bool ok = gos_err;
  for (int h : hits) ok = ok && h >= 0.9 * reps;
  std::ostringstream d;
  d << "hits/200: IC1 " << hits[0] << ", ER " << hits[1] << ", GR " << hits[2] << ", ED " << hits[3]
    << ", GOS(N=200) " << hits[4] << "; GOS at N=T errors: " << (gos_err ? "yes" : "no");
  return {ok, d.str()};
}

Outcome exponent_limits() {
  std::mt19937_64 g(11);
  const MatrixXd f = support::randn(1, 400, g);
  MatrixXd X = f.replicate(100, 1) + 0.5 * support::randn(100, 400, g);
  const double strong = alpha_observed(X).alpha;
  const double weak = alpha_observed(support::randn(1000, 400, g)).alpha;
  const double ident = alpha_residual(support::randn(1, 50, g).replicate(20, 1)).alpha;
  return {std::abs(strong - 1.0) <= 0.05 && std::abs(weak - 0.5) <= 0.07 && ident == 1.0,
          fmt("pervasive %.4f, independent %.4f, identical rows %.17g", strong, weak, ident)};
}

Outcome inconsistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const McResult r = mc_run(ife_spec(100, 100, 2, 1.0, 0),
                            parse_estimators(json::parse(R"(["FE", {"type": "ILS", "m": 2}])")), 500, 2024);
  const double fe = r.summary[0].bias.cwiseAbs().maxCoeff(), ils = r.summary[1].bias.cwiseAbs().maxCoeff();
  const bool ok = fe >= 5.0 * ils && r.summary[1].failures == 0 && elapsed_since(t0) < 600.0;
  return {ok, fmt("|mean bias| FE %.4f, ILS(2) %.5f, ratio %.0f", fe, ils, fe / ils)};
}

Outcome classification() {
  int worst = 0;
  for (int r = 0; r < 50; ++r) {
    DGPSpec s;
    s.N = 100;
    s.T = 40;
    s.K = 2;
    s.beta = {1.0, -0.5};
    s.heterogeneity = Heterogeneity::gfe;
    s.G = 3;
    s.separation = 2.0;
    s.loading_regressor_correlation = 0.3;
    s.seed = 800 + r;
    const Simulated sim = simulate(s);
    KMeansOptions o;
    o.starts = 100;
    o.seed = r;
    const GfFit f = gf_estimate(sim.panel, 3, o);
    int best = 100;
    std::vector<int> perm = {0, 1, 2};
    do {
      int miss = 0;
      for (int i = 0; i < 100; ++i) miss += perm[f.grouping.unit_groups[i]] != sim.truth.unit_groups[i];
      best = std::min(best, miss);
    } while (std::next_permutation(perm.begin(), perm.end()));
    worst = std::max(worst, best);
  }
  return {worst == 0, fmt("worst misclassification over 50 seeds: %.0f units", worst)};
}

Outcome pnnr_agreement() {
  double worst = 0.0;
  for (int r = 0; r < 10; ++r) {
    const Simulated sim = simulate(ife_spec(60, 60, 2, 0.1, 300 + r));
    const PnnrFit p = pnnr_estimate(sim.panel);
    IlsOptions o;
    o.m = p.m_hat;
    worst = std::max(worst, max_abs(p.result.beta - ils_estimate(sim.panel, o).result.beta));
  }
  return {worst <= 1e-4, fmt("max |PNNR - ILS(m_hat)| = %.2e over 10 clean panels", worst)};
}

Outcome determinism() {
  const Simulated sim = simulate(ife_spec(40, 30, 2, 1.0, 5));
  const MatrixXd& U = sim.panel.y;
  bool ok = true;
  auto check = [&](bool same) { ok = ok && same; };
  CdwOptions c1;
  c1.seed = 3;
  CdwOptions c4 = c1;
  c4.threads = 4;
  check(cdw_test(U, c1).statistic == cdw_test(U, c1).statistic);
  check(cdw_test(U, c1).statistic == cdw_test(U, c4).statistic);
  AlphaResidualOptions a1;
  a1.bootstrap_reps = 40;
  a1.seed = 3;
  AlphaResidualOptions a4 = a1;
  a4.threads = 4;
  check(*alpha_residual(U, a1).se == *alpha_residual(U, a1).se);
  check(*alpha_residual(U, a1).se == *alpha_residual(U, a4).se);
  KMeansOptions k1;
  k1.starts = 50;
  k1.seed = 3;
  KMeansOptions k4 = k1;
  k4.threads = 4;
  const GfFit g1 = gf_estimate(sim.panel, 3, k1), g2 = gf_estimate(sim.panel, 3, k1), g4 = gf_estimate(sim.panel, 3, k4);
  check(g1.grouping.unit_groups == g2.grouping.unit_groups && g1.result.beta == g2.result.beta);
  check(g1.grouping.unit_groups == g4.grouping.unit_groups && g1.result.beta == g4.result.beta);
  const auto est = parse_estimators(json::parse(R"(["TWFE", {"type": "ILS", "m": 2}, {"type": "GF", "G": 2, "starts": 20}])"));
  auto mc_text = [&](int threads) {
    std::ostringstream s;
    const McResult r = mc_run(ife_spec(30, 20, 2, 1.0, 0), est, 8, 21, threads);
    write_csv(mc_summary_table(r), s);
    write_csv(mc_replication_table(r), s);
    return s.str();
  };
  const std::string m1 = mc_text(1);
  check(m1 == mc_text(1));
  check(m1 == mc_text(4));
  return {ok, ok ? "CDw, bootstrap, k-means and mc identical across runs and 1 vs 4 threads" : "mismatch"};
}

}  // namespace

int main() {
  criterion(1, "oracle equivalence", oracle_equivalence);
  criterion(2, "noiseless recovery", noiseless_recovery);
  criterion(3, "ILS monotonicity", ils_monotonicity);
  criterion(4, "CD size and power", cd_size_power);
  criterion(5, "CDw on TWFE residuals", cdw_fix);
  criterion(6, "factor-number recovery", factor_numbers);
  criterion(7, "exponent limits", exponent_limits);
  criterion(8, "inconsistency demonstration", inconsistency);
  criterion(9, "GF classification", classification);
  criterion(10, "PNNR/ILS agreement", pnnr_agreement);
  criterion(11, "determinism", determinism);
  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures ? 1 : 0;
}
