#include "ifepanel/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ifepanel/errors.hpp"
#include "ifepanel/numlin.hpp"
#include "ifepanel/rng.hpp"

namespace ifepanel {

std::string to_string(Heterogeneity h) {
  switch (h) {
    case Heterogeneity::none: return "none";
    case Heterogeneity::additive: return "additive";
    case Heterogeneity::ife: return "ife";
    case Heterogeneity::gfe: return "gfe";
    case Heterogeneity::nstw: return "nstw";
  }
  return "?";
}

std::string to_string(ErrorLaw e) {
  switch (e) {
    case ErrorLaw::iid_normal: return "iid_normal";
    case ErrorLaw::heteroskedastic: return "heteroskedastic";
    case ErrorLaw::ar1: return "ar1";
  }
  return "?";
}

void DGPSpec::validate() const {
  auto fail = [](const std::string& w) { throw Error(ErrorKind::InvalidSpec, w); };
  if (N < 2 || T < 2 || K < 1) fail("need N >= 2, T >= 2, K >= 1");
  if (static_cast<int>(beta.size()) != K) fail("beta must have K entries");
  if (!(loading_regressor_correlation >= -1.0 && loading_regressor_correlation <= 1.0))
    fail("loading_regressor_correlation must lie in [-1, 1]");
  if (error_law == ErrorLaw::ar1 && !(std::abs(ar_rho) < 1.0)) fail("ar1 needs |rho| < 1");
  if (!(sigma >= 0.0) || !(x_sd >= 0.0) || !(loading_sd >= 0.0)) fail("scales must be nonnegative");
  if (heterogeneity == Heterogeneity::ife && (m < 1 || m >= std::min(N, T))) fail("ife needs 1 <= m < min(N,T)");
  if (heterogeneity == Heterogeneity::gfe && (G < 1 || G > N)) fail("gfe needs 1 <= G <= N");
  if (heterogeneity == Heterogeneity::nstw && nstw == NstwForm::ces &&
      (!(ces_d >= 0.0 && ces_d <= 1.0) || ces_gamma == 0.0))
    fail("ces needs d in [0,1] and gamma != 0");
  if (x_factors < 0) fail("x_factors must be >= 0");
  if (!(std::abs(lagged_y) < 1.0)) fail("lagged_y coefficient must satisfy |phi| < 1");
  if (lagged_y != 0.0 && burn_in < 1) fail("lagged_y needs burn_in >= 1");
}

Simulated simulate(const DGPSpec& s) {
  s.validate();
  const int N = s.N, T = s.T, K = s.K;
  const bool dynamic = s.lagged_y != 0.0;
  const int B = dynamic ? s.burn_in : 0;
  const int Tt = T + B;
  const CounterRng root(s.seed);
  CounterRng rh = root.split(1), rxf = root.split(2), rxv = root.split(3), re = root.split(4), rg = root.split(5);

  Truth truth;
  MatrixXd c = MatrixXd::Zero(N, Tt);
  MatrixXd Ffull;
  switch (s.heterogeneity) {
    case Heterogeneity::none: break;
    case Heterogeneity::additive: {
      VectorXd a(N), b(Tt);
      for (int i = 0; i < N; ++i) a(i) = rh.normal();
      for (int t = 0; t < Tt; ++t) b(t) = rh.normal();
      c = a.replicate(1, Tt) + b.transpose().replicate(N, 1);
      break;
    }
    case Heterogeneity::ife: {
      Ffull.resize(Tt, s.m);
      truth.Z.resize(N, s.m);
      for (int t = 0; t < Tt; ++t)
        for (int j = 0; j < s.m; ++j) Ffull(t, j) = rh.normal();
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < s.m; ++j) truth.Z(i, j) = s.loading_mean + s.loading_sd * rh.normal();
      c = truth.Z * Ffull.transpose();
      break;
    }
    case Heterogeneity::gfe: {
      std::vector<int> g(N);
      for (int i = 0; i < N; ++i) g[i] = i % s.G;
      for (int i = N - 1; i > 0; --i) std::swap(g[i], g[rg.index(static_cast<std::size_t>(i + 1))]);
      MatrixXd paths(s.G, Tt);
      for (int h = 0; h < s.G; ++h)
        for (int t = 0; t < Tt; ++t) paths(h, t) = s.separation * rh.normal();
      for (int i = 0; i < N; ++i) c.row(i) = paths.row(g[i]);
      truth.unit_groups = g;
      break;
    }
    case Heterogeneity::nstw: {
      VectorXd z(N), f(Tt);
      for (int i = 0; i < N; ++i) z(i) = 0.5 + rh.uniform();
      for (int t = 0; t < Tt; ++t) f(t) = 0.5 + rh.uniform();
      for (int i = 0; i < N; ++i)
        for (int t = 0; t < Tt; ++t) {
          if (s.nstw == NstwForm::exp_product) {
            c(i, t) = std::exp(z(i) * f(t));
          } else {
            const double g = s.ces_gamma;
            c(i, t) = std::pow(s.ces_d * std::pow(z(i), g) + (1.0 - s.ces_d) * std::pow(f(t), g), 1.0 / g);
          }
        }
      truth.Z = z;
      Ffull = f;
      break;
    }
  }

  MatrixXd Fx(Tt, s.x_factors);
  for (int t = 0; t < Tt; ++t)
    for (int j = 0; j < s.x_factors; ++j) Fx(t, j) = rxf.normal();

  const double cmean = c.mean();
  const double csd = std::sqrt((c.array() - cmean).square().mean());
  const double rho = s.loading_regressor_correlation;
  const double coupling = csd > 1e-12 ? rho / csd : 0.0;
  const double idio = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  // basis the idiosyncratic part is made orthogonal to
  MatrixXd basis(Tt, 0);
  if (s.orthogonal_idiosyncratic) {
    const int mf = s.heterogeneity == Heterogeneity::ife ? static_cast<int>(Ffull.cols()) : 0;
    basis.resize(Tt, mf + s.x_factors);
    if (mf) basis.leftCols(mf) = Ffull;
    if (s.x_factors) basis.rightCols(s.x_factors) = Fx;
  }
  const Projector P(basis);

  std::vector<MatrixXd> x(K);
  for (int k = 0; k < K; ++k) {
    MatrixXd Zx(N, s.x_factors);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < s.x_factors; ++j) Zx(i, j) = 1.0 + rxf.normal();
    MatrixXd v(N, Tt);
    for (int i = 0; i < N; ++i)
      for (int t = 0; t < Tt; ++t) v(i, t) = rxv.normal();
    if (s.orthogonal_idiosyncratic) {
      // off the factors over time and off this regressor's loadings across units
      if (basis.cols()) v = P.annihilate_rows(v);
      const int mz = s.heterogeneity == Heterogeneity::ife ? static_cast<int>(truth.Z.cols()) : 0;
      MatrixXd loads(N, mz + s.x_factors);
      if (mz) loads.leftCols(mz) = truth.Z;
      if (s.x_factors) loads.rightCols(s.x_factors) = Zx;
      if (loads.cols()) v = Projector(loads).annihilate(v);
    }
    MatrixXd xk = MatrixXd::Constant(N, Tt, s.x_mean) + s.x_sd * (coupling * c + idio * v);
    if (s.x_factors) xk += Zx * Fx.transpose();
    x[k] = std::move(xk);
  }

  MatrixXd e = MatrixXd::Zero(N, Tt);
  if (s.sigma > 0.0) {
    switch (s.error_law) {
      case ErrorLaw::iid_normal:
        for (int i = 0; i < N; ++i)
          for (int t = 0; t < Tt; ++t) e(i, t) = s.sigma * re.normal();
        break;
      case ErrorLaw::heteroskedastic:
        for (int i = 0; i < N; ++i) {
          const double si = s.sigma * std::sqrt(0.5 + re.uniform());
          for (int t = 0; t < Tt; ++t) e(i, t) = si * re.normal();
        }
        break;
      case ErrorLaw::ar1: {
        const double innov = s.sigma * std::sqrt(1.0 - s.ar_rho * s.ar_rho);
        for (int i = 0; i < N; ++i) {
          e(i, 0) = s.sigma * re.normal();
          for (int t = 1; t < Tt; ++t) e(i, t) = s.ar_rho * e(i, t - 1) + innov * re.normal();
        }
        break;
      }
    }
  }

  MatrixXd y(N, Tt);
  for (int t = 0; t < Tt; ++t) {
    VectorXd col = c.col(t) + e.col(t);
    for (int k = 0; k < K; ++k) col += s.beta[k] * x[k].col(t);
    if (dynamic) col += s.lagged_y * (t > 0 ? VectorXd(y.col(t - 1)) : VectorXd::Zero(N));
    y.col(t) = col;
  }

  std::vector<MatrixXd> xs;
  std::vector<std::string> names;
  for (int k = 0; k < K; ++k) {
    xs.push_back(x[k].rightCols(T));
    names.push_back("x" + std::to_string(k + 1));
  }
  truth.beta = VectorXd::Map(s.beta.data(), K);
  if (dynamic) {
    xs.push_back(y.middleCols(B - 1, T));
    names.push_back("y_lag");
    truth.beta.conservativeResize(K + 1);
    truth.beta(K) = s.lagged_y;
  }
  if (Ffull.size()) truth.F = Ffull.bottomRows(T);
  truth.Fx = Fx.bottomRows(T);
  truth.c = c.rightCols(T);

  Simulated out;
  out.panel = make_panel(y.rightCols(T), std::move(xs), names);
  out.truth = std::move(truth);
  return out;
}

}  // namespace ifepanel
