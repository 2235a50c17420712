#include "ifepanel/gfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "ifepanel/errors.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/parallel.hpp"
#include "ifepanel/rng.hpp"

namespace ifepanel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_dist(const MatrixXd& a, Eigen::Index i, const MatrixXd& b, Eigen::Index g) {
  return (a.row(i) - b.row(g)).squaredNorm();
}

// Moves the point farthest from its centroid (within a cluster of size >= 2)
// into each empty cluster. Returns true when anything moved.
bool repair_empty(std::vector<int>& labels, std::vector<double>& dist, int G) {
  bool moved = false;
  std::vector<int> size(G, 0);
  for (int l : labels) ++size[l];
  for (int g = 0; g < G; ++g) {
    if (size[g] > 0) continue;
    int arg = -1;
    double best = -1.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (size[labels[i]] >= 2 && dist[i] > best) {
        best = dist[i];
        arg = static_cast<int>(i);
      }
    if (arg < 0) break;
    --size[labels[arg]];
    labels[arg] = g;
    ++size[g];
    dist[arg] = 0.0;
    moved = true;
  }
  return moved;
}

KMeansResult lloyd_run(const MatrixXd& P, int G, CounterRng rng, int max_iter, double tol) {
  const Eigen::Index n = P.rows();
  KMeansResult r;
  // k-means++ seeding
  MatrixXd C(G, P.cols());
  std::vector<double> d2(n, kInf);
  Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
  C.row(0) = P.row(first);
  for (int g = 1; g < G; ++g) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(P, i, C, g - 1));
      total += d2[i];
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    C.row(g) = P.row(pick);
  }

  std::vector<int> labels(n, -1);
  std::vector<double> dist(n, 0.0);
  double prev = kInf;
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = kInf;
      for (int g = 0; g < G; ++g) {
        const double d = sq_dist(P, i, C, g);
        if (d < bd) {
          bd = d;
          best = g;
        }
      }
      if (labels[i] != best) changed = true;
      labels[i] = best;
      dist[i] = bd;
    }
    if (repair_empty(labels, dist, G)) {
      r.repaired = true;
      changed = true;
    }
    C.setZero();
    std::vector<int> cnt(G, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      C.row(labels[i]) += P.row(i);
      ++cnt[labels[i]];
    }
    for (int g = 0; g < G; ++g) C.row(g) /= cnt[g];
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) obj += sq_dist(P, i, C, labels[i]);
    r.best_path.push_back(obj);
    if (!changed) break;
    if (tol > 0.0 && prev - obj <= tol * std::max(prev, 1e-300)) break;
    prev = obj;
  }
  r.labels = std::move(labels);
  r.centroids = C;
  r.objective = r.best_path.back();
  return r;
}

}  // namespace

KMeansResult kmeans(const MatrixXd& points, int G, const KMeansOptions& opts) {
  const Eigen::Index n = points.rows();
  if (G < 1 || G > n) throw Error(ErrorKind::InvalidG, "kmeans: need 1 <= G <= n");
  if (opts.starts < 1 || opts.max_iter < 1)
    throw Error(ErrorKind::InvalidArgument, "kmeans: starts and max_iter must be >= 1");
  std::vector<KMeansResult> runs(opts.starts);
  const CounterRng root(opts.seed);
  parallel_for(static_cast<std::size_t>(opts.starts), opts.threads, [&](std::size_t s) {
    runs[s] = lloyd_run(points, G, root.split(s), opts.max_iter, opts.tol);
  });
  int best = 0;
  for (int s = 1; s < opts.starts; ++s)
    if (runs[s].objective < runs[best].objective) best = s;
  KMeansResult out = std::move(runs[best]);
  out.best_start = best;
  return out;
}

namespace {

struct GroupFit {
  VectorXd beta;
  MatrixXd c;       // G x T
  MatrixXd resid;   // N x T
  double ssr = 0.0;
  std::vector<MatrixXd> xt;  // cell-demeaned regressors
};

GroupFit fit_groups(const PanelData& p, const std::vector<int>& g, int G) {
  const int N = p.N(), T = p.T(), K = p.K();
  std::vector<int> cnt(G, 0);
  for (int i = 0; i < N; ++i) ++cnt[g[i]];
  auto cell_means = [&](const MatrixXd& a) {
    MatrixXd m = MatrixXd::Zero(G, T);
    for (int i = 0; i < N; ++i) m.row(g[i]) += a.row(i);
    for (int h = 0; h < G; ++h) m.row(h) /= cnt[h];
    return m;
  };
  auto demean_cells = [&](const MatrixXd& a, const MatrixXd& m) {
    MatrixXd r = a;
    for (int i = 0; i < N; ++i) r.row(i) -= m.row(g[i]);
    return r;
  };
  GroupFit f;
  const MatrixXd yb = cell_means(p.y);
  const MatrixXd yt = demean_cells(p.y, yb);
  std::vector<MatrixXd> xb(K);
  f.xt.resize(K);
  MatrixXd A(K, K);
  VectorXd c(K);
  for (int k = 0; k < K; ++k) {
    xb[k] = cell_means(p.x[k]);
    f.xt[k] = demean_cells(p.x[k], xb[k]);
  }
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l <= k; ++l) A(k, l) = A(l, k) = f.xt[k].cwiseProduct(f.xt[l]).sum();
    c(k) = f.xt[k].cwiseProduct(yt).sum();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * top)
    throw Error(ErrorKind::RankDeficientDesign, "gf: regressors collinear with group-time effects");
  f.beta = A.ldlt().solve(c);
  f.c = yb;
  f.resid = yt;
  for (int k = 0; k < K; ++k) {
    f.c -= f.beta(k) * xb[k];
    f.resid -= f.beta(k) * f.xt[k];
  }
  f.ssr = f.resid.squaredNorm();
  return f;
}

MatrixXd net_of_x(const PanelData& p, const VectorXd& beta) {
  MatrixXd r = p.y;
  for (int k = 0; k < p.K(); ++k) r -= beta(k) * p.x[k];
  return r;
}

// Reassigns each unit to the closest group path; returns per-unit costs.
std::vector<double> assign_units(const MatrixXd& r, const MatrixXd& c, std::vector<int>& g) {
  const int N = static_cast<int>(r.rows()), G = static_cast<int>(c.rows());
  std::vector<double> cost(N);
  for (int i = 0; i < N; ++i) {
    int best = 0;
    double bd = kInf;
    for (int h = 0; h < G; ++h) {
      const double d = (r.row(i) - c.row(h)).squaredNorm();
      if (d < bd) {
        bd = d;
        best = h;
      }
    }
    g[i] = best;
    cost[i] = bd;
  }
  return cost;
}

struct GfRun {
  GroupFit fit;
  std::vector<int> labels;
  std::vector<double> path;
  int iterations = 0;
  bool converged = false;
  bool repaired = false;
};

GfRun gf_run(const PanelData& p, int G, const VectorXd& beta0, const MatrixXd& c0, int max_iter) {
  GfRun run;
  run.labels.assign(p.N(), 0);
  std::vector<double> cost = assign_units(net_of_x(p, beta0), c0, run.labels);
  run.repaired |= repair_empty(run.labels, cost, G);
  for (int it = 0; it < max_iter; ++it) {
    run.fit = fit_groups(p, run.labels, G);
    run.path.push_back(run.fit.ssr);
    run.iterations = it + 1;
    std::vector<int> next = run.labels;
    cost = assign_units(net_of_x(p, run.fit.beta), run.fit.c, next);
    run.repaired |= repair_empty(next, cost, G);
    if (next == run.labels) {
      run.converged = true;
      break;
    }
    run.labels = std::move(next);
  }
  return run;
}

EstimateResult gf_result(const PanelData& p, const GroupFit& f, int iterations, bool converged, int G) {
  EstimateResult r;
  r.method = Method::GF;
  r.beta = f.beta;
  r.residuals = f.resid;
  r.ssr = f.ssr;
  r.iterations = iterations;
  r.converged = converged;
  r.m_used = G;
  if (!converged) r.flags.push_back("NotConverged");
  MatrixXd Xs(static_cast<Eigen::Index>(p.N()) * p.T(), p.K());
  for (int k = 0; k < p.K(); ++k) Xs.col(k) = vec_panel(f.xt[k]);
  const MatrixXd A = Xs.transpose() * Xs;
  r.vcov = cluster_vcov(Xs, vec_panel(f.resid), A.ldlt().solve(MatrixXd::Identity(p.K(), p.K())), p.N(), p.T());
  finalize_stderr(r);
  return r;
}

void check_gf_dims(const PanelData& p, int G) {
  if (G < 1 || G > p.N()) throw Error(ErrorKind::InvalidG, "gf: need 1 <= G <= N");
  const double nt = static_cast<double>(p.N()) * p.T();
  if (static_cast<double>(G) * p.T() + p.K() >= nt)
    throw Error(ErrorKind::InvalidG, "gf: need G*T + K < N*T");
}

}  // namespace

GfFit gf_fixed_groups(const PanelData& panel, const std::vector<int>& groups, int G) {
  check_gf_dims(panel, G);
  if (static_cast<int>(groups.size()) != panel.N())
    throw Error(ErrorKind::DimensionMismatch, "gf: group vector length differs from N");
  std::vector<int> cnt(G, 0);
  for (int g : groups) {
    if (g < 0 || g >= G) throw Error(ErrorKind::InvalidG, "gf: group label out of range");
    ++cnt[g];
  }
  for (int c : cnt)
    if (c == 0) throw Error(ErrorKind::InvalidG, "gf: empty group");
  GfFit out;
  const GroupFit f = fit_groups(panel, groups, G);
  out.result = gf_result(panel, f, 0, true, G);
  out.grouping.unit_groups = groups;
  out.grouping.time_groups.assign(panel.T(), 0);
  out.grouping.G = G;
  out.grouping.C = 1;
  out.grouping.objective = f.ssr;
  out.group_effects = f.c;
  out.objective_path = {f.ssr};
  return out;
}

GfFit gf_estimate(const PanelData& panel, int G, const KMeansOptions& opts) {
  check_gf_dims(panel, G);
  if (opts.starts < 1 || opts.max_iter < 1)
    throw Error(ErrorKind::InvalidArgument, "gf: starts and max_iter must be >= 1");
  const int N = panel.N(), K = panel.K();

  VectorXd b0, sd(K);
  try {
    const EstimateResult tw = fe_estimate(panel, DemeanMode::two_way);
    b0 = tw.beta;
    for (int k = 0; k < K; ++k) sd(k) = 0.5 * std::abs(b0(k)) + 2.0 * tw.stderr_(k) + 1e-3;
  } catch (const Error&) {
    b0 = beta_given_factors(panel, MatrixXd(panel.T(), 0));
    sd = 0.5 * b0.cwiseAbs().array() + 1e-3;
  }

  std::vector<GfRun> runs(opts.starts);
  std::vector<char> ok(opts.starts, 0);
  const CounterRng root(opts.seed);
  parallel_for(static_cast<std::size_t>(opts.starts), opts.threads, [&](std::size_t s) {
    CounterRng rng = root.split(s);
    VectorXd beta = b0;
    if (s > 0)
      for (int k = 0; k < K; ++k) beta(k) += sd(k) * rng.normal();
    // c from G distinct random units (partial Fisher-Yates)
    std::vector<int> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    for (int h = 0; h < G; ++h) std::swap(idx[h], idx[h + rng.index(static_cast<std::size_t>(N - h))]);
    const MatrixXd r = net_of_x(panel, beta);
    MatrixXd c0(G, panel.T());
    for (int h = 0; h < G; ++h) c0.row(h) = r.row(idx[h]);
    try {
      runs[s] = gf_run(panel, G, beta, c0, opts.max_iter);
      ok[s] = 1;
    } catch (const Error&) {
      ok[s] = 0;  // degenerate start (collinear design under this assignment)
    }
  });
  int best = -1;
  for (int s = 0; s < opts.starts; ++s)
    if (ok[s] && (best < 0 || runs[s].fit.ssr < runs[best].fit.ssr)) best = s;
  if (best < 0) throw Error(ErrorKind::RankDeficientDesign, "gf: no start produced an identified fit");

  const GfRun& w = runs[best];
  GfFit out;
  out.result = gf_result(panel, w.fit, w.iterations, w.converged, G);
  if (w.repaired) {
    out.result.flags.push_back("EmptyGroup");
    out.grouping.flags.push_back("EmptyGroup");
  }
  out.grouping.unit_groups = w.labels;
  out.grouping.time_groups.assign(panel.T(), 0);
  out.grouping.G = G;
  out.grouping.C = 1;
  out.grouping.objective = w.fit.ssr;
  out.group_effects = w.fit.c;
  out.objective_path = w.path;
  out.best_start = best;
  return out;
}

GfSelection gf_select_G(const PanelData& panel, int G_max, const KMeansOptions& opts) {
  if (G_max < 1 || 2 * G_max > panel.N()) throw Error(ErrorKind::InvalidG, "gf_select_G: need 1 <= G_max <= N/2");
  const double nt = static_cast<double>(panel.N()) * panel.T();
  GfSelection sel;
  sel.penalty = std::log(nt) / nt;
  double best = kInf;
  for (int G = 1; G <= G_max; ++G) {
    KMeansOptions o = opts;
    o.seed = derive_seed(opts.seed, static_cast<std::uint64_t>(G));
    const GfFit f = gf_estimate(panel, G, o);
    const double ssr = f.result.ssr;
    const double bic = std::log(std::max(ssr, std::numeric_limits<double>::min()) / nt) +
                       (static_cast<double>(G) * panel.T() + panel.N() + panel.K()) * sel.penalty;
    sel.ssr_path.push_back(ssr);
    sel.bic_path.push_back(bic);
    if (bic < best) {
      best = bic;
      sel.G_hat = G;
    }
  }
  return sel;
}

BlmReport discretize_blm(const PanelData& panel, double gamma, int G_max, int C_max, const KMeansOptions& opts) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidGamma, "discretize_blm: gamma must lie in (0, 1]");
  const int N = panel.N(), T = panel.T(), K = panel.K();
  G_max = std::min(std::max(G_max, 1), N);
  C_max = std::min(std::max(C_max, 1), T);
  // moments w_it = (x_it', y_it)
  std::vector<const MatrixXd*> vars;
  for (int k = 0; k < K; ++k) vars.push_back(&panel.x[k]);
  vars.push_back(&panel.y);
  const int d = K + 1;
  MatrixXd xi(N, d), psi(T, d);
  for (int v = 0; v < d; ++v) {
    xi.col(v) = vars[v]->rowwise().mean();
    psi.col(v) = vars[v]->colwise().mean().transpose();
  }
  BlmReport rep;
  double vg = 0.0, vc = 0.0;
  for (int v = 0; v < d; ++v) {
    vg += (vars[v]->colwise() - xi.col(v)).squaredNorm();
    vc += (vars[v]->rowwise() - psi.col(v).transpose()).squaredNorm();
  }
  rep.V_unit = vg / (static_cast<double>(N) * T * T);
  rep.V_time = vc / (static_cast<double>(T) * N * N);

  auto choose = [&](const MatrixXd& pts, int cap, double V, std::vector<double>& Q, bool& binding,
                    std::uint64_t stream) {
    KMeansResult chosen;
    for (int G = 1; G <= cap; ++G) {
      KMeansOptions o = opts;
      o.seed = derive_seed(opts.seed, stream * 1000 + static_cast<std::uint64_t>(G));
      KMeansResult km = kmeans(pts, G, o);
      Q.push_back(km.objective / static_cast<double>(pts.rows()));
      chosen = std::move(km);
      if (Q.back() <= gamma * V) return std::make_pair(G, chosen);
    }
    binding = true;
    return std::make_pair(cap, chosen);
  };
  auto [G, gk] = choose(xi, G_max, rep.V_unit, rep.Q_unit, rep.unit_cap_binding, 1);
  auto [C, ck] = choose(psi, C_max, rep.V_time, rep.Q_time, rep.time_cap_binding, 2);
  rep.grouping.unit_groups = gk.labels;
  rep.grouping.time_groups = ck.labels;
  rep.grouping.G = G;
  rep.grouping.C = C;
  rep.grouping.objective = gk.objective + ck.objective;
  if (rep.unit_cap_binding) rep.grouping.flags.push_back("UnitCapBinding");
  if (rep.time_cap_binding) rep.grouping.flags.push_back("TimeCapBinding");
  return rep;
}

int tsgfm_components(const Grouping& grouping, int N, int T) {
  const int C = grouping.C, G = grouping.G;
  // nodes: delta cells (i, l) then nu cells (t, g)
  const int nd = N * C, nn = T * G;
  std::vector<int> parent(nd + nn);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<char> used(nd + nn, 0);
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t) {
      const int a = i * C + grouping.time_groups[t];
      const int b = nd + t * G + grouping.unit_groups[i];
      used[a] = used[b] = 1;
      const int ra = find(a), rb = find(b);
      if (ra != rb) parent[ra] = rb;
    }
  int comps = 0;
  for (int v = 0; v < nd + nn; ++v)
    if (used[v] && find(v) == v) ++comps;
  return comps;
}

namespace {

// Residual of v after projecting on both dummy blocks (alternating projections).
class TwoBlockAbsorber {
 public:
  TwoBlockAbsorber(const Grouping& g, int N, int T, const TsgfmOptions& o)
      : g_(g), N_(N), T_(T), opts_(o), cnt_d_(N * g.C, 0), cnt_n_(T * g.G, 0) {
    for (int i = 0; i < N; ++i)
      for (int t = 0; t < T; ++t) {
        ++cnt_d_[i * g.C + g.time_groups[t]];
        ++cnt_n_[t * g.G + g.unit_groups[i]];
      }
  }

  MatrixXd absorb(MatrixXd v, int* iters, bool* ok) const {
    const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    std::vector<double> sd(cnt_d_.size()), sn(cnt_n_.size());
    for (int it = 1; it <= opts_.max_iter; ++it) {
      std::fill(sd.begin(), sd.end(), 0.0);
      for (int i = 0; i < N_; ++i)
        for (int t = 0; t < T_; ++t) sd[i * g_.C + g_.time_groups[t]] += v(i, t);
      double change = 0.0;
      for (std::size_t a = 0; a < sd.size(); ++a)
        if (cnt_d_[a]) {
          sd[a] /= cnt_d_[a];
          change = std::max(change, std::abs(sd[a]));
        }
      for (int i = 0; i < N_; ++i)
        for (int t = 0; t < T_; ++t) v(i, t) -= sd[i * g_.C + g_.time_groups[t]];
      std::fill(sn.begin(), sn.end(), 0.0);
      for (int i = 0; i < N_; ++i)
        for (int t = 0; t < T_; ++t) sn[t * g_.G + g_.unit_groups[i]] += v(i, t);
      for (std::size_t b = 0; b < sn.size(); ++b)
        if (cnt_n_[b]) {
          sn[b] /= cnt_n_[b];
          change = std::max(change, std::abs(sn[b]));
        }
      for (int i = 0; i < N_; ++i)
        for (int t = 0; t < T_; ++t) v(i, t) -= sn[t * g_.G + g_.unit_groups[i]];
      if (change <= opts_.tol * scale) {
        if (iters) *iters = it;
        if (ok) *ok = true;
        return v;
      }
    }
    if (iters) *iters = opts_.max_iter;
    if (ok) *ok = false;
    return v;
  }

 private:
  const Grouping& g_;
  int N_, T_;
  TsgfmOptions opts_;
  std::vector<int> cnt_d_, cnt_n_;
};

}  // namespace

EstimateResult tsgfm_estimate(const PanelData& panel, const Grouping& grouping, const TsgfmOptions& opts) {
  const int N = panel.N(), T = panel.T(), K = panel.K();
  if (static_cast<int>(grouping.unit_groups.size()) != N || static_cast<int>(grouping.time_groups.size()) != T)
    throw Error(ErrorKind::DimensionMismatch, "tsgfm: grouping does not match panel");
  auto check = [](const std::vector<int>& lab, int n, const char* what) {
    std::vector<int> cnt(n, 0);
    for (int l : lab) {
      if (l < 0 || l >= n) throw Error(ErrorKind::InvalidG, std::string("tsgfm: ") + what + " label out of range");
      ++cnt[l];
    }
    for (int c : cnt)
      if (!c) throw Error(ErrorKind::InvalidG, std::string("tsgfm: unused ") + what + " label");
  };
  check(grouping.unit_groups, grouping.G, "unit group");
  check(grouping.time_groups, grouping.C, "time group");
  if (static_cast<double>(N) * grouping.C + static_cast<double>(T) * grouping.G + K >= static_cast<double>(N) * T)
    throw Error(ErrorKind::InvalidArgument, "tsgfm: need N*C + T*G + K < N*T");

  const TwoBlockAbsorber ab(grouping, N, T, opts);
  int iters = 0, total_iters = 0;
  bool ok = true, all_ok = true;
  const MatrixXd yt = ab.absorb(panel.y, &iters, &ok);
  total_iters = std::max(total_iters, iters);
  all_ok &= ok;
  std::vector<MatrixXd> xt(K);
  for (int k = 0; k < K; ++k) {
    xt[k] = ab.absorb(panel.x[k], &iters, &ok);
    total_iters = std::max(total_iters, iters);
    all_ok &= ok;
  }
  MatrixXd A(K, K);
  VectorXd c(K);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l <= k; ++l) A(k, l) = A(l, k) = xt[k].cwiseProduct(xt[l]).sum();
    c(k) = xt[k].cwiseProduct(yt).sum();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-12 * top)
    throw Error(ErrorKind::RankDeficientDesign, "tsgfm: regressors collinear with the dummy blocks");

  EstimateResult r;
  r.method = Method::TSGFM;
  r.beta = A.ldlt().solve(c);
  r.residuals = yt;
  for (int k = 0; k < K; ++k) r.residuals -= r.beta(k) * xt[k];
  r.ssr = r.residuals.squaredNorm();
  r.iterations = total_iters;
  r.converged = all_ok;
  if (!all_ok) r.flags.push_back("NotConverged");
  r.flags.push_back("CollinearDummies=" + std::to_string(tsgfm_components(grouping, N, T)));
  MatrixXd Xs(static_cast<Eigen::Index>(N) * T, K);
  for (int k = 0; k < K; ++k) Xs.col(k) = vec_panel(xt[k]);
  r.vcov = cluster_vcov(Xs, vec_panel(r.residuals), A.ldlt().solve(MatrixXd::Identity(K, K)), N, T);
  finalize_stderr(r);
  return r;
}

void write_unit_groups_csv(const Grouping& g, const std::vector<std::string>& unit_ids, std::ostream& out) {
  if (unit_ids.size() != g.unit_groups.size())
    throw Error(ErrorKind::DimensionMismatch, "grouping: unit label count differs");
  out << "unit,group\n";
  for (std::size_t i = 0; i < unit_ids.size(); ++i) out << unit_ids[i] << ',' << g.unit_groups[i] + 1 << '\n';
}

void write_time_groups_csv(const Grouping& g, const std::vector<std::string>& time_ids, std::ostream& out) {
  if (time_ids.size() != g.time_groups.size())
    throw Error(ErrorKind::DimensionMismatch, "grouping: time label count differs");
  out << "time,group\n";
  for (std::size_t t = 0; t < time_ids.size(); ++t) out << time_ids[t] << ',' << g.time_groups[t] + 1 << '\n';
}

}  // namespace ifepanel
