#include "ifepanel/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ifepanel/diagnostics.hpp"
#include "ifepanel/errors.hpp"
#include "ifepanel/factor_select.hpp"
#include "ifepanel/gfe.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/parallel.hpp"
#include "ifepanel/rng.hpp"

namespace fs = std::filesystem;

namespace ifepanel {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

std::string canonical_type(const std::string& raw) {
  std::string t = upper(raw);
  std::replace(t.begin(), t.end(), '_', '-');
  if (t == "ILSBC") t = "ILS-BC";
  if (t == "TSGF-M") t = "TSGFM";
  static const std::vector<std::string> known = {"POLS", "FE",  "TFE",  "TWFE", "ILS", "ILS-BC", "CCEP",
                                                 "DCCEP", "FSIV", "TSIV", "NNR", "PNNR", "GF",  "TSGFM"};
  if (std::find(known.begin(), known.end(), t) == known.end()) config_error("unknown estimator type '" + raw + "'");
  return t;
}

// Integer option where "auto" maps to -1.
int int_or_auto(const json& o, const char* key, int def) {
  if (!o.contains(key)) return def;
  const json& v = o.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return -1;
    config_error(std::string("option '") + key + "' must be an integer or \"auto\"");
  }
  if (!v.is_number_integer()) config_error(std::string("option '") + key + "' must be an integer or \"auto\"");
  return v.get<int>();
}

template <class T>
T opt(const json& o, const char* key, T def) {
  if (!o.contains(key)) return def;
  try {
    return o.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("option '") + key + "' has the wrong type");
  }
}

FactorMethod parse_factor_method(const std::string& s) {
  const std::string u = upper(s);
  static const std::pair<const char*, FactorMethod> map[] = {
      {"PC1", FactorMethod::PC1}, {"PC2", FactorMethod::PC2}, {"PC3", FactorMethod::PC3},
      {"IC1", FactorMethod::IC1}, {"IC2", FactorMethod::IC2}, {"IC3", FactorMethod::IC3},
      {"ER", FactorMethod::ER},   {"GR", FactorMethod::GR},   {"ED", FactorMethod::ED},
      {"GOS", FactorMethod::GOS}};
  for (const auto& [name, m] : map)
    if (u == name) return m;
  config_error("unknown factor selection method '" + s + "'");
}

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  std::string s(buf);
  if (s.rfind("-0.", 0) == 0 && s.find_first_not_of("-0.") == std::string::npos) s = s.substr(1);
  return s;
}

std::string fmtg(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Moves named regressors that are constant across units into a T x n matrix.
PanelData split_observed_factors(const PanelData& p, const std::vector<std::string>& names, MatrixXd& D) {
  D.resize(p.T(), static_cast<Eigen::Index>(names.size()));
  std::vector<bool> drop(p.K(), false);
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = std::find(p.var_names.begin(), p.var_names.end(), names[j]);
    if (it == p.var_names.end()) config_error("observed factor '" + names[j] + "' is not a regressor column");
    const int k = static_cast<int>(it - p.var_names.begin());
    const MatrixXd& x = p.x[k];
    if ((x.rowwise() - x.row(0)).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()))
      config_error("observed factor '" + names[j] + "' varies across units");
    D.col(static_cast<Eigen::Index>(j)) = x.row(0).transpose();
    drop[k] = true;
  }
  PanelData out = p;
  out.x.clear();
  out.var_names.clear();
  for (int k = 0; k < p.K(); ++k)
    if (!drop[k]) {
      out.x.push_back(p.x[k]);
      out.var_names.push_back(p.var_names[k]);
    }
  if (out.x.empty()) config_error("no regressors left after removing observed factors");
  return out;
}

// Re-expands an estimate over a reduced regressor set to the full variable list (NaN fill).
EstimateResult expand(const EstimateResult& r, const std::vector<std::string>& sub, const std::vector<std::string>& full) {
  EstimateResult out = r;
  const Eigen::Index K = static_cast<Eigen::Index>(full.size());
  out.beta = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
  out.stderr_ = out.beta;
  out.vcov = MatrixXd::Constant(K, K, std::numeric_limits<double>::quiet_NaN());
  std::vector<Eigen::Index> pos;
  for (const auto& n : sub) pos.push_back(std::find(full.begin(), full.end(), n) - full.begin());
  for (std::size_t a = 0; a < pos.size(); ++a) {
    out.beta(pos[a]) = r.beta(static_cast<Eigen::Index>(a));
    out.stderr_(pos[a]) = r.stderr_(static_cast<Eigen::Index>(a));
    for (std::size_t b = 0; b < pos.size(); ++b)
      out.vcov(pos[a], pos[b]) = r.vcov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  return out;
}

KMeansOptions kmeans_options(const json& o, std::uint64_t seed, int threads, int def_starts) {
  KMeansOptions k;
  k.starts = opt<int>(o, "starts", def_starts);
  k.max_iter = opt<int>(o, "max_iter", 100);
  k.seed = seed;
  k.threads = threads;
  return k;
}

}  // namespace

std::vector<EstimatorSpec> parse_estimators(const json& list) {
  if (!list.is_array()) config_error("'estimators' must be a list");
  std::vector<EstimatorSpec> out;
  for (const auto& e : list) {
    EstimatorSpec s;
    if (e.is_string()) {
      s.type = canonical_type(e.get<std::string>());
    } else if (e.is_object()) {
      if (!e.contains("type") || !e.at("type").is_string()) config_error("estimator entry needs a string 'type'");
      s.type = canonical_type(e.at("type").get<std::string>());
      s.options = e;
      s.options.erase("type");
      if (e.contains("label")) {
        s.label = opt<std::string>(e, "label", "");
        s.options.erase("label");
      }
    } else {
      config_error("estimator entries must be strings or objects");
    }
    if (s.label.empty()) {
      s.label = s.type;
      if ((s.type == "ILS" || s.type == "ILS-BC") && s.options.contains("m")) {
        const json& m = s.options.at("m");
        s.label += "(" + (m.is_string() ? m.get<std::string>() : m.dump()) + ")";
      }
      if (s.type == "GF" && s.options.contains("G")) {
        const json& g = s.options.at("G");
        s.label += "(" + (g.is_string() ? g.get<std::string>() : g.dump()) + ")";
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) config_error("config must be a JSON object");
  RunConfig c;
  if (!j.contains("data") || !j.at("data").is_object()) config_error("config needs a 'data' object");
  const json& d = j.at("data");
  if (!d.contains("path") || !d.at("path").is_string()) config_error("data.path is required");
  fs::path dp = d.at("path").get<std::string>();
  if (dp.is_relative()) dp = fs::path(base_dir) / dp;
  c.data_path = dp.string();
  c.schema.unit = opt<std::string>(d, "unit", "unit");
  c.schema.time = opt<std::string>(d, "time", "time");
  c.schema.y = opt<std::string>(d, "y", "y");
  c.schema.x = opt<std::vector<std::string>>(d, "x", {});

  if (j.contains("estimators")) c.estimators = parse_estimators(j.at("estimators"));
  DiagnosticsSpec& dg = c.diagnostics;
  if (j.contains("diagnostics")) {
    const json& dj = j.at("diagnostics");
    if (!dj.is_array()) config_error("'diagnostics' must be a list of test names");
    dg.cd = dg.cdw = dg.cd_star = dg.er = dg.gos = false;
    for (const auto& t : dj) {
      if (!t.is_string()) config_error("diagnostic names must be strings");
      const std::string n = upper(t.get<std::string>());
      if (n == "CD") dg.cd = true;
      else if (n == "CDW") dg.cdw = true;
      else if (n == "CD*" || n == "CDSTAR" || n == "CD_STAR") dg.cd_star = true;
      else if (n == "ER" || n == "M_ER") dg.er = true;
      else if (n == "GOS" || n == "M_GOS") dg.gos = true;
      else config_error("unknown diagnostic '" + t.get<std::string>() + "'");
    }
  }
  dg.cdw_reps = opt<int>(j, "cdw_reps", 30);
  if (dg.cdw && dg.cdw_reps < 30) config_error("cdw_reps must be at least 30");
  c.any_diagnostic = dg.cd || dg.cdw || dg.cd_star || dg.er || dg.gos;
  if (c.estimators.empty() && !c.any_diagnostic) config_error("config requests neither estimators nor diagnostics");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer()) config_error("seed must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  bool stochastic = dg.cdw;
  for (const auto& e : c.estimators) stochastic |= (e.type == "GF" || e.type == "TSGFM");
  if (stochastic && !c.seed) config_error("a seed is required when CDw, GF or TSGFM is requested");
  c.threads = std::max(1, opt<int>(j, "threads", 1));
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (!o.is_object()) config_error("'output' must be an object");
    fs::path od = opt<std::string>(o, "dir", ".");
    if (od.is_relative()) od = fs::path(base_dir) / od;
    c.out_dir = od.string();
    c.out_name = opt<std::string>(o, "name", "results");
  } else {
    c.out_dir = base_dir;
  }
  return c;
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open " + path);
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, path + ": " + e.what());
  }
}

std::string parent_dir(const std::string& path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

}  // namespace

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_json_file(path), parent_dir(path)); }

DGPSpec parse_dgp_spec(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidSpec, "DGP spec must be a JSON object");
  DGPSpec s;
  try {
    s.N = j.value("N", s.N);
    s.T = j.value("T", s.T);
    s.K = j.value("K", s.K);
    if (j.contains("beta")) {
      s.beta = j.at("beta").get<std::vector<double>>();
      if (!j.contains("K")) s.K = static_cast<int>(s.beta.size());
    } else {
      s.beta.assign(s.K, 1.0);
    }
    if (j.contains("heterogeneity")) {
      const json& h = j.at("heterogeneity");
      const std::string type = h.is_string() ? h.get<std::string>() : h.at("type").get<std::string>();
      const json ho = h.is_object() ? h : json::object();
      if (type == "none") s.heterogeneity = Heterogeneity::none;
      else if (type == "additive") s.heterogeneity = Heterogeneity::additive;
      else if (type == "ife") {
        s.heterogeneity = Heterogeneity::ife;
        s.m = ho.value("m", s.m);
        s.loading_mean = ho.value("loading_mean", s.loading_mean);
        s.loading_sd = ho.value("loading_sd", s.loading_sd);
      } else if (type == "gfe") {
        s.heterogeneity = Heterogeneity::gfe;
        s.G = ho.value("G", s.G);
        s.separation = ho.value("separation", s.separation);
      } else if (type == "nstw") {
        s.heterogeneity = Heterogeneity::nstw;
        const std::string h_fn = ho.value("h", std::string("exp_product"));
        if (h_fn == "exp_product") s.nstw = NstwForm::exp_product;
        else if (h_fn == "ces") s.nstw = NstwForm::ces;
        else throw Error(ErrorKind::InvalidSpec, "unknown nstw h '" + h_fn + "'");
        s.ces_d = ho.value("d", s.ces_d);
        s.ces_gamma = ho.value("gamma", s.ces_gamma);
      } else {
        throw Error(ErrorKind::InvalidSpec, "unknown heterogeneity '" + type + "'");
      }
    }
    s.loading_regressor_correlation = j.value("loading_regressor_correlation", s.loading_regressor_correlation);
    s.x_factors = j.value("x_factors", s.x_factors);
    s.x_mean = j.value("x_mean", s.x_mean);
    s.x_sd = j.value("x_sd", s.x_sd);
    s.orthogonal_idiosyncratic = j.value("orthogonal_idiosyncratic", s.orthogonal_idiosyncratic);
    if (j.contains("errors")) {
      const json& e = j.at("errors");
      const std::string law = e.is_string() ? e.get<std::string>() : e.at("law").get<std::string>();
      const json eo = e.is_object() ? e : json::object();
      if (law == "iid_normal") s.error_law = ErrorLaw::iid_normal;
      else if (law == "heteroskedastic") s.error_law = ErrorLaw::heteroskedastic;
      else if (law == "ar1") s.error_law = ErrorLaw::ar1;
      else throw Error(ErrorKind::InvalidSpec, "unknown error law '" + law + "'");
      s.sigma = eo.value("sigma", s.sigma);
      s.ar_rho = eo.value("rho", s.ar_rho);
    }
    s.lagged_y = j.value("lagged_y", s.lagged_y);
    s.burn_in = j.value("burn_in", s.burn_in);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, e.what());
  }
  s.validate();
  return s;
}

DGPSpec load_dgp_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, path + ": " + e.what());
  }
  return parse_dgp_spec(j);
}

json truth_to_json(const DGPSpec& spec, const Truth& t) {
  auto mat = [](const MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json r = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
      a.push_back(r);
    }
    return a;
  };
  json j;
  j["seed"] = spec.seed;
  j["N"] = spec.N;
  j["T"] = spec.T;
  j["heterogeneity"] = to_string(spec.heterogeneity);
  j["error_law"] = to_string(spec.error_law);
  j["beta"] = std::vector<double>(t.beta.data(), t.beta.data() + t.beta.size());
  j["F"] = mat(t.F);
  j["Z"] = mat(t.Z);
  j["Fx"] = mat(t.Fx);
  j["c"] = mat(t.c);
  std::vector<int> g1;
  for (int g : t.unit_groups) g1.push_back(g + 1);
  j["unit_groups"] = g1;
  return j;
}

ColumnResult run_estimator(const PanelData& panel, const EstimatorSpec& spec, std::uint64_t seed, int threads) {
  ColumnResult col;
  col.spec = spec;
  const json& o = spec.options;
  const std::string& t = spec.type;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (t == "POLS" || t == "FE" || t == "TFE" || t == "TWFE") {
      const DemeanMode mode = t == "POLS" ? DemeanMode::none
                              : t == "FE" ? DemeanMode::unit
                              : t == "TFE" ? DemeanMode::time
                                           : DemeanMode::two_way;
      col.est = fe_estimate(panel, mode);
    } else if (t == "ILS" || t == "ILS-BC") {
      IlsOptions io;
      io.m = int_or_auto(o, "m", 1);
      io.tol = opt<double>(o, "tol", io.tol);
      io.max_iter = opt<int>(o, "max_iter", io.max_iter);
      const std::string init = opt<std::string>(o, "init", "two_way_within");
      if (init == "pooled_ols") io.init = IlsInit::pooled_ols;
      else if (init == "two_way_within") io.init = IlsInit::two_way_within;
      else if (init == "user") {
        io.init = IlsInit::user;
        const auto b = opt<std::vector<double>>(o, "beta", {});
        io.user_beta = VectorXd::Map(b.data(), static_cast<Eigen::Index>(b.size()));
      } else {
        config_error("unknown ILS init '" + init + "'");
      }
      if (io.m < 0) {
        const MatrixXd u = fe_estimate(panel, DemeanMode::none).residuals;
        io.m = er_gr(u, default_m_max(panel.N(), panel.T())).first.m_hat;
      }
      IlsFit fit = ils_estimate(panel, io);
      if (t == "ILS-BC") {
        BiasCorrectionOptions bo;
        if (o.contains("terms")) {
          bo.b1 = bo.b2 = bo.b3 = false;
          for (const auto& term : opt<std::vector<std::string>>(o, "terms", {})) {
            const std::string u = upper(term);
            if (u == "B1") bo.b1 = true;
            else if (u == "B2") bo.b2 = true;
            else if (u == "B3") bo.b3 = true;
            else config_error("unknown bias term '" + term + "'");
          }
        }
        bo.homoskedastic = opt<bool>(o, "homoskedastic", false);
        bo.bandwidth = opt<int>(o, "bandwidth", -1);
        EstimateResult bc = ils_bias_correct(fit, panel, bo);
        bc.method = Method::ILS_BC;
        col.est = bc;
      } else {
        col.est = fit.result;
      }
    } else if (t == "CCEP" || t == "DCCEP") {
      CcepOptions co;
      co.dynamic = t == "DCCEP";
      co.lags = opt<int>(o, "lags", -1);
      const std::string b = opt<std::string>(o, "boundary", "backfill");
      if (b == "trim") co.boundary = LagBoundary::trim;
      else if (b != "backfill") config_error("boundary must be 'backfill' or 'trim'");
      const auto of = opt<std::vector<std::string>>(o, "observed_factors", {});
      if (!of.empty()) {
        const PanelData reduced = split_observed_factors(panel, of, co.observed_factors);
        col.est = expand(ccep_estimate(reduced, co), reduced.var_names, panel.var_names);
      } else {
        col.est = ccep_estimate(panel, co);
      }
    } else if (t == "FSIV" || t == "TSIV") {
      TsivOptions to;
      to.m_x = int_or_auto(o, "m_x", -1);
      to.m = int_or_auto(o, "m", -1);
      to.m_max = opt<int>(o, "m_max", -1);
      const TsivFit fit = tsiv_estimate(panel, to);
      col.est = t == "FSIV" ? fit.fsiv : fit.tsiv;
    } else if (t == "NNR" || t == "PNNR") {
      PnnrOptions po;
      po.psi_grid = opt<std::vector<double>>(o, "psi_grid", {});
      po.grid_size = opt<int>(o, "grid_size", po.grid_size);
      po.m_max = opt<int>(o, "m_max", po.m_max);
      po.selector = parse_factor_method(opt<std::string>(o, "selector", "IC1"));
      po.post_iterations = opt<int>(o, "post_iterations", po.post_iterations);
      po.tol = opt<double>(o, "tol", po.tol);
      po.inner_max_iter = opt<int>(o, "inner_max_iter", po.inner_max_iter);
      const PnnrFit fit = pnnr_estimate(panel, po);
      if (t == "PNNR") {
        col.est = fit.result;
      } else {
        EstimateResult r;
        r.method = Method::NNR;
        r.beta = fit.beta_nnr;
        r.stderr_ = VectorXd::Constant(panel.K(), std::numeric_limits<double>::quiet_NaN());
        r.vcov = MatrixXd::Constant(panel.K(), panel.K(), std::numeric_limits<double>::quiet_NaN());
        MatrixXd res = panel.y;
        for (int k = 0; k < panel.K(); ++k) res -= fit.beta_nnr(k) * panel.x[k];
        r.residuals = res;
        r.ssr = res.squaredNorm();
        r.converged = fit.nnr_converged;
        r.iterations = static_cast<int>(fit.objective_path.size());
        r.variance = "none";
        col.est = r;
      }
    } else if (t == "GF") {
      const KMeansOptions ko = kmeans_options(o, seed, threads, 1000);
      int G = int_or_auto(o, "G", 2);
      if (o.contains("G") && o.at("G").is_string() && o.at("G").get<std::string>() == "bic") G = -1;
      if (o.contains("G") && o.at("G").is_string() && o.at("G").get<std::string>() != "bic" &&
          o.at("G").get<std::string>() != "auto")
        config_error("GF option G must be an integer or \"bic\"");
      if (G < 0) {
        const int gmax = opt<int>(o, "G_max", std::min(6, panel.N() / 2));
        G = gf_select_G(panel, gmax, ko).G_hat;
      }
      const GfFit fit = gf_estimate(panel, G, ko);
      col.est = fit.result;
      col.unit_clusters = G;
      col.time_clusters = 1;
      col.grouping = fit.grouping;
    } else if (t == "TSGFM") {
      const KMeansOptions ko = kmeans_options(o, seed, threads, 100);
      const double gamma = opt<double>(o, "gamma", 1.0);
      const int gmax = opt<int>(o, "G_max", std::min(10, panel.N() / 2));
      const int cmax = opt<int>(o, "C_max", std::min(10, panel.T() / 2));
      const BlmReport rep = discretize_blm(panel, gamma, gmax, cmax, ko);
      col.est = tsgfm_estimate(panel, rep.grouping);
      for (const auto& f : rep.grouping.flags) col.est.flags.push_back(f);
      col.unit_clusters = rep.grouping.G;
      col.time_clusters = rep.grouping.C;
      col.grouping = rep.grouping;
    }
    col.ok = true;
    col.status = col.est.converged ? "ok" : "ok (not converged)";
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    col.ok = false;
    col.status = std::string(to_string(e.kind()));
  } catch (const std::exception& e) {
    col.ok = false;
    col.status = std::string("error: ") + e.what();
  }
  col.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return col;
}

Table results_table(const PanelData& panel, const std::vector<ColumnResult>& cols, const DiagnosticsSpec& dg,
                    std::uint64_t seed) {
  Table t;
  for (const auto& v : panel.var_names) {
    t.row_labels.push_back(v);
    t.row_labels.push_back("(se)");
  }
  const std::vector<std::string> tail = {"N",        "Units",    "T",     "CD",    "CD p",   "CDw",
                                         "CDw p",    "CD*",      "CD* p", "m_ER",  "m_GOS",  "Clusters (units)",
                                         "Clusters (time)", "Converged", "Iterations", "m used", "Status"};
  t.row_labels.insert(t.row_labels.end(), tail.begin(), tail.end());
  const std::size_t R = t.row_labels.size();
  const std::size_t K = panel.var_names.size();
  t.cells.assign(R, std::vector<std::string>(cols.size(), "-"));
  std::vector<std::vector<std::string>> colcells(cols.size());
  parallel_for(cols.size(), 1, [&](std::size_t c) {
    auto& cell = colcells[c];
    cell.assign(R, "-");
    const ColumnResult& cr = cols[c];
    std::size_t row = 2 * K;
    auto set = [&](const std::string& label, const std::string& v) {
      const auto it = std::find(tail.begin(), tail.end(), label);
      cell[row + static_cast<std::size_t>(it - tail.begin())] = v;
    };
    set("Units", std::to_string(panel.N()));
    set("T", std::to_string(panel.T()));
    set("Status", cr.status);
    if (!cr.ok) return;
    const EstimateResult& e = cr.est;
    for (std::size_t k = 0; k < K && k < static_cast<std::size_t>(e.beta.size()); ++k) {
      cell[2 * k] = fmt(e.beta(static_cast<Eigen::Index>(k)));
      if (e.stderr_.size() > static_cast<Eigen::Index>(k)) cell[2 * k + 1] = fmt(e.stderr_(static_cast<Eigen::Index>(k)));
    }
    const MatrixXd& U = e.residuals;
    set("N", std::to_string(U.rows() * U.cols()));
    set("T", std::to_string(U.cols()));
    auto guarded = [&](auto&& fn) {
      try {
        fn();
      } catch (const Error& err) {
        return std::string(to_string(err.kind()));
      }
      return std::string();
    };
    if (dg.cd) {
      const std::string err = guarded([&] {
        const TestResult r = cd_test(U);
        set("CD", fmt(r.statistic, 3));
        set("CD p", fmt(r.p_value, 3));
      });
      if (!err.empty()) set("CD", err);
    }
    if (dg.cdw) {
      const std::string err = guarded([&] {
        CdwOptions co;
        co.reps = dg.cdw_reps;
        co.seed = derive_seed(seed, 1000 + c);
        const TestResult r = cdw_test(U, co);
        set("CDw", fmt(r.statistic, 3));
        set("CDw p", fmt(r.p_value, 3));
      });
      if (!err.empty()) set("CDw", err);
    }
    if (dg.cd_star) {
      const std::string err = guarded([&] {
        const TestResult r = cd_star(U);
        set("CD*", fmt(r.statistic, 3));
        set("CD* p", fmt(r.p_value, 3));
      });
      if (!err.empty()) set("CD*", err);
    }
    const int mmax = default_m_max(static_cast<int>(U.rows()), static_cast<int>(U.cols()));
    if (dg.er) {
      const std::string err = guarded([&] { set("m_ER", std::to_string(er_gr(U, mmax).first.m_hat)); });
      if (!err.empty()) set("m_ER", err);
    }
    if (dg.gos) {
      if (U.rows() <= U.cols()) {
        set("m_GOS", "n/a (N<=T)");
      } else {
        const std::string err = guarded([&] { set("m_GOS", std::to_string(gos(U, mmax).m_hat)); });
        if (!err.empty()) set("m_GOS", err);
      }
    }
    if (cr.unit_clusters > 0) {
      set("Clusters (units)", std::to_string(cr.unit_clusters));
      set("Clusters (time)", std::to_string(cr.time_clusters));
    }
    set("Converged", e.converged ? "Yes" : "No");
    set("Iterations", std::to_string(e.iterations));
    if (e.m_used) set("m used", std::to_string(*e.m_used));
  });
  for (std::size_t c = 0; c < cols.size(); ++c) {
    t.col_labels.push_back(cols[c].spec.label);
    for (std::size_t r = 0; r < R; ++r) t.cells[r][c] = colcells[c][r];
  }
  return t;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char ch : s) {
    if (ch == '"') o += '"';
    o += ch;
  }
  return o + "\"";
}

std::string file_safe(const std::string& s) {
  std::string o;
  for (char ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-';
    if (keep) o += ch;
    else if (!o.empty() && o.back() != '_') o += '_';
  }
  while (!o.empty() && o.back() == '_') o.pop_back();
  return o.empty() ? "column" : o;
}

}  // namespace

void write_csv(const Table& t, std::ostream& out) {
  out << "row";
  for (const auto& c : t.col_labels) out << ',' << csv_escape(c);
  out << '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out << csv_escape(t.row_labels[r]);
    for (const auto& v : t.cells[r]) out << ',' << csv_escape(v);
    out << '\n';
  }
}

void write_text(const Table& t, std::ostream& out) {
  std::size_t w0 = 3;
  for (const auto& l : t.row_labels) w0 = std::max(w0, l.size());
  std::vector<std::size_t> w(t.col_labels.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = t.col_labels[c].size();
    for (const auto& row : t.cells) w[c] = std::max(w[c], row[c].size());
  }
  out << std::left << std::setw(static_cast<int>(w0)) << "" << std::right;
  for (std::size_t c = 0; c < w.size(); ++c) out << "  " << std::setw(static_cast<int>(w[c])) << t.col_labels[c];
  out << '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out << std::left << std::setw(static_cast<int>(w0)) << t.row_labels[r] << std::right;
    for (std::size_t c = 0; c < w.size(); ++c) out << "  " << std::setw(static_cast<int>(w[c])) << t.cells[r][c];
    out << '\n';
  }
}

void write_table_files(const Table& t, const std::string& stem) {
  std::ofstream csv(stem + ".csv"), txt(stem + ".txt");
  if (!csv || !txt) throw Error(ErrorKind::IOError, "cannot write " + stem + ".csv/.txt");
  write_csv(t, csv);
  write_text(t, txt);
}

int run_config(const std::string& path, std::ostream& log) {
  RunConfig cfg;
  PanelData panel;
  try {
    cfg = load_run_config(path);
    panel = load_panel(cfg.data_path, cfg.schema);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  const std::uint64_t seed = cfg.seed.value_or(0);
  std::vector<ColumnResult> cols(cfg.estimators.size());
  try {
    parallel_for(cfg.estimators.size(), cfg.threads, [&](std::size_t c) {
      cols[c] = run_estimator(panel, cfg.estimators[c], derive_seed(seed, c), 1);
    });
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  if (cols.empty()) {
    // diagnostics only: statistics of the outcome itself
    ColumnResult c;
    c.spec.label = panel.y.size() ? "y" : "data";
    c.ok = true;
    c.status = "diagnostics only";
    c.est.residuals = panel.y;
    c.est.beta = VectorXd::Constant(panel.K(), std::numeric_limits<double>::quiet_NaN());
    cols.push_back(c);
  }
  const Table t = results_table(panel, cols, cfg.diagnostics, seed);
  try {
    fs::create_directories(cfg.out_dir);
    const fs::path stem = fs::path(cfg.out_dir) / cfg.out_name;
    write_table_files(t, stem.string());
    for (const auto& c : cols) {
      if (!c.ok || !c.grouping) continue;
      const std::string base = stem.string() + "_" + file_safe(c.spec.label);
      std::ofstream u(base + "_unit_groups.csv"), tg(base + "_time_groups.csv");
      if (!u || !tg) throw Error(ErrorKind::IOError, "cannot write grouping files for " + c.spec.label);
      write_unit_groups_csv(*c.grouping, panel.unit_ids, u);
      write_time_groups_csv(*c.grouping, panel.time_ids, tg);
    }
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  write_text(t, log);
  bool failures = false;
  for (const auto& c : cols) {
    if (!c.ok) {
      failures = true;
      log << "estimator " << c.spec.label << " failed: " << c.status << '\n';
    }
  }
  return failures ? 1 : 0;
}

McResult mc_run(const DGPSpec& spec, const std::vector<EstimatorSpec>& estimators, int reps, std::uint64_t seed,
                int threads) {
  if (reps < 1) throw Error(ErrorKind::InvalidArgument, "mc_run: reps must be >= 1");
  spec.validate();
  const std::size_t E = estimators.size();
  std::vector<std::vector<ColumnResult>> out(static_cast<std::size_t>(reps));
  VectorXd truth;
  std::vector<std::string> names;
  {
    DGPSpec s0 = spec;
    s0.seed = derive_seed(seed, 0);
    const Simulated sim = simulate(s0);
    truth = sim.truth.beta;
    names = sim.panel.var_names;
  }
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    DGPSpec s = spec;
    s.seed = derive_seed(seed, r);
    const Simulated sim = simulate(s);
    out[r].resize(E);
    for (std::size_t e = 0; e < E; ++e)
      out[r][e] = run_estimator(sim.panel, estimators[e], derive_seed(derive_seed(seed, r), 7919 + e), 1);
  });

  McResult res;
  res.true_beta = truth;
  res.var_names = names;
  const Eigen::Index K = truth.size();
  for (std::size_t e = 0; e < E; ++e) {
    McEstimatorSummary s;
    s.label = estimators[e].label;
    s.bias = VectorXd::Zero(K);
    s.rmse = VectorXd::Zero(K);
    s.coverage = VectorXd::Zero(K);
    VectorXd cov_n = VectorXd::Zero(K);
    double secs = 0.0;
    for (int r = 0; r < reps; ++r) {
      const ColumnResult& c = out[r][e];
      secs += c.seconds;
      McReplication rep;
      rep.rep = r;
      rep.label = s.label;
      rep.status = c.status;
      if (c.ok && c.est.beta.size() == K) {
        ++s.successes;
        rep.beta = c.est.beta;
        rep.se = c.est.stderr_.size() == K ? c.est.stderr_ : VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
        const VectorXd d = c.est.beta - truth;
        s.bias += d;
        s.rmse += d.cwiseAbs2();
        for (Eigen::Index k = 0; k < K; ++k)
          if (std::isfinite(rep.se(k))) {
            cov_n(k) += 1.0;
            if (std::abs(d(k)) <= 1.959963984540054 * rep.se(k)) s.coverage(k) += 1.0;
          }
      } else {
        ++s.failures;
        rep.beta = rep.se = VectorXd::Constant(K, std::numeric_limits<double>::quiet_NaN());
      }
      res.replications.push_back(rep);
    }
    if (s.successes > 0) {
      s.bias /= s.successes;
      s.rmse = (s.rmse / s.successes).cwiseSqrt();
    } else {
      s.bias.setConstant(std::numeric_limits<double>::quiet_NaN());
      s.rmse = s.bias;
    }
    for (Eigen::Index k = 0; k < K; ++k)
      s.coverage(k) = cov_n(k) > 0 ? s.coverage(k) / cov_n(k) : std::numeric_limits<double>::quiet_NaN();
    s.mean_seconds = secs / reps;
    res.summary.push_back(s);
  }
  std::stable_sort(res.replications.begin(), res.replications.end(),
                   [](const McReplication& a, const McReplication& b) { return a.rep < b.rep; });
  return res;
}

Table mc_summary_table(const McResult& r) {
  Table t;
  for (const auto& s : r.summary) t.col_labels.push_back(s.label);
  const Eigen::Index K = r.true_beta.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    const std::string& n = r.var_names[static_cast<std::size_t>(k)];
    for (const char* stat : {"true", "bias", "rmse", "coverage95"}) t.row_labels.push_back(n + " " + stat);
  }
  t.row_labels.push_back("successes");
  t.row_labels.push_back("failures");
  t.cells.assign(t.row_labels.size(), std::vector<std::string>(r.summary.size()));
  for (std::size_t c = 0; c < r.summary.size(); ++c) {
    const auto& s = r.summary[c];
    for (Eigen::Index k = 0; k < K; ++k) {
      const std::size_t b = static_cast<std::size_t>(4 * k);
      t.cells[b][c] = fmtg(r.true_beta(k));
      t.cells[b + 1][c] = fmtg(s.bias(k));
      t.cells[b + 2][c] = fmtg(s.rmse(k));
      t.cells[b + 3][c] = fmtg(s.coverage(k));
    }
    t.cells[static_cast<std::size_t>(4 * K)][c] = std::to_string(s.successes);
    t.cells[static_cast<std::size_t>(4 * K) + 1][c] = std::to_string(s.failures);
  }
  return t;
}

Table mc_replication_table(const McResult& r) {
  Table t;
  t.col_labels = {"estimator", "status"};
  for (const auto& n : r.var_names) {
    t.col_labels.push_back(n);
    t.col_labels.push_back(n + " se");
  }
  for (const auto& rep : r.replications) {
    t.row_labels.push_back(std::to_string(rep.rep + 1));
    std::vector<std::string> row = {rep.label, rep.status};
    for (Eigen::Index k = 0; k < rep.beta.size(); ++k) {
      row.push_back(fmtg(rep.beta(k)));
      row.push_back(fmtg(rep.se(k)));
    }
    t.cells.push_back(row);
  }
  return t;
}

Table mc_timing_table(const McResult& r) {
  Table t;
  t.row_labels = {"mean seconds"};
  t.cells.assign(1, {});
  for (const auto& s : r.summary) {
    t.col_labels.push_back(s.label);
    t.cells[0].push_back(fmtg(s.mean_seconds));
  }
  return t;
}

int run_mc(const std::string& spec_path, const std::string& config_path, std::ostream& log) {
  DGPSpec spec;
  std::vector<EstimatorSpec> est;
  int reps = 100, threads = 1;
  std::uint64_t seed = 0;
  std::string out_dir, name;
  try {
    spec = load_dgp_spec(spec_path);
    const json j = read_json_file(config_path);
    if (!j.is_object() || !j.contains("estimators")) config_error("mc config needs an 'estimators' list");
    est = parse_estimators(j.at("estimators"));
    if (est.empty()) config_error("mc config lists no estimators");
    reps = opt<int>(j, "reps", reps);
    if (reps < 1) config_error("reps must be >= 1");
    if (!j.contains("seed") || !j.at("seed").is_number_integer()) config_error("mc config needs an integer seed");
    seed = j.at("seed").get<std::uint64_t>();
    threads = std::max(1, opt<int>(j, "threads", 1));
    const json o = j.value("output", json::object());
    fs::path od = opt<std::string>(o, "dir", ".");
    if (od.is_relative()) od = fs::path(parent_dir(config_path)) / od;
    out_dir = od.string();
    name = opt<std::string>(o, "name", "mc");
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  McResult res;
  try {
    res = mc_run(spec, est, reps, seed, threads);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? 2 : 1;
  }
  const Table s = mc_summary_table(res);
  try {
    fs::create_directories(out_dir);
    const fs::path base = fs::path(out_dir) / name;
    write_table_files(s, base.string() + "_summary");
    write_table_files(mc_replication_table(res), base.string() + "_replications");
    write_table_files(mc_timing_table(res), base.string() + "_timing");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  write_text(s, log);
  bool failures = false;
  for (const auto& x : res.summary) failures |= x.failures > 0;
  return failures ? 1 : 0;
}

Table diagnose_panel(const PanelData& panel, int cdw_reps, std::uint64_t seed) {
  Table t;
  t.col_labels = {"CD", "CD p", "CDw", "CDw p", "alpha", "m_ER", "m_GR"};
  std::vector<std::pair<std::string, const MatrixXd*>> vars = {{"y", &panel.y}};
  for (int k = 0; k < panel.K(); ++k) vars.push_back({panel.var_names[k], &panel.x[k]});
  const int N = panel.N(), T = panel.T();
  const int mmax = default_m_max(N, T);
  auto standardized = [&](const MatrixXd& a) {
    MatrixXd s = a.colwise() - a.rowwise().mean();
    for (int i = 0; i < N; ++i) {
      const double sd = std::sqrt(s.row(i).squaredNorm() / T);
      if (sd > 0) s.row(i) /= sd;
    }
    return s;
  };
  MatrixXd all(static_cast<Eigen::Index>(N) * vars.size(), T);
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const MatrixXd& a = *vars[v].second;
    const MatrixXd s = standardized(a);
    all.middleRows(static_cast<Eigen::Index>(v) * N, N) = s;
    std::vector<std::string> row(7, "-");
    auto guard = [&](std::size_t idx, auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        row[idx] = std::string(to_string(e.kind()));
      }
    };
    guard(0, [&] {
      const TestResult r = cd_test(a);
      row[0] = fmt(r.statistic, 3);
      row[1] = fmt(r.p_value, 3);
    });
    guard(2, [&] {
      CdwOptions co;
      co.reps = cdw_reps;
      co.seed = derive_seed(seed, v);
      const TestResult r = cdw_test(a, co);
      row[2] = fmt(r.statistic, 3);
      row[3] = fmt(r.p_value, 3);
    });
    guard(4, [&] { row[4] = fmt(alpha_observed(s).alpha, 3); });
    guard(5, [&] {
      const auto [er, gr] = er_gr(s, mmax);
      row[5] = std::to_string(er.m_hat);
      row[6] = std::to_string(gr.m_hat);
    });
    t.row_labels.push_back(vars[v].first);
    t.cells.push_back(row);
  }
  std::vector<std::string> row(7, "-");
  try {
    const auto [er, gr] = er_gr(all, std::min(mmax, static_cast<int>(std::min<Eigen::Index>(all.rows(), T)) - 1));
    row[5] = std::to_string(er.m_hat);
    row[6] = std::to_string(gr.m_hat);
  } catch (const Error& e) {
    row[5] = std::string(to_string(e.kind()));
  }
  t.row_labels.push_back("All");
  t.cells.push_back(row);
  return t;
}

}  // namespace ifepanel
