#include <pybind11/eigen.h>
#include <pybind11/iostream.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <iostream>
#include <string>

#include "ifepanel/diagnostics.hpp"
#include "ifepanel/errors.hpp"
#include "ifepanel/factor_select.hpp"
#include "ifepanel/gfe.hpp"
#include "ifepanel/harness.hpp"
#include "ifepanel/ife.hpp"
#include "ifepanel/panel.hpp"
#include "ifepanel/simulate.hpp"

namespace py = pybind11;
using namespace ifepanel;
using namespace pybind11::literals;

namespace {

DemeanMode demean_mode(const std::string& s) {
  if (s == "unit") return DemeanMode::unit;
  if (s == "time") return DemeanMode::time;
  if (s == "two_way") return DemeanMode::two_way;
  if (s == "none") return DemeanMode::none;
  throw Error(ErrorKind::InvalidArgument, "mode must be unit, time, two_way or none");
}

py::dict result_dict(const EstimateResult& r) {
  py::dict d("beta"_a = r.beta, "se"_a = r.stderr_, "vcov"_a = r.vcov, "residuals"_a = r.residuals,
             "method"_a = std::string(to_string(r.method)), "iterations"_a = r.iterations,
             "converged"_a = r.converged, "ssr"_a = r.ssr, "flags"_a = r.flags, "variance"_a = r.variance);
  d["m_used"] = r.m_used ? py::cast(*r.m_used) : py::none();
  return d;
}

py::dict test_dict(const TestResult& t) {
  return py::dict("statistic"_a = t.statistic, "p_value"_a = t.p_value, "aux"_a = t.aux);
}

py::dict count_dict(const FactorCountReport& r) {
  return py::dict("method"_a = std::string(to_string(r.method)), "m_hat"_a = r.m_hat,
                  "criterion_path"_a = r.criterion_path, "m_max"_a = r.m_max, "threshold"_a = r.threshold);
}

py::dict exponent_dict(const ExponentEstimate& e) {
  py::dict d("alpha"_a = e.alpha, "aux"_a = e.aux);
  d["se"] = e.se ? py::cast(*e.se) : py::none();
  return d;
}

py::dict grouping_dict(const Grouping& g) {
  return py::dict("unit_groups"_a = g.unit_groups, "time_groups"_a = g.time_groups, "G"_a = g.G, "C"_a = g.C,
                  "objective"_a = g.objective, "flags"_a = g.flags);
}

py::dict table_dict(const Table& t) {
  return py::dict("rows"_a = t.row_labels, "columns"_a = t.col_labels, "cells"_a = t.cells);
}

KMeansOptions kmeans_opts(int starts, std::uint64_t seed, int threads) {
  KMeansOptions o;
  o.starts = starts;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Panel estimators for interactive, grouped and non-separable fixed effects";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "IfepanelError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(), py::make_tuple(std::string(to_string(e.kind())), e.what()));
    }
  });

  py::class_<PanelData>(m, "Panel")
      .def(py::init([](MatrixXd y, std::vector<MatrixXd> x, std::vector<std::string> names,
                       std::vector<std::string> units, std::vector<std::string> times) {
             return make_panel(std::move(y), std::move(x), std::move(names), std::move(units), std::move(times));
           }),
           "y"_a, "x"_a, "var_names"_a = std::vector<std::string>{}, "unit_ids"_a = std::vector<std::string>{},
           "time_ids"_a = std::vector<std::string>{})
      .def_property_readonly("N", &PanelData::N)
      .def_property_readonly("T", &PanelData::T)
      .def_property_readonly("K", &PanelData::K)
      .def_readonly("y", &PanelData::y)
      .def_readonly("x", &PanelData::x)
      .def_readonly("var_names", &PanelData::var_names)
      .def_readonly("unit_ids", &PanelData::unit_ids)
      .def_readonly("time_ids", &PanelData::time_ids)
      .def("save", [](const PanelData& p, const std::string& path) { save_panel(p, path); }, "path"_a)
      .def("__repr__", [](const PanelData& p) {
        return "<Panel N=" + std::to_string(p.N()) + " T=" + std::to_string(p.T()) + " K=" + std::to_string(p.K()) + ">";
      });

  m.def(
      "load_panel",
      [](const std::string& path, const std::string& unit, const std::string& time, const std::string& y,
         std::vector<std::string> x) {
        CsvSchema s;
        s.unit = unit;
        s.time = time;
        s.y = y;
        s.x = std::move(x);
        return load_panel(path, s);
      },
      "path"_a, "unit"_a = "unit", "time"_a = "time", "y"_a = "y", "x"_a = std::vector<std::string>{});

  m.def("fe", [](const PanelData& p, const std::string& mode) { return result_dict(fe_estimate(p, demean_mode(mode))); },
        "panel"_a, "mode"_a = "unit");

  m.def(
      "ils",
      [](const PanelData& p, int m_, const std::string& init, double tol, int max_iter, std::optional<VectorXd> beta0) {
        IlsOptions o;
        o.m = m_;
        o.tol = tol;
        o.max_iter = max_iter;
        if (init == "pooled_ols") o.init = IlsInit::pooled_ols;
        else if (init == "two_way_within") o.init = IlsInit::two_way_within;
        else if (init == "user") o.init = IlsInit::user;
        else throw Error(ErrorKind::InvalidArgument, "init must be pooled_ols, two_way_within or user");
        if (beta0) o.user_beta = *beta0;
        const IlsFit f = ils_estimate(p, o);
        py::dict d = result_dict(f.result);
        d["factors"] = f.factors.F;
        d["loadings"] = f.factors.Z;
        d["ssr_path"] = f.ssr_path;
        return d;
      },
      "panel"_a, "m"_a = 1, "init"_a = "two_way_within", "tol"_a = 1e-8, "max_iter"_a = 1000,
      "user_beta"_a = py::none());

  m.def(
      "ils_bc",
      [](const PanelData& p, int m_, std::vector<std::string> terms, bool homoskedastic, int bandwidth) {
        IlsOptions o;
        o.m = m_;
        const IlsFit f = ils_estimate(p, o);
        BiasCorrectionOptions b;
        b.b1 = b.b2 = b.b3 = false;
        for (const auto& t : terms) {
          if (t == "B1") b.b1 = true;
          else if (t == "B2") b.b2 = true;
          else if (t == "B3") b.b3 = true;
          else throw Error(ErrorKind::InvalidArgument, "bias terms are B1, B2, B3");
        }
        b.homoskedastic = homoskedastic;
        b.bandwidth = bandwidth;
        return result_dict(ils_bias_correct(f, p, b));
      },
      "panel"_a, "m"_a = 1, "terms"_a = std::vector<std::string>{"B1", "B2", "B3"}, "homoskedastic"_a = false,
      "bandwidth"_a = -1);

  m.def(
      "ccep",
      [](const PanelData& p, bool dynamic, int lags, const std::string& boundary,
         std::optional<MatrixXd> observed_factors) {
        CcepOptions o;
        o.dynamic = dynamic;
        o.lags = lags;
        if (boundary == "trim") o.boundary = LagBoundary::trim;
        else if (boundary != "backfill") throw Error(ErrorKind::InvalidArgument, "boundary must be backfill or trim");
        if (observed_factors) o.observed_factors = *observed_factors;
        return result_dict(ccep_estimate(p, o));
      },
      "panel"_a, "dynamic"_a = false, "lags"_a = -1, "boundary"_a = "backfill", "observed_factors"_a = py::none());

  m.def(
      "tsiv",
      [](const PanelData& p, int m_x, int m_, int m_max) {
        TsivOptions o;
        o.m_x = m_x;
        o.m = m_;
        o.m_max = m_max;
        const TsivFit f = tsiv_estimate(p, o);
        return py::dict("fsiv"_a = result_dict(f.fsiv), "tsiv"_a = result_dict(f.tsiv), "m_x"_a = f.m_x, "m"_a = f.m);
      },
      "panel"_a, "m_x"_a = -1, "m"_a = -1, "m_max"_a = -1);

  m.def(
      "pnnr",
      [](const PanelData& p, std::vector<double> psi_grid, int grid_size, int m_max, int post_iterations, double tol) {
        PnnrOptions o;
        o.psi_grid = std::move(psi_grid);
        o.grid_size = grid_size;
        o.m_max = m_max;
        o.post_iterations = post_iterations;
        o.tol = tol;
        const PnnrFit f = pnnr_estimate(p, o);
        py::dict d = result_dict(f.result);
        d["beta_nnr"] = f.beta_nnr;
        d["m_hat"] = f.m_hat;
        d["psi_grid"] = f.psi_grid;
        return d;
      },
      "panel"_a, "psi_grid"_a = std::vector<double>{}, "grid_size"_a = 10, "m_max"_a = -1,
      "post_iterations"_a = 200, "tol"_a = 1e-10);

  m.def(
      "gf",
      [](const PanelData& p, int G, int starts, std::uint64_t seed, int threads) {
        const GfFit f = gf_estimate(p, G, kmeans_opts(starts, seed, threads));
        py::dict d = result_dict(f.result);
        d["grouping"] = grouping_dict(f.grouping);
        d["group_effects"] = f.group_effects;
        return d;
      },
      "panel"_a, "G"_a, "starts"_a = 1000, "seed"_a = 0, "threads"_a = 1);

  m.def(
      "gf_select_G",
      [](const PanelData& p, int G_max, int starts, std::uint64_t seed, int threads) {
        const GfSelection s = gf_select_G(p, G_max, kmeans_opts(starts, seed, threads));
        return py::dict("G_hat"_a = s.G_hat, "bic_path"_a = s.bic_path, "ssr_path"_a = s.ssr_path);
      },
      "panel"_a, "G_max"_a, "starts"_a = 1000, "seed"_a = 0, "threads"_a = 1);

  m.def(
      "blm",
      [](const PanelData& p, double gamma, int G_max, int C_max, int starts, std::uint64_t seed) {
        const BlmReport r = discretize_blm(p, gamma, G_max, C_max, kmeans_opts(starts, seed, 1));
        return py::dict("grouping"_a = grouping_dict(r.grouping), "Q_unit"_a = r.Q_unit, "Q_time"_a = r.Q_time,
                        "V_unit"_a = r.V_unit, "V_time"_a = r.V_time);
      },
      "panel"_a, "gamma"_a = 1.0, "G_max"_a = 10, "C_max"_a = 10, "starts"_a = 100, "seed"_a = 0);

  m.def(
      "tsgfm",
      [](const PanelData& p, std::vector<int> unit_groups, std::vector<int> time_groups) {
        Grouping g;
        g.unit_groups = std::move(unit_groups);
        g.time_groups = std::move(time_groups);
        g.G = g.unit_groups.empty() ? 1 : *std::max_element(g.unit_groups.begin(), g.unit_groups.end()) + 1;
        g.C = g.time_groups.empty() ? 1 : *std::max_element(g.time_groups.begin(), g.time_groups.end()) + 1;
        return result_dict(tsgfm_estimate(p, g));
      },
      "panel"_a, "unit_groups"_a, "time_groups"_a);

  m.def(
      "run_estimator",
      [](const PanelData& p, const std::string& spec, std::uint64_t seed) {
        const auto specs = parse_estimators(json::array({json::parse(spec)}));
        const ColumnResult c = run_estimator(p, specs[0], seed);
        py::dict d("label"_a = c.spec.label, "ok"_a = c.ok, "status"_a = c.status);
        d["result"] = c.ok ? py::object(result_dict(c.est)) : py::none();
        return d;
      },
      "panel"_a, "spec"_a, "seed"_a = 0);

  m.def("cd_test", [](const MatrixXd& U) { return test_dict(cd_test(U)); }, "U"_a);
  m.def(
      "cdw_test",
      [](const MatrixXd& U, int reps, std::uint64_t seed, int threads) {
        CdwOptions o;
        o.reps = reps;
        o.seed = seed;
        o.threads = threads;
        return test_dict(cdw_test(U, o));
      },
      "U"_a, "reps"_a = 30, "seed"_a = 0, "threads"_a = 1);
  m.def(
      "cdw_plus",
      [](const MatrixXd& U, int reps, std::uint64_t seed, bool per_correlation) {
        CdwOptions o;
        o.reps = reps;
        o.seed = seed;
        return test_dict(cdw_plus(U, o, per_correlation ? ScreenThreshold::per_correlation : ScreenThreshold::printed));
      },
      "U"_a, "reps"_a = 30, "seed"_a = 0, "per_correlation"_a = false);
  m.def(
      "cd_star",
      [](const MatrixXd& U, int m_) {
        CdStarOptions o;
        o.m = m_;
        return test_dict(cd_star(U, o));
      },
      "U"_a, "m"_a = -1);
  m.def("alpha_observed", [](const MatrixXd& X) { return exponent_dict(alpha_observed(X)); }, "X"_a);
  m.def(
      "alpha_residual",
      [](const MatrixXd& U, double sig, int bootstrap_reps, std::uint64_t seed, int threads) {
        AlphaResidualOptions o;
        o.sig = sig;
        o.bootstrap_reps = bootstrap_reps;
        o.seed = seed;
        o.threads = threads;
        return exponent_dict(alpha_residual(U, o));
      },
      "U"_a, "sig"_a = 0.05, "bootstrap_reps"_a = 0, "seed"_a = 0, "threads"_a = 1);
  m.def("hausman_ife", [](const PanelData& p, int m_) { return test_dict(hausman_ife(p, m_)); }, "panel"_a, "m"_a);

  m.def(
      "bai_ng",
      [](const MatrixXd& U, int m_max, const std::string& variant, int penalty) {
        if (variant != "PC" && variant != "IC") throw Error(ErrorKind::InvalidArgument, "variant must be PC or IC");
        return count_dict(bai_ng(U, m_max, variant == "PC" ? BaiNgVariant::PC : BaiNgVariant::IC, penalty));
      },
      "U"_a, "m_max"_a, "variant"_a = "IC", "penalty"_a = 1);
  m.def(
      "er_gr",
      [](const MatrixXd& U, int m_max) {
        const auto r = er_gr(U, m_max);
        return py::make_tuple(count_dict(r.first), count_dict(r.second));
      },
      "U"_a, "m_max"_a);
  m.def("onatski_ed", [](const MatrixXd& U, int m_max) { return count_dict(onatski_ed(U, m_max)); }, "U"_a, "m_max"_a);
  m.def("gos", [](const MatrixXd& U, int m_max) { return count_dict(gos(U, m_max)); }, "U"_a, "m_max"_a);

  m.def(
      "simulate_json",
      [](const std::string& spec) {
        const DGPSpec s = parse_dgp_spec(json::parse(spec));
        const Simulated sim = simulate(s);
        return py::make_tuple(sim.panel, truth_to_json(s, sim.truth).dump());
      },
      "spec"_a);
  m.def("diagnose", [](const PanelData& p, int reps, std::uint64_t seed) { return table_dict(diagnose_panel(p, reps, seed)); },
        "panel"_a, "reps"_a = 30, "seed"_a = 1);
  m.def(
      "run_config",
      [](const std::string& path) {
        py::scoped_ostream_redirect out;
        return run_config(path, std::cout);
      },
      "path"_a);
  m.def(
      "run_mc",
      [](const std::string& spec, const std::string& config) {
        py::scoped_ostream_redirect out;
        return run_mc(spec, config, std::cout);
      },
      "spec"_a, "config"_a);
}
