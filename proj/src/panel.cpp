#include "ifepanel/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ifepanel/errors.hpp"

namespace ifepanel {

void PanelData::validate() const {
  const Eigen::Index n = y.rows(), t = y.cols();
  if (n < 2 || t < 2) throw Error(ErrorKind::InvalidArgument, "panel needs N >= 2 and T >= 2");
  if (x.empty()) throw Error(ErrorKind::InvalidArgument, "panel needs K >= 1 regressors");
  for (const auto& xk : x)
    if (xk.rows() != n || xk.cols() != t)
      throw Error(ErrorKind::DimensionMismatch, "regressor shape differs from y");
  if (static_cast<Eigen::Index>(unit_ids.size()) != n ||
      static_cast<Eigen::Index>(time_ids.size()) != t || var_names.size() != x.size())
    throw Error(ErrorKind::DimensionMismatch, "label counts do not match data");
  if (!y.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite outcome value");
  for (const auto& xk : x)
    if (!xk.allFinite()) throw Error(ErrorKind::InvalidArgument, "non-finite regressor value");
  std::set<std::string> seen(unit_ids.begin(), unit_ids.end());
  if (seen.size() != unit_ids.size()) throw Error(ErrorKind::InvalidArgument, "duplicate unit id");
}

PanelData make_panel(MatrixXd y, std::vector<MatrixXd> x, std::vector<std::string> var_names,
                     std::vector<std::string> unit_ids, std::vector<std::string> time_ids) {
  PanelData p;
  p.y = std::move(y);
  p.x = std::move(x);
  if (var_names.empty())
    for (std::size_t k = 0; k < p.x.size(); ++k) var_names.push_back("x" + std::to_string(k + 1));
  if (unit_ids.empty())
    for (Eigen::Index i = 0; i < p.y.rows(); ++i) unit_ids.push_back(std::to_string(i + 1));
  if (time_ids.empty())
    for (Eigen::Index t = 0; t < p.y.cols(); ++t) time_ids.push_back(std::to_string(t + 1));
  p.var_names = std::move(var_names);
  p.unit_ids = std::move(unit_ids);
  p.time_ids = std::move(time_ids);
  p.validate();
  return p;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& v) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(v);
}

// Numeric order when every label parses as a number, lexicographic otherwise.
std::vector<std::string> sorted_labels(const std::set<std::string>& labels) {
  std::vector<std::string> out(labels.begin(), labels.end());
  bool numeric = true;
  std::map<std::string, double> val;
  for (const auto& s : out) {
    double v;
    if (!parse_double(s, v)) {
      numeric = false;
      break;
    }
    val[s] = v;
  }
  if (numeric) {
    std::stable_sort(out.begin(), out.end(),
                     [&](const std::string& a, const std::string& b) { return val[a] < val[b]; });
    for (std::size_t i = 1; i < out.size(); ++i)
      if (val[out[i]] == val[out[i - 1]])
        throw Error(ErrorKind::DuplicateCell, "labels '" + out[i - 1] + "' and '" + out[i] +
                                                  "' denote the same value");
  }
  return out;
}

}  // namespace

PanelData read_panel_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "empty file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::ParseError, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cu = col(schema.unit), ct = col(schema.time), cy = col(schema.y);
  std::vector<std::string> xnames = schema.x;
  if (xnames.empty())
    for (const auto& h : header)
      if (h != schema.unit && h != schema.time && h != schema.y) xnames.push_back(h);
  if (xnames.empty()) throw Error(ErrorKind::ParseError, "no regressor columns");
  std::vector<std::size_t> cx;
  for (const auto& n : xnames) cx.push_back(col(n));

  struct Row {
    std::string unit, time;
    std::vector<double> v;  // y, x1..xK
  };
  std::vector<Row> rows;
  std::set<std::string> units, times;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(header.size()) + " fields");
    Row r;
    r.unit = trim(f[cu]);
    r.time = trim(f[ct]);
    r.v.resize(1 + cx.size());
    if (!parse_double(f[cy], r.v[0]))
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": bad value '" +
                                             f[cy] + "' in column " + schema.y);
    for (std::size_t k = 0; k < cx.size(); ++k)
      if (!parse_double(f[cx[k]], r.v[k + 1]))
        throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": bad value '" +
                                               f[cx[k]] + "' in column " + xnames[k]);
    units.insert(r.unit);
    times.insert(r.time);
    rows.push_back(std::move(r));
  }
  const auto uvec = sorted_labels(units), tvec = sorted_labels(times);
  std::map<std::string, int> uix, tix;
  for (std::size_t i = 0; i < uvec.size(); ++i) uix[uvec[i]] = static_cast<int>(i);
  for (std::size_t t = 0; t < tvec.size(); ++t) tix[tvec[t]] = static_cast<int>(t);
  const int N = static_cast<int>(uvec.size()), T = static_cast<int>(tvec.size());
  const int K = static_cast<int>(cx.size());

  PanelData p;
  p.y.setConstant(N, T, std::numeric_limits<double>::quiet_NaN());
  p.x.assign(K, p.y);
  std::vector<char> filled(static_cast<std::size_t>(N) * T, 0);
  for (const auto& r : rows) {
    const int i = uix[r.unit], t = tix[r.time];
    char& cell = filled[static_cast<std::size_t>(i) * T + t];
    if (cell) throw Error(ErrorKind::DuplicateCell, "unit " + r.unit + ", time " + r.time);
    cell = 1;
    p.y(i, t) = r.v[0];
    for (int k = 0; k < K; ++k) p.x[k](i, t) = r.v[k + 1];
  }
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t)
      if (!filled[static_cast<std::size_t>(i) * T + t])
        throw Error(ErrorKind::UnbalancedPanel, "missing unit " + uvec[i] + ", time " + tvec[t]);
  p.unit_ids = uvec;
  p.time_ids = tvec;
  p.var_names = xnames;
  p.validate();
  return p;
}

PanelData load_panel(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path);
  return read_panel_csv(in, schema);
}

void write_panel_csv(const PanelData& p, std::ostream& out) {
  out << "unit,time,y";
  for (const auto& n : p.var_names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (int i = 0; i < p.N(); ++i)
    for (int t = 0; t < p.T(); ++t) {
      out << p.unit_ids[i] << ',' << p.time_ids[t] << ',' << p.y(i, t);
      for (const auto& xk : p.x) out << ',' << xk(i, t);
      out << '\n';
    }
}

void save_panel(const PanelData& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path);
  write_panel_csv(panel, out);
}

MatrixXd demean_matrix(const MatrixXd& a, DemeanMode mode) {
  switch (mode) {
    case DemeanMode::none: return a;
    case DemeanMode::unit: return a.colwise() - a.rowwise().mean();
    case DemeanMode::time: return a.rowwise() - a.colwise().mean();
    case DemeanMode::two_way: {
      MatrixXd r = a.colwise() - a.rowwise().mean();
      r.rowwise() -= a.colwise().mean();
      r.array() += a.mean();
      return r;
    }
  }
  return a;
}

PanelData demean(const PanelData& panel, DemeanMode mode) {
  PanelData out = panel;
  out.y = demean_matrix(panel.y, mode);
  for (auto& xk : out.x) xk = demean_matrix(xk, mode);
  return out;
}

MatrixXd cross_section_averages(const PanelData& panel, bool include_y, int lags,
                                LagBoundary boundary) {
  const int T = panel.T(), K = panel.K();
  if (lags < 0) throw Error(ErrorKind::InvalidArgument, "negative lag order");
  if (lags >= T) throw Error(ErrorKind::LagTooLarge, "lag order must be below T");
  const int w = K + (include_y ? 1 : 0);
  MatrixXd base(T, w);
  int c = 0;
  if (include_y) base.col(c++) = panel.y.colwise().mean().transpose();
  for (int k = 0; k < K; ++k) base.col(c++) = panel.x[k].colwise().mean().transpose();

  MatrixXd out(T, w * (lags + 1));
  for (int j = 0; j <= lags; ++j)
    for (int t = 0; t < T; ++t) out.block(t, j * w, 1, w) = base.row(std::max(t - j, 0));
  if (boundary == LagBoundary::trim) return out.bottomRows(T - lags).eval();
  return out;
}

int cce_lag_order(int T) {
  if (T < 1) return 0;
  int p = static_cast<int>(std::cbrt(static_cast<double>(T)));
  while ((p + 1) * (p + 1) * (p + 1) <= T) ++p;
  while (p > 0 && p * p * p > T) --p;
  return p;
}

VectorXd vec_panel(const MatrixXd& a) {
  VectorXd v(a.size());
  const Eigen::Index T = a.cols();
  for (Eigen::Index i = 0; i < a.rows(); ++i) v.segment(i * T, T) = a.row(i).transpose();
  return v;
}

MatrixXd unvec_panel(const VectorXd& v, int N, int T) {
  if (v.size() != static_cast<Eigen::Index>(N) * T)
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from N*T");
  MatrixXd a(N, T);
  for (int i = 0; i < N; ++i) a.row(i) = v.segment(static_cast<Eigen::Index>(i) * T, T).transpose();
  return a;
}

MatrixXd stack_regressors(const PanelData& panel) {
  MatrixXd X(static_cast<Eigen::Index>(panel.N()) * panel.T(), panel.K());
  for (int k = 0; k < panel.K(); ++k) X.col(k) = vec_panel(panel.x[k]);
  return X;
}

PanelData drop_leading_periods(const PanelData& panel, int t0) {
  if (t0 < 0 || t0 > panel.T() - 2)
    throw Error(ErrorKind::InvalidArgument, "trimming leaves fewer than two periods");
  PanelData out;
  const int T = panel.T() - t0;
  out.y = panel.y.rightCols(T);
  for (const auto& xk : panel.x) out.x.push_back(xk.rightCols(T));
  out.unit_ids = panel.unit_ids;
  out.time_ids.assign(panel.time_ids.begin() + t0, panel.time_ids.end());
  out.var_names = panel.var_names;
  return out;
}

}  // namespace ifepanel
