#pragma once

// Test-side oracles. These deliberately avoid the library's solvers: dense
// dummy-variable designs are solved by complete orthogonal decomposition and
// small systems by explicit normal equations.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "ifepanel/panel.hpp"

namespace support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd randn(int r, int c, std::mt19937_64& g) {
  std::normal_distribution<double> d(0.0, 1.0);
  MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = d(g);
  return m;
}

inline ifepanel::PanelData random_panel(int N, int T, int K, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<MatrixXd> x;
  for (int k = 0; k < K; ++k) x.push_back(randn(N, T, g));
  MatrixXd y = randn(N, T, g);
  for (int k = 0; k < K; ++k) y += (0.5 + k) * x[k];
  return ifepanel::make_panel(y, x);
}

// Unit-major stacking (row i*T + t), same convention as the library's vec_panel.
inline VectorXd stack(const MatrixXd& a) {
  VectorXd v(a.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index t = 0; t < a.cols(); ++t) v(i * a.cols() + t) = a(i, t);
  return v;
}

inline MatrixXd regressors(const ifepanel::PanelData& p) {
  MatrixXd X(p.N() * p.T(), p.K());
  for (int k = 0; k < p.K(); ++k) X.col(k) = stack(p.x[k]);
  return X;
}

// Dummy columns from a per-observation cell index (obs = i*T + t).
template <class Cell>
MatrixXd dummies(int N, int T, int cells, Cell cell) {
  MatrixXd D = MatrixXd::Zero(N * T, cells);
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t) D(i * T + t, cell(i, t)) = 1.0;
  return D;
}

inline MatrixXd hcat(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Slopes on the first K columns of [X, D] by least squares.
inline VectorXd dummy_ols(const ifepanel::PanelData& p, const MatrixXd& D) {
  const MatrixXd A = D.cols() ? hcat(regressors(p), D) : regressors(p);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  cod.setThreshold(1e-10);
  const VectorXd b = cod.solve(stack(p.y));
  return b.head(p.K());
}

inline VectorXd normal_equations(const MatrixXd& X, const VectorXd& y) {
  return (X.transpose() * X).ldlt().solve(X.transpose() * y);
}

}  // namespace support
