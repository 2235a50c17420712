#include "ifepanel/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifepanel/errors.hpp"

namespace ifepanel {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

OlsResult ols(const MatrixXd& X, const VectorXd& y) {
  if (X.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "ols: rows of X differ from length of y");
  if (X.rows() < X.cols()) throw Error(ErrorKind::DimensionMismatch, "ols: fewer observations than columns");
  OlsResult r;
  const Eigen::Index k = X.cols();
  if (k == 0) {
    r.coef = VectorXd(0);
    r.residuals = y;
    return r;
  }
  Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(X.rows(), k)) * kEps * (s.size() ? s(0) : 0.0);
  VectorXd uty = svd.matrixU().transpose() * y;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (s(j) > tol && s(j) > 0.0) {
      uty(j) /= s(j);
      ++r.rank;
    } else {
      uty(j) = 0.0;
    }
  }
  r.coef = svd.matrixV() * uty;
  r.residuals = y - X * r.coef;
  r.rank_deficient = r.rank < k;
  return r;
}

Projector::Projector(const MatrixXd& W) : dim_(W.rows()), q_(static_cast<int>(W.cols())) {
  if (W.cols() == 0 || W.rows() == 0) {
    Q_.resize(W.rows(), 0);
    return;
  }
  Eigen::BDCSVD<MatrixXd> svd(W, Eigen::ComputeThinU);
  const VectorXd& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(W.rows(), W.cols())) * kEps * s(0);
  int r = 0;
  while (r < s.size() && s(r) > tol && s(r) > 0.0) ++r;
  Q_ = svd.matrixU().leftCols(r);
}

MatrixXd Projector::annihilate(const MatrixXd& A) const {
  if (A.rows() != dim_) throw Error(ErrorKind::DimensionMismatch, "annihilate: row count differs from basis");
  if (Q_.cols() == 0) return A;
  return A - Q_ * (Q_.transpose() * A);
}

MatrixXd Projector::project(const MatrixXd& A) const {
  if (A.rows() != dim_) throw Error(ErrorKind::DimensionMismatch, "project: row count differs from basis");
  if (Q_.cols() == 0) return MatrixXd::Zero(A.rows(), A.cols());
  return Q_ * (Q_.transpose() * A);
}

MatrixXd Projector::annihilate_rows(const MatrixXd& A) const {
  if (A.cols() != dim_) throw Error(ErrorKind::DimensionMismatch, "annihilate_rows: column count differs from basis");
  if (Q_.cols() == 0) return A;
  return A - (A * Q_) * Q_.transpose();
}

MatrixXd annihilate(const MatrixXd& W, const MatrixXd& A) {
  if (W.cols() == 0) return A;
  if (W.rows() != A.rows()) throw Error(ErrorKind::DimensionMismatch, "annihilate: W and A row counts differ");
  return Projector(W).annihilate(A);
}

void canonical_signs(MatrixXd& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      const double a = std::abs(V(i, j));
      if (a > best * (1.0 + 1e-12)) {  // ties resolve to the first index
        best = a;
        arg = i;
      }
    }
    if (V.rows() > 0 && V(arg, j) < 0.0) V.col(j) *= -1.0;
  }
}

SymEigen sym_eigen(const MatrixXd& S) {
  if (S.rows() != S.cols()) throw Error(ErrorKind::DimensionMismatch, "sym_eigen: matrix not square");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorKind::NotSymmetric, "sym_eigen: asymmetry exceeds tolerance");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  SymEigen out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  canonical_signs(out.vectors);
  return out;
}

VectorXd panel_eigenvalues(const MatrixXd& U) {
  const double nt = static_cast<double>(U.rows()) * static_cast<double>(U.cols());
  MatrixXd G = U.rows() <= U.cols() ? MatrixXd(U * U.transpose()) : MatrixXd(U.transpose() * U);
  G /= nt;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  VectorXd ev = es.eigenvalues().reverse();
  return ev.cwiseMax(0.0);
}

FactorModel principal_components(const MatrixXd& U, int m) {
  const Eigen::Index N = U.rows(), T = U.cols();
  if (m < 1 || m > std::min(N, T))
    throw Error(ErrorKind::InvalidM, "principal_components: need 1 <= m <= min(N,T)");
  const double nt = static_cast<double>(N) * static_cast<double>(T);
  const double sqrtT = std::sqrt(static_cast<double>(T));
  FactorModel fm;
  fm.m = m;
  MatrixXd F(T, m);
  if (N < T) {
    MatrixXd G = (U * U.transpose()) / nt;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
    fm.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
    const MatrixXd V = es.eigenvectors().rowwise().reverse();
    const double lam_tol = std::max(fm.eigenvalues(0), 0.0) * 1e-13 + std::numeric_limits<double>::min();
    int filled = 0;
    for (int j = 0; j < m; ++j) {
      if (fm.eigenvalues(j) <= lam_tol) break;
      VectorXd f = U.transpose() * V.col(j);
      F.col(j) = f / f.norm();
      ++filled;
    }
    // Rank-deficient U: complete with an orthonormal basis of the remainder.
    for (Eigen::Index e = 0; filled < m && e < T; ++e) {
      VectorXd v = VectorXd::Unit(T, e);
      for (int r = 0; r < 2; ++r)
        v -= F.leftCols(filled) * (F.leftCols(filled).transpose() * v);
      if (v.norm() > 1e-8) F.col(filled++) = v / v.norm();
    }
  } else {
    MatrixXd G = (U.transpose() * U) / nt;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
    fm.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
    F = es.eigenvectors().rowwise().reverse().leftCols(m);
  }
  canonical_signs(F);
  fm.F = F * sqrtT;
  fm.Z = U * fm.F / static_cast<double>(T);
  return fm;
}

MatrixXd singular_value_threshold(const MatrixXd& U, double tau, int* rank_out) {
  Eigen::BDCSVD<MatrixXd> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
  VectorXd s = (svd.singularValues().array() - tau).cwiseMax(0.0);
  int r = 0;
  while (r < s.size() && s(r) > 0.0) ++r;
  if (rank_out) *rank_out = r;
  if (r == 0) return MatrixXd::Zero(U.rows(), U.cols());
  return svd.matrixU().leftCols(r) * s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

}  // namespace ifepanel
