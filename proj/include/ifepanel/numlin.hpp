#pragma once

#include <Eigen/Dense>

namespace ifepanel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct OlsResult {
  VectorXd coef;
  VectorXd residuals;
  int rank = 0;
  bool rank_deficient = false;
};

// Minimum-norm least squares; singular values below max(n,k)*eps*sigma_max count as zero.
OlsResult ols(const MatrixXd& X, const VectorXd& y);

// Orthogonal projector onto col(W) for W of size T x q, held as an orthonormal basis.
class Projector {
 public:
  Projector() = default;
  explicit Projector(const MatrixXd& W);

  int dim() const { return static_cast<int>(dim_); }
  int rank() const { return static_cast<int>(Q_.cols()); }
  int basis_cols() const { return q_; }
  const MatrixXd& basis() const { return Q_; }

  // M_W A for A of size T x p.
  MatrixXd annihilate(const MatrixXd& A) const;
  // P_W A.
  MatrixXd project(const MatrixXd& A) const;
  // A M_W for A of size n x T (each row a series over the projector's index).
  MatrixXd annihilate_rows(const MatrixXd& A) const;

 private:
  Eigen::Index dim_ = 0;
  int q_ = 0;
  MatrixXd Q_;
};

MatrixXd annihilate(const MatrixXd& W, const MatrixXd& A);

struct FactorModel {
  MatrixXd F;  // T x m, F'F/T = I
  MatrixXd Z;  // N x m
  int m = 0;
  VectorXd eigenvalues;  // all eigenvalues of UU'/(NT), descending
};

FactorModel principal_components(const MatrixXd& U, int m);

struct SymEigen {
  VectorXd values;   // descending
  MatrixXd vectors;  // columns, largest-magnitude entry positive
};

SymEigen sym_eigen(const MatrixXd& S);

// Eigenvalues of UU'/(NT), descending, length min(N,T).
VectorXd panel_eigenvalues(const MatrixXd& U);

// Flip each column so its largest-magnitude entry is positive.
void canonical_signs(MatrixXd& V);

// U with singular values soft-thresholded at tau.
MatrixXd singular_value_threshold(const MatrixXd& U, double tau, int* rank_out = nullptr);

}  // namespace ifepanel
