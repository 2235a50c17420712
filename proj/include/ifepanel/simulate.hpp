#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifepanel/panel.hpp"

namespace ifepanel {

enum class Heterogeneity { none, additive, ife, gfe, nstw };
enum class NstwForm { exp_product, ces };
enum class ErrorLaw { iid_normal, heteroskedastic, ar1 };

/*
 * x_k = x_mean + x_sd (rho c / sd(c) + sqrt(1 - rho^2) v_k) + Zx_k Fx'
 * y   = phi y_{-1} + X beta + c + e
 * where c is the heterogeneity matrix and Fx are regressor-only factors.
 */
struct DGPSpec {
  int N = 50;
  int T = 50;
  int K = 1;
  std::vector<double> beta{1.0};
  Heterogeneity heterogeneity = Heterogeneity::none;
  int m = 1;                 // ife
  double loading_mean = 1.0; // ife
  double loading_sd = 1.0;
  int G = 3;                 // gfe
  double separation = 1.0;
  NstwForm nstw = NstwForm::exp_product;
  double ces_d = 0.5;
  double ces_gamma = 0.5;
  double loading_regressor_correlation = 0.0;
  int x_factors = 0;  // regressor-only factors
  double x_mean = 0.0;
  double x_sd = 1.0;
  bool orthogonal_idiosyncratic = false;  // v_k projected off the factors and loadings
  ErrorLaw error_law = ErrorLaw::iid_normal;
  double sigma = 1.0;
  double ar_rho = 0.0;
  double lagged_y = 0.0;  // phi; nonzero adds regressor "y_lag"
  int burn_in = 50;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidSpec
};

struct Truth {
  VectorXd beta;   // includes phi last when lagged_y != 0
  MatrixXd F;      // T x m (ife) or T x 1 (nstw f_t)
  MatrixXd Z;      // N x m (ife) or N x 1 (nstw z_i)
  MatrixXd Fx;     // T x x_factors
  MatrixXd c;      // N x T heterogeneity
  std::vector<int> unit_groups;  // gfe, 0-based
};

struct Simulated {
  PanelData panel;
  Truth truth;
};

Simulated simulate(const DGPSpec& spec);

std::string to_string(Heterogeneity h);
std::string to_string(ErrorLaw e);

}  // namespace ifepanel
