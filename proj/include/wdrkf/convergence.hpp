#pragma once

#include <utility>
#include <vector>

#include "wdrkf/drmmse.hpp"
#include "wdrkf/matops.hpp"
#include "wdrkf/model.hpp"

namespace wdrkf {

/// DR Riccati map: solves the DR-MMSE program at `prior` and returns
/// A((S*)^{-1} + C^T (Sv*)^{-1} C)^{-1} A^T + sigma_w with the solver output.
std::pair<PsdMatrix, LeastFavorable> dr_riccati_step(const PsdMatrix& prior,
                                                     const NominalModel& model, double theta_x,
                                                     double theta_v,
                                                     const DrmmseOptions& opts = {});

/// Phi_t = (hat S^-_{t+1})^{-1} - (S^{-,*}_{t+1})^{-1} + C^T (Sv^{-1} - (Sv*_t)^{-1}) C.
SymMatrix phi_t(const PsdMatrix& prior_next, const LeastFavorable& lf_next,
                const LeastFavorable& lf_now, const PsdMatrix& sigma_v, const Matrix& c);

/// N-step blocked model. Stacked vectors run in descending time order.
struct DownsampledModel {
  int n;           // block length N
  Matrix a_pow_n;  // A^N
  Matrix r;        // [G, A G, ..., A^{N-1} G],            n_x x N n_x
  Matrix o;        // [C A^{N-1}; ...; C A; C],            N n_y x n_x
  Matrix o_r;      // [A^{N-1}; ...; A; I],                N n_x x n_x
  Matrix d;        // I_N (x) Sigma_v^{1/2},              N n_y x N n_y
  Matrix l;        // [L]_ij = A^{j-i-1} G for j > i,      N n_x x N n_x
  Matrix h;        // (I_N (x) C) L,                       N n_y x N n_x
};

DownsampledModel build_downsampled(const NominalModel& model, int n);

/// 1 / lambda_max(L (I + H^T (D D^T)^{-1} H)^{-1} L^T); +infinity when L = 0.
double phi_tilde(const DownsampledModel& dm);

struct DownsampledGramians {
  SymMatrix omega;  // Omega_Phi
  SymMatrix w;      // W_Phi
  Matrix alpha;     // alpha_N
};

/// Gramians of the downsampled DR Riccati map for a block-diagonal
/// perturbation 0 <= phi_bar < phi_tilde I. phi_bar = 0 gives the nominal
/// N-step Riccati map.
DownsampledGramians omega_and_w(const DownsampledModel& dm, const SymMatrix& phi_bar);

/// alpha ((S)^{-1} + Omega)^{-1} alpha^T + W.
PsdMatrix downsampled_riccati(const DownsampledGramians& g, const PsdMatrix& sigma);

/// Largest accepted phi with Omega_{phi I} > eps and phi lambda_max(sigma_bar_q) < 1.
double find_phi(const DownsampledModel& dm, const PsdMatrix& sigma_bar_q);

/// sqrt(Tr M / (1 - phi lambda_max(M))) - sqrt(Tr M).
double theta_max_formula(const Matrix& m, double phi);

struct ContractionCertificate {
  int n;
  int q;
  double phi_tilde;  // may be +infinity
  double phi;
  PsdMatrix sigma_bar_q;
  double theta_max;
};

/// Radius below which the time-varying DR filter (theta_v = 0) converges to
/// the steady-state filter.
ContractionCertificate theta_max(const NominalModel& model, int q, int n);

/// True iff every Phi_t with t >= q satisfies -slack <= Phi_t <= phi + slack
/// (eigenvalue slack 1e-8). Each block of the downsampled perturbation is one
/// Phi_t, so this is the blockwise form of 0 <= Phi_bar <= phi I.
bool certify_run(const std::vector<SymMatrix>& phis, double phi, int n, int q);

}  // namespace wdrkf
