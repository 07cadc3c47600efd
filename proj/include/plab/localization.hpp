#pragma once

#include "plab/response.hpp"

namespace plab::localization {

using coulomb::CoulombKernel;
using crystal::CrystalState;
using grid::GridFunction;
using grid::LatticeSpec;
using response::Perturbation;
using Eigen::MatrixXcd;

/// Smooth partition of unity chi^2 + eta^2 = 1. chi = 1 inside radius R of the
/// center, cos^2 ramp on [R, 2R], 0 beyond; distances are minimal-image.
struct PartitionPair {
    double radius;
    std::array<double, 3> center;
    GridFunction chi;
    GridFunction eta;
    double grad_chi_max;  // recorded C/R-type constant
};

/// Requires 2R < L/2 so the support fits the supercell without wrapping.
PartitionPair build_pair(double radius, const std::array<double, 3>& center,
                         const LatticeSpec& spec);

/// X_R = g0 chi g0 + (1-g0) chi (1-g0); Y_R likewise with eta. Both commute
/// with gamma0 by construction.
struct LocalizationOps {
    MatrixXcd x;
    MatrixXcd y;
};

LocalizationOps build_ops(const PartitionPair& pair, const CrystalState& crystal);

/// Conjugation A Q A; preserves the admissibility constraint for A in {X_R, Y_R}.
Perturbation localize(const Perturbation& q, const MatrixXcd& a, const CrystalState& crystal);

/// Exact algebraic lemma: for a projector Pi, contractions chi, eta with
/// chi^2 + eta^2 <= 1 and -Pi <= Q,Q' <= 1-Pi, the sum X Q X + Y Q' Y stays
/// admissible. Returns whether the spectrum of Pi + XQX + YQ'Y lies in [0,1].
bool adding_lemma_check(const MatrixXcd& pi, const MatrixXcd& chi, const MatrixXcd& eta,
                        const MatrixXcd& q, const MatrixXcd& q_prime, double tol = 1e-11);

struct LocalizationRow {
    double radius;
    double e_rho;   // L2 + Coulomb norm of rho_Q - rho_XQX - rho_YQY
    double e_kin;   // kinetic-trace localization error
    double n_bound; // (||XQX||_Q + ||YQY||_Q) / ||Q||_Q
};

struct LocalizationReport {
    std::vector<LocalizationRow> rows;
    double slope_rho;  // log-log fit of e_rho vs R
    double slope_kin;
    double q_norm_q;
};

LocalizationReport localization_error_report(const Perturbation& q, const CrystalState& crystal,
                                             const CoulombKernel& w,
                                             const std::vector<double>& radii,
                                             const std::array<double, 3>& center = {0, 0, 0});

/// Spectral-grid defect of the IMS identity
/// (-Delta) = chi(-Delta)chi + eta(-Delta)eta - |grad chi|^2/2 - |grad eta|^2/2,
/// measured as an operator norm. Zero in the continuum; aliasing only here.
double ims_defect(const GridFunction& chi, const GridFunction& eta, const LatticeSpec& spec);

/// Least-squares slope of log(y) against log(x), ignoring nonpositive y.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace plab::localization
