#pragma once

#include <functional>
#include <optional>

#include "plab/crystal.hpp"

namespace plab::response {

using coulomb::CoulombKernel;
using crystal::CrystalState;
using grid::GridFunction;
using grid::LatticeSpec;
using Eigen::MatrixXcd;

struct SolverDivergence : std::runtime_error {
    std::vector<double> gap_trace;
    explicit SolverDivergence(std::vector<double> trace)
        : std::runtime_error("minimization did not reach the requested duality gap"),
          gap_trace(std::move(trace)) {}
};

/// Constrained Hermitian response operator Q with -gamma0 <= Q <= 1-gamma0,
/// its ++/--/+-/-+ block decomposition and its density.
class Perturbation {
public:
    /// check=true verifies Hermiticity and constraint feasibility.
    Perturbation(MatrixXcd q, const CrystalState& crystal, bool check = true,
                 double feas_tol = 1e-9);
    static Perturbation zero(const CrystalState& crystal);

    const MatrixXcd& matrix() const { return q_; }
    const MatrixXcd& block_mm() const { return mm_; }
    const MatrixXcd& block_pp() const { return pp_; }
    const MatrixXcd& block_mp() const { return mp_; }
    const MatrixXcd& block_pm() const { return pm_; }
    const GridFunction& density() const { return rho_; }

    /// Eigenvalue bounds of gamma0 + Q.
    std::pair<double, double> occupation_range(const CrystalState& crystal) const;
    bool is_feasible(const CrystalState& crystal, double tol = 1e-9) const;

private:
    MatrixXcd q_, mm_, pp_, mp_, pm_;
    GridFunction rho_;
};

/// Generalized trace Tr Q^{++} + Tr Q^{--} (equals Tr Q in finite dimension).
double tr0(const Perturbation& q);

/// Tr(|H0-eF|^{1/2}(Q^{++}-Q^{--})|H0-eF|^{1/2}), evaluated in the eigenbasis.
double kinetic_energy(const Perturbation& q, const CrystalState& crystal);
/// Same quantity through the algebraically equivalent route
/// Tr((H0-eF)(Q^{++}+Q^{--})), dense-product evaluation.
double kinetic_energy_alt(const Perturbation& q, const CrystalState& crystal);

/// Full response energy Tr0((H0-eF)Q) + 1/2 D(rho_Q,rho_Q) + D(nu,rho_Q).
double energy_of(const GridFunction& nu, const Perturbation& q, const CrystalState& crystal,
                 const CoulombKernel& w);

/// Exact linear minimization oracle over the constraint set:
/// argmin Tr(A Q) = 1_{(-inf,0)}(A) - gamma0. Zero eigenvalues of A get
/// occupation 0.
Perturbation lmo(const MatrixXcd& a, const CrystalState& crystal);

enum class FwVariant { FrankWolfe, FwLineSearch };

struct ResponseParams {
    double gap_tol = 0.0;     // <= 0: auto 1e-7 * (1 + D(nu,nu)/2)
    int max_iter = 2000;
    FwVariant variant = FwVariant::FwLineSearch;
    bool compute_q_norm = false;
};

struct ResponseResult {
    double value = 0.0;
    std::optional<Perturbation> minimizer;
    double gap = 0.0;
    double gap_tol_used = 0.0;
    std::vector<double> objective_trace;
    std::vector<double> gap_trace;
    int iterations = 0;
    double tr0_q = 0.0;
    double d_rho = 0.0;         // D(rho_Q, rho_Q)
    double q_norm_value = -1.0; // -1 if not requested
};

/// F_crys[nu]: convex minimization over the constraint set by Frank-Wolfe
/// with an exact line search on the Coulomb quadratic.
ResponseResult minimize_fcrys(const GridFunction& nu, const CrystalState& crystal,
                              const CoulombKernel& w, const ResponseParams& params = {},
                              const MatrixXcd* warm_start = nullptr);

/// Discrete analogue of the natural norm on the response space:
/// S2 + S1 of the diagonal blocks + the |grad|-weighted versions.
double q_norm(const Perturbation& q, const LatticeSpec& spec);

struct DecouplingRow {
    double separation;
    double f_combined;
    double delta;  // |F[rho1 + T_s rho2] - F[rho1] - F[rho2]|
};

struct DecouplingTable {
    double f1 = 0.0;
    double f2 = 0.0;
    std::vector<DecouplingRow> rows;
};

/// Energy decoupling of two bumps as a function of their lattice separation.
DecouplingTable decoupling_probe(const GridFunction& rho1, const GridFunction& rho2,
                                 const std::vector<double>& separations,
                                 const CrystalState& crystal, const CoulombKernel& w,
                                 const ResponseParams& params = {});

} // namespace plab::response
