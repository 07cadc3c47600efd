#pragma once

#include "plab/response.hpp"

namespace plab::polaron {

using coulomb::CoulombKernel;
using crystal::CrystalState;
using grid::GridFunction;
using grid::LatticeSpec;
using response::ResponseParams;
using Eigen::VectorXcd;

/// Normalized one-particle state on the supercell.
struct SingleState {
    GridFunction psi;
    double mass = 1.0;

    /// Rescales to unit L2 norm; rejects the zero function.
    void normalize();
    GridFunction density() const;
};

enum class Statistics { Fermionic, Bosonic };

/// N-particle grid tensor, d=1 only. Amplitudes are stored Euclidean-
/// normalized in row-major order over (x_1, ..., x_N).
struct ManyBodyState {
    int n_particles = 2;
    LatticeSpec spec;
    VectorXcd amplitudes;
    double mass = 1.0;
    Statistics statistics = Statistics::Fermionic;

    std::size_t tensor_size() const;
    void normalize();
    /// Max norm of Psi + Psi o swap(i,j) over all pairs (0 for antisymmetric).
    double antisymmetry_defect() const;
};

/// Projects onto the (anti)symmetric subspace.
void symmetrize(ManyBodyState& state);

/// rho_Psi(x) = N * integral over the other particles; integrates to N.
GridFunction density_many(const ManyBodyState& state);

struct SingleEnergyBreakdown {
    double kinetic;
    double external;
    double response;  // F_crys[|psi|^2]
    double total() const { return kinetic + external + response; }
};

SingleEnergyBreakdown energy_single(const SingleState& state, const CrystalState& crystal,
                                    const CoulombKernel& w, const ResponseParams& params = {});

struct ManyEnergyBreakdown {
    double kinetic;
    double interaction;
    double external;
    double response;
    double total() const { return kinetic + interaction + external + response; }
};

ManyEnergyBreakdown energy_many(const ManyBodyState& state, const CrystalState& crystal,
                                const CoulombKernel& w, const ResponseParams& params = {});

/// <Psi, H(N) Psi> without the response term (kinetic + pair interaction +
/// external potential v).
double many_body_expectation(const ManyBodyState& state, const GridFunction& v,
                             const CoulombKernel& w);

enum class E1Init { UperBump, Gaussian, Provided };

struct PolaronParams {
    double outer_tol = 1e-7;
    double residual_tol = 1e-6;  // fixed-point misfit of the converged pair
    int max_outer = 300;
    E1Init init = E1Init::UperBump;
    ResponseParams response;
    bool disable_response = false;    // freeze Q = 0
    bool disable_interaction = false; // N-body: drop the pair repulsion
};

struct PolaronResult {
    double energy = 0.0;
    std::optional<SingleState> single;
    std::optional<ManyBodyState> many;
    GridFunction rho;
    std::optional<response::Perturbation> q;
    std::vector<double> outer_trace;
    double final_gap = 0.0;
    double eigen_residual = 0.0;
    bool bound_vs_eper = false;
    int outer_iterations = 0;
};

PolaronResult minimize_e1(const CrystalState& crystal, const CoulombKernel& w,
                          const PolaronParams& params = {},
                          const SingleState* provided = nullptr);

/// u_per(x) * lambda^{-d/2} chi(x/lambda), renormalized. The profile is a
/// radial function of the minimal-image distance to the supercell center.
SingleState trial_lambda(const CrystalState& crystal,
                         const std::function<double(double)>& chi_profile, double lambda,
                         double support_radius);

/// Antisymmetrized product Psi_a ^ Psi_b(. - shift); factor densities must be
/// disjoint after shifting.
ManyBodyState wedge_trial(const ManyBodyState& a, const ManyBodyState& b,
                          const std::array<double, 3>& shift);
ManyBodyState many_from_single(const SingleState& s);

PolaronResult minimize_eN(int n_particles, const CrystalState& crystal, const CoulombKernel& w,
                          const PolaronParams& params = {},
                          Statistics statistics = Statistics::Fermionic);

struct BindingRow {
    int k;
    double e_k;
    double e_nmk;
    double sum;       // E(k) + E(N-k)
    bool satisfied;   // E(N) < sum (strict binding)
    bool large_ok;    // E(N) <= sum + tol
};

struct BindingReport {
    int n;
    double e_n;
    std::vector<BindingRow> rows;
    bool all_satisfied;
};

BindingReport binding_report(int n_particles, const CrystalState& crystal,
                             const CoulombKernel& w, const PolaronParams& params = {});

/// Lowest eigenpair of a Hermitian operator given as a matvec, by Lanczos with
/// full reorthogonalization. Used for the N-body inner eigenproblem.
std::pair<double, VectorXcd> lanczos_lowest(
    const std::function<VectorXcd(const VectorXcd&)>& apply, const VectorXcd& start,
    int max_iter = 200, double tol = 1e-11);

} // namespace plab::polaron
