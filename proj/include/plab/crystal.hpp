#pragma once

#include <optional>
#include <vector>

#include "plab/coulomb.hpp"
#include "plab/grid.hpp"

namespace plab::crystal {

using coulomb::CoulombKernel;
using grid::GridFunction;
using grid::LatticeSpec;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

/// Raised when a band gap closes where the insulator assumption requires one.
struct InsulatorViolation : std::runtime_error {
    double band_below;
    double band_above;
    InsulatorViolation(double lo, double hi)
        : std::runtime_error("insulator assumption violated: bands touch at Fermi count"),
          band_below(lo), band_above(hi) {}
};

struct ScfDivergence : std::runtime_error {
    std::vector<double> residual_trace;
    explicit ScfDivergence(std::vector<double> trace)
        : std::runtime_error("SCF did not converge"), residual_trace(std::move(trace)) {}
};

/// Per-cell Gaussian charge sites, periodized over the lattice.
struct GaussianSite {
    std::array<double, 3> center{0.0, 0.0, 0.0}; // within the unit cell
    double sigma = 0.2;
    double charge = 1.0;
};

class NuclearDensity {
public:
    NuclearDensity(std::vector<GaussianSite> sites);
    int total_charge() const { return z_; }
    const std::vector<GaussianSite>& sites() const { return sites_; }
    /// Nonnegative periodic density on the supercell grid, renormalized so the
    /// unit-cell integral is exactly Z.
    GridFunction realize(const LatticeSpec& spec) const;

private:
    std::vector<GaussianSite> sites_;
    int z_;
};

struct ScfParams {
    double mixing = 0.5;     // damping alpha in (0,1]
    // Kerker screening wavenumber: the density update is filtered by
    // k^2/(k^2 + q0^2), which tames the 4*pi/k^2 amplification of
    // long-wavelength charge oscillations on large supercells. The fixed
    // point is unchanged; 0 disables the filter.
    double kerker_q0 = 1.0;
    int max_iter = 200;
    double tol = 1e-9;       // density residual, L2 per cell
    double gap_tol = 1e-6;
};

/// Converged periodic Fermi sea. Owns the eigendecomposition of H0 on the
/// supercell so that later block algebra (gamma0, spectral functions) is exact.
struct CrystalState {
    LatticeSpec spec;
    int z = 0;
    double mass = 1.0;       // polaron mass; crystal electrons always use mass 1
    GridFunction v0;         // zero-mean periodic potential, supercell grid
    GridFunction rho0;       // Fermi-sea density
    GridFunction mu0;        // nuclear density
    double fermi_level = 0.0;
    double gap = 0.0;
    double e_per = 0.0;      // inf spec(-Delta/2m + V0)
    GridFunction u_per;      // unit-cell Bloch ground state, per-cell normalized
    bool band_minimum_at_k0 = true;
    VectorXd eigenvalues;    // of converged H0 (mass-1 supercell operator)
    MatrixXcd eigenvectors;  // Euclidean-orthonormal columns
    int n_occupied = 0;      // Z * M^d
    double scf_residual = 0.0;
    std::vector<double> energy_trace;

    MatrixXcd gamma0() const;
    /// H0 - eps_F reassembled from the stored spectrum.
    MatrixXcd h0_shifted() const;
    /// u_per tiled periodically over the supercell, supercell-normalized.
    GridFunction u_per_on_supercell() const;
};

/// Dense supercell Hamiltonian -Delta/(2m) + V in the scaled position basis.
MatrixXcd hamiltonian(const LatticeSpec& spec, const GridFunction& v, double mass);

/// Kinetic matrix -Delta/(2m) alone.
const MatrixXcd& kinetic_matrix(const LatticeSpec& spec, double mass);

/// Density of a dense operator: rho(x) = Q(x,x)/h^d.
GridFunction density_of_operator(const MatrixXcd& q, const LatticeSpec& spec);

/// Diagonal multiplication operator for a real potential.
Eigen::VectorXd multiplication_diagonal(const GridFunction& v);

CrystalState scf_solve(const NuclearDensity& mu, const LatticeSpec& spec,
                       const ScfParams& params, double polaron_mass = 1.0);

/// Bloch vectors commensurate with the supercell, first Brillouin zone.
std::vector<std::array<double, 3>> commensurate_k_points(const LatticeSpec& spec);

/// Bloch-fiber eigenvalues of -1/(2m)(grad + ik)^2 + V_per per k point,
/// each sorted ascending. V is given on the supercell and folded to the cell.
std::vector<std::vector<double>> band_structure(const GridFunction& v_supercell, double mass,
                                                const std::vector<std::array<double, 3>>& k_points);

/// Indirect gap between bands Z and Z+1 and the midgap Fermi level.
std::pair<double, double> insulator_check(const std::vector<std::vector<double>>& bands, int z,
                                          double gap_tol = 0.0);

struct PolaronBand {
    double e_per;
    GridFunction u_per;  // unit-cell grid, per-cell normalized
    bool minimum_at_k0;
    std::array<double, 3> k_min;
};

PolaronBand polaron_band(const GridFunction& v_supercell, double mass);

/// Fold a periodic supercell function onto the unit-cell grid (cell average).
GridFunction restrict_to_cell(const GridFunction& f);

void save_crystal(const CrystalState& st, const std::string& path, const std::string& config_hash);
std::optional<CrystalState> load_crystal(const std::string& path, const std::string& config_hash);

} // namespace plab::crystal
