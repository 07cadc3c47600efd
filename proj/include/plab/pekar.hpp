#pragma once

#include "plab/polaron.hpp"

namespace plab::pekar {

using coulomb::CoulombKernel;
using crystal::CrystalState;
using grid::GridFunction;
using grid::LatticeSpec;
using polaron::SingleState;
using response::ResponseParams;

/// Macroscopic dielectric tensor. Scalar by default; an anisotropic symmetric
/// positive matrix is accepted and used mode by mode.
struct DielectricModel {
    double epsilon = 2.0;
    std::optional<Eigen::Matrix3d> tensor;

    static DielectricModel scalar(double eps);
    static DielectricModel matrix(const Eigen::Matrix3d& eps, int dim);

    /// k^T eps k for a wavevector (scalar model: eps |k|^2).
    double quadratic_form(const std::array<double, 3>& k, int dim) const;
    void validate(int dim) const;
};

/// Screened-minus-bare interaction energy of a charge density,
/// (L^d/2) sum_{k!=0} 4*pi*(1/(k^T eps k) - 1/|k|^2) |c_rho(k)|^2.
/// Zero at eps = 1, strictly negative for nonzero rho when eps > 1, and
/// decreasing in eps mode by mode.
double fp_effective(const GridFunction& rho, const DielectricModel& eps);

/// Macroscopic polaron energy |grad psi|^2/(2m) + fp_effective(|psi|^2, eps).
double pekar_energy(const SingleState& psi, const DielectricModel& eps);

struct EpsilonFit {
    double epsilon = 0.0;    // fitted dielectric constant
    double c = 0.0;          // coefficient of the fitted c/lambda law
    double slope = 0.0;      // log-log slope of |F| against lambda
    std::vector<double> residuals;
    std::vector<std::pair<double, double>> table;  // (lambda, F)
};

struct FitUnreliable : std::runtime_error {
    std::vector<std::pair<double, double>> table;
    explicit FitUnreliable(std::string msg, std::vector<std::pair<double, double>> t)
        : std::runtime_error(std::move(msg)), table(std::move(t)) {}
};

/// Profile density lambda^{-d} chi(r/lambda)^2 on the supercell grid,
/// centered at the supercell midpoint.
GridFunction dilated_profile_density(const LatticeSpec& spec,
                                     const std::function<double(double)>& chi_profile,
                                     double lambda);

/// Fits F(lambda) ~ c/lambda on a (lambda, F) table and inverts
/// fp_effective(rho_ref, eps) = c/lambda_ref for the scalar eps by bisection.
/// rho_ref is the dilated profile density at lambda_ref.
EpsilonFit fit_epsilon_from_table(const std::vector<std::pair<double, double>>& table,
                                  const GridFunction& rho_ref, double lambda_ref,
                                  double monotone_tol = 1e-9);

/// Measures the response energy of dilated profile densities and extracts the
/// effective dielectric constant from the 1/lambda scaling.
EpsilonFit extract_epsilon(const CrystalState& crystal,
                           const std::function<double(double)>& chi_profile,
                           const std::vector<double>& lambda_list, const CoulombKernel& w,
                           const ResponseParams& params = {});

struct ChoquardParams {
    double tol = 1e-10;
    int max_iter = 5000;
    double step = 0.5;
};

struct ChoquardResult {
    SingleState state;
    double energy = 0.0;
    std::vector<double> energy_trace;
    int iterations = 0;
};

/// Ground state of the macroscopic functional by norm-projected gradient
/// descent with step halving.
ChoquardResult choquard_solve(const DielectricModel& eps, double mass, const LatticeSpec& spec,
                              const ChoquardParams& params = {});

} // namespace plab::pekar
