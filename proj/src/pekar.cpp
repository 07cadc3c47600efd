#include "plab/pekar.hpp"

#include "plab/localization.hpp"

#include <algorithm>
#include <cmath>

namespace plab::pekar {

DielectricModel DielectricModel::scalar(double eps) {
    DielectricModel m;
    m.epsilon = eps;
    return m;
}

DielectricModel DielectricModel::matrix(const Eigen::Matrix3d& eps, int dim) {
    DielectricModel m;
    m.tensor = (eps + eps.transpose()) / 2.0;
    m.epsilon = m.tensor->topLeftCorner(dim, dim).trace() / dim;
    return m;
}

void DielectricModel::validate(int dim) const {
    if (tensor) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(*tensor, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().head(dim).minCoeff() <= 1.0)
            throw std::invalid_argument("DielectricModel: tensor eigenvalues must exceed 1");
    } else if (!(epsilon > 1.0)) {
        throw std::invalid_argument("DielectricModel: epsilon must exceed 1");
    }
}

double DielectricModel::quadratic_form(const std::array<double, 3>& k, int dim) const {
    if (!tensor) {
        double k2 = 0.0;
        for (int ax = 0; ax < dim; ++ax) k2 += k[ax] * k[ax];
        return epsilon * k2;
    }
    Eigen::Vector3d kv = Eigen::Vector3d::Zero();
    for (int ax = 0; ax < dim; ++ax) kv[ax] = k[ax];
    return kv.dot(*tensor * kv);
}

namespace {

// Per-mode multiplier 4*pi*(1/(k^T eps k) - 1/|k|^2); 0 at the zero mode.
Eigen::VectorXd effective_multiplier(const LatticeSpec& spec, const DielectricModel& eps) {
    const auto ks = grid::wavevectors(spec);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ks.size()));
    for (std::size_t i = 0; i < ks.size(); ++i) {
        double k2 = 0.0;
        for (int ax = 0; ax < spec.dim; ++ax) k2 += ks[i][ax] * ks[i][ax];
        if (k2 < 1e-14) continue;
        g[static_cast<Eigen::Index>(i)] =
            4.0 * M_PI * (1.0 / eps.quadratic_form(ks[i], spec.dim) - 1.0 / k2);
    }
    return g;
}

} // namespace

double fp_effective(const GridFunction& rho, const DielectricModel& eps) {
    const LatticeSpec& spec = rho.spec();
    const Eigen::VectorXd g = effective_multiplier(spec, eps);
    const GridFunction c = grid::fourier(rho);
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        acc += g[static_cast<Eigen::Index>(i)] * std::norm(c[i]);
    return 0.5 * spec.volume() * acc;
}

double pekar_energy(const SingleState& psi, const DielectricModel& eps) {
    GridFunction rho(psi.psi.spec(), GridFunction::Tag::Real);
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(psi.psi[i]);
    return grid::gradient_norm_sq(psi.psi) / (2.0 * psi.mass) + fp_effective(rho, eps);
}

GridFunction dilated_profile_density(const LatticeSpec& spec,
                                     const std::function<double(double)>& chi_profile,
                                     double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("dilated_profile_density: lambda > 0 required");
    std::array<double, 3> center{};
    for (int ax = 0; ax < spec.dim; ++ax) center[ax] = spec.length() / 2.0;
    GridFunction rho(spec, GridFunction::Tag::Real);
    const double scale = std::pow(lambda, -spec.dim);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = grid::torus_distance(spec, grid::point_of(spec, i), center);
        const double chi = chi_profile(r / lambda);
        rho[i] = scale * chi * chi;
    }
    return rho;
}

EpsilonFit fit_epsilon_from_table(const std::vector<std::pair<double, double>>& table,
                                  const GridFunction& rho_ref, double lambda_ref,
                                  double monotone_tol) {
    if (table.size() < 2)
        throw std::invalid_argument("fit_epsilon_from_table: need at least 2 points");
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].first <= table[i - 1].first)
            throw std::invalid_argument("fit_epsilon_from_table: lambdas must increase");
        if (std::abs(table[i].second) > std::abs(table[i - 1].second) + monotone_tol)
            throw FitUnreliable("|F| fails to decrease along the lambda sweep",
                                std::vector<std::pair<double, double>>(table));
    }

    EpsilonFit fit;
    fit.table = table;

    // Least squares for F = c/lambda.
    double num = 0.0, den = 0.0;
    for (const auto& [lam, f] : table) {
        num += f / lam;
        den += 1.0 / (lam * lam);
    }
    fit.c = num / den;
    for (const auto& [lam, f] : table) fit.residuals.push_back(f - fit.c / lam);

    {
        std::vector<double> lams, absf;
        for (const auto& [lam, f] : table) {
            lams.push_back(lam);
            absf.push_back(std::abs(f));
        }
        if (table.size() >= 3) fit.slope = localization::loglog_slope(lams, absf);
        else fit.slope = std::log(absf[1] / absf[0]) / std::log(lams[1] / lams[0]);
    }

    // Invert fp_effective(rho_ref, eps) = c/lambda_ref; the left side is 0 at
    // eps = 1 and decreases monotonically toward -D(rho,rho)/2 as eps grows.
    const double target = fit.c / lambda_ref;
    if (!(target < 0.0))
        throw FitUnreliable("fitted coefficient is not negative",
                            std::vector<std::pair<double, double>>(table));
    double lo = 1.0, hi = 2.0;
    while (fp_effective(rho_ref, DielectricModel::scalar(hi)) > target) {
        hi *= 2.0;
        if (hi > 1e12)
            throw FitUnreliable("target below the eps -> infinity limit",
                                std::vector<std::pair<double, double>>(table));
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = (lo + hi) / 2.0;
        if (fp_effective(rho_ref, DielectricModel::scalar(mid)) > target) lo = mid;
        else hi = mid;
    }
    fit.epsilon = (lo + hi) / 2.0;
    return fit;
}

EpsilonFit extract_epsilon(const CrystalState& crystal,
                           const std::function<double(double)>& chi_profile,
                           const std::vector<double>& lambda_list, const CoulombKernel& w,
                           const ResponseParams& params) {
    if (lambda_list.empty()) throw std::invalid_argument("extract_epsilon: empty lambda list");
    std::vector<std::pair<double, double>> table;
    for (double lam : lambda_list) {
        const GridFunction rho = dilated_profile_density(crystal.spec, chi_profile, lam);
        table.emplace_back(lam, response::minimize_fcrys(rho, crystal, w, params).value);
    }
    const double lambda_ref = lambda_list.back();
    const GridFunction rho_ref = dilated_profile_density(crystal.spec, chi_profile, lambda_ref);
    return fit_epsilon_from_table(table, rho_ref, lambda_ref);
}

ChoquardResult choquard_solve(const DielectricModel& eps, double mass, const LatticeSpec& spec,
                              const ChoquardParams& params) {
    eps.validate(spec.dim);
    const Eigen::VectorXd g = effective_multiplier(spec, eps);

    // Gaussian start off-center to avoid symmetry traps.
    GridFunction psi(spec, GridFunction::Tag::Complex);
    std::array<double, 3> center{};
    for (int ax = 0; ax < spec.dim; ++ax) center[ax] = 0.4 * spec.length();
    const double sigma = spec.length() / 8.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double r = grid::torus_distance(spec, grid::point_of(spec, i), center);
        psi[i] = std::exp(-r * r / (2.0 * sigma * sigma));
    }
    SingleState state{std::move(psi), mass};
    state.normalize();

    auto energy_and_grad = [&](const SingleState& s, GridFunction* grad) {
        GridFunction rho(spec, GridFunction::Tag::Real);
        for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::norm(s.psi[i]);
        GridFunction c_rho = grid::fourier(rho);
        for (std::size_t i = 0; i < c_rho.size(); ++i)
            c_rho[i] *= g[static_cast<Eigen::Index>(i)];
        const GridFunction v_eff = grid::inverse_fourier(c_rho);
        const double e = grid::gradient_norm_sq(s.psi) / (2.0 * mass) +
                         fp_effective(rho, eps);
        if (grad) {
            GridFunction kin = grid::laplacian_apply(s.psi);
            *grad = GridFunction(spec, GridFunction::Tag::Complex);
            for (std::size_t i = 0; i < grad->size(); ++i)
                (*grad)[i] = kin[i] / (2.0 * mass) + std::real(v_eff[i]) * s.psi[i];
        }
        return e;
    };

    ChoquardResult result;
    GridFunction grad(spec, GridFunction::Tag::Complex);
    double e = energy_and_grad(state, &grad);
    result.energy_trace.push_back(e);
    double step = params.step;
    for (int it = 0; it < params.max_iter; ++it) {
        // Project the gradient onto the tangent space of the sphere.
        const grid::Complex overlap = state.psi.inner(grad);
        GridFunction tangent = grad;
        for (std::size_t i = 0; i < tangent.size(); ++i) tangent[i] -= overlap * state.psi[i];
        const double gnorm = tangent.norm();
        if (gnorm < params.tol) break;

        bool improved = false;
        for (int half = 0; half < 40; ++half) {
            SingleState trial = state;
            for (std::size_t i = 0; i < trial.psi.size(); ++i)
                trial.psi[i] -= step * tangent[i];
            trial.normalize();
            const double e_trial = energy_and_grad(trial, nullptr);
            if (e_trial < e) {
                state = std::move(trial);
                e = e_trial;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if (!improved) break;
        e = energy_and_grad(state, &grad);
        result.energy_trace.push_back(e);
        result.iterations = it + 1;
        step = std::min(step * 1.5, 10.0);
        const std::size_t n = result.energy_trace.size();
        if (n >= 2 && result.energy_trace[n - 2] - e < params.tol * (1.0 + std::abs(e)) &&
            gnorm < 1e-6)
            break;
    }
    result.energy = e;
    result.state = std::move(state);
    return result;
}

} // namespace plab::pekar
