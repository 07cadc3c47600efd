#include "plab/response.hpp"

#include <cmath>
#include <numeric>
#include <map>
#include <mutex>
#include <tuple>

namespace plab::response {

namespace {

GridFunction density_from_matrix(const MatrixXcd& q, const LatticeSpec& spec) {
    return crystal::density_of_operator(q, spec);
}

// Spectral projector onto the strictly negative spectrum of a Hermitian matrix.
MatrixXcd negative_projector(const MatrixXcd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(a);
    const auto& ev = eig.eigenvalues();
    int n_neg = 0;
    while (n_neg < ev.size() && ev[n_neg] < 0.0) ++n_neg;
    const auto cols = eig.eigenvectors().leftCols(n_neg);
    return cols * cols.adjoint();
}

// |grad| multiplier as a dense matrix, cached per spec.
const MatrixXcd& grad_magnitude_matrix(const LatticeSpec& spec) {
    static std::map<std::tuple<int, double, int, int>, MatrixXcd> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(spec.dim, spec.a, spec.n_cell, spec.multiplier);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // Build from the mass-1 kinetic matrix: |grad| = sqrt(2 * (-Delta/2)).
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(crystal::kinetic_matrix(spec, 1.0));
    Eigen::VectorXd s = (2.0 * eig.eigenvalues().cwiseMax(0.0)).cwiseSqrt();
    MatrixXcd g = eig.eigenvectors() * s.asDiagonal() * eig.eigenvectors().adjoint();
    g = (g + g.adjoint()).eval() / 2.0;
    return cache.emplace(key, std::move(g)).first->second;
}

double schatten1_hermitian(const MatrixXcd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(a, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().sum();
}

} // namespace

Perturbation::Perturbation(MatrixXcd q, const CrystalState& crystal, bool check, double feas_tol)
    : q_(std::move(q)), rho_(GridFunction::zero(crystal.spec)) {
    if (q_.rows() != q_.cols() ||
        static_cast<std::size_t>(q_.rows()) != crystal.spec.n_points())
        throw std::invalid_argument("Perturbation: matrix size does not match crystal grid");
    if (check && (q_ - q_.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("Perturbation: matrix is not Hermitian");
    q_ = ((q_ + q_.adjoint()) / 2.0).eval();
    const MatrixXcd p = crystal.gamma0();
    const MatrixXcd qp = q_ * p;
    mm_ = p * qp;
    pm_ = qp - mm_;              // (1-P) Q P
    const MatrixXcd pq = p * q_;
    mp_ = pq - mm_;              // P Q (1-P)
    pp_ = q_ - mm_ - pm_ - mp_;
    rho_ = density_from_matrix(q_, crystal.spec);
    if (check && !is_feasible(crystal, feas_tol))
        throw std::invalid_argument("Perturbation: constraint -gamma0 <= Q <= 1-gamma0 violated");
}

Perturbation Perturbation::zero(const CrystalState& crystal) {
    const auto n = static_cast<Eigen::Index>(crystal.spec.n_points());
    return Perturbation(MatrixXcd::Zero(n, n), crystal, false);
}

std::pair<double, double> Perturbation::occupation_range(const CrystalState& crystal) const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(crystal.gamma0() + q_, Eigen::EigenvaluesOnly);
    return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

bool Perturbation::is_feasible(const CrystalState& crystal, double tol) const {
    auto [lo, hi] = occupation_range(crystal);
    return lo >= -tol && hi <= 1.0 + tol;
}

double tr0(const Perturbation& q) {
    return std::real(q.block_pp().trace() + q.block_mm().trace());
}

double kinetic_energy(const Perturbation& q, const CrystalState& crystal) {
    // In the H0 eigenbasis |H0-eF|^{1/2} is diagonal, so the sandwiched trace
    // reduces to a weighted diagonal sum.
    const MatrixXcd diff = q.block_pp() - q.block_mm();
    const MatrixXcd in_basis = crystal.eigenvectors.adjoint() * diff * crystal.eigenvectors;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < in_basis.rows(); ++i)
        acc += std::abs(crystal.eigenvalues[i] - crystal.fermi_level) * std::real(in_basis(i, i));
    return acc;
}

double kinetic_energy_alt(const Perturbation& q, const CrystalState& crystal) {
    return std::real((crystal.h0_shifted() * (q.block_pp() + q.block_mm())).trace());
}

double energy_of(const GridFunction& nu, const Perturbation& q, const CrystalState& crystal,
                 const CoulombKernel& w) {
    if (!q.is_feasible(crystal))
        throw std::invalid_argument("energy_of: infeasible perturbation");
    const GridFunction& rho = q.density();
    return kinetic_energy(q, crystal) + 0.5 * w.d_pair(rho, rho) + w.d_pair(nu, rho);
}

Perturbation lmo(const MatrixXcd& a, const CrystalState& crystal) {
    if ((a - a.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("lmo: matrix is not Hermitian");
    return Perturbation(negative_projector((a + a.adjoint()) / 2.0) - crystal.gamma0(),
                        crystal, false);
}

ResponseResult minimize_fcrys(const GridFunction& nu, const CrystalState& crystal,
                              const CoulombKernel& w, const ResponseParams& params,
                              const MatrixXcd* warm_start) {
    const LatticeSpec& spec = crystal.spec;
    const auto n = static_cast<Eigen::Index>(spec.n_points());
    const double d_nu = w.d_pair(nu, nu);
    const double gap_tol = params.gap_tol > 0.0 ? params.gap_tol : 1e-7 * (1.0 + 0.5 * d_nu);

    const MatrixXcd h0s = crystal.h0_shifted();
    const MatrixXcd gamma0 = crystal.gamma0();
    const GridFunction v_nu = w.potential_of(nu);

    MatrixXcd q = warm_start ? *warm_start : MatrixXcd::Zero(n, n);

    ResponseResult res;
    res.gap_tol_used = gap_tol;

    auto objective = [&](const MatrixXcd& qm, const GridFunction& rho) {
        return std::real((h0s * qm).trace()) + 0.5 * w.d_pair(rho, rho) + w.d_pair(nu, rho);
    };

    // Gradient of the objective at density rho: H0 - eF plus the Hartree
    // potential of rho + nu.
    auto grad_of = [&](const GridFunction& rho) {
        GridFunction v_q = w.potential_of(rho);
        MatrixXcd grad = h0s;
        grad.diagonal() += (v_q.real_values() + v_nu.real_values()).cast<grid::Complex>();
        return grad;
    };

    bool converged = false;
    double best_f = std::numeric_limits<double>::infinity();
    MatrixXcd best_q;
    double best_gap = std::numeric_limits<double>::infinity();

    if (params.variant == FwVariant::FrankWolfe) {
        // Classical conditional gradient with the 2/(k+2) step.
        for (int iter = 0; iter < params.max_iter; ++iter) {
            GridFunction rho = density_from_matrix(q, spec);
            const double f = objective(q, rho);
            res.objective_trace.push_back(f);
            const MatrixXcd grad = grad_of(rho);
            const MatrixXcd s = negative_projector(grad) - gamma0;
            const MatrixXcd dir = s - q;
            const double gap = -std::real((grad * dir).trace());
            res.gap_trace.push_back(gap);
            res.iterations = iter + 1;
            if (f < best_f) {
                best_f = f;
                best_q = q;
                best_gap = gap;
            }
            if (gap <= gap_tol) {
                converged = true;
                break;
            }
            q += (2.0 / (iter + 2.0)) * dir;
        }
    } else {
        // Fully corrective variant: keep the visited LMO vertices and, after
        // each new vertex, re-optimize the convex-hull weights exactly (the
        // objective restricted to the hull is a small simplex QP in the
        // weights, solved by pairwise steps). Iterates stay feasible and the
        // objective is monotone by construction.
        const int max_vertices = 30;
        std::vector<MatrixXcd> verts;
        std::vector<Eigen::VectorXd> vert_rho;
        std::vector<double> lin;  // Tr(h0s S_i) + D(nu, rho_i)
        std::vector<double> weights;
        Eigen::MatrixXd quad(max_vertices, max_vertices);  // D(rho_i, rho_j)

        auto d_pair_vec = [&](const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
            return w.d_pair(GridFunction(spec, f.cast<grid::Complex>(), GridFunction::Tag::Real),
                            GridFunction(spec, g.cast<grid::Complex>(), GridFunction::Tag::Real));
        };
        auto d_with_nu = [&](const Eigen::VectorXd& f) {
            return w.d_pair(nu,
                            GridFunction(spec, f.cast<grid::Complex>(), GridFunction::Tag::Real));
        };

        Eigen::VectorXd rho_q = density_from_matrix(q, spec).real_values();
        if (warm_start) {
            verts.push_back(q);
            vert_rho.push_back(rho_q);
            lin.push_back(std::real((h0s * q).trace()) + d_with_nu(rho_q));
            quad(0, 0) = d_pair_vec(rho_q, rho_q);
            weights.push_back(1.0);
        }

        for (int iter = 0; iter < params.max_iter; ++iter) {
            const GridFunction rho_gf(spec, rho_q.cast<grid::Complex>(), GridFunction::Tag::Real);
            const double f = objective(q, rho_gf);
            const MatrixXcd grad = grad_of(rho_gf);
            const MatrixXcd s = negative_projector(grad) - gamma0;
            const double gap = -std::real((grad * (s - q)).trace());
            res.objective_trace.push_back(f);
            res.gap_trace.push_back(gap);
            res.iterations = iter + 1;
            if (f < best_f) {
                best_f = f;
                best_q = q;
                best_gap = gap;
            } else if (gap < best_gap && f <= best_f + 1e-14 * (1.0 + std::abs(best_f))) {
                best_q = q;
                best_gap = gap;
            }
            if (gap <= gap_tol) {
                converged = true;
                break;
            }

            // Admit the new vertex; if full, evict the lightest one.
            if (static_cast<int>(verts.size()) == max_vertices) {
                std::size_t drop = 0;
                for (std::size_t i = 1; i < weights.size(); ++i)
                    if (weights[i] < weights[drop]) drop = i;
                verts.erase(verts.begin() + static_cast<std::ptrdiff_t>(drop));
                vert_rho.erase(vert_rho.begin() + static_cast<std::ptrdiff_t>(drop));
                lin.erase(lin.begin() + static_cast<std::ptrdiff_t>(drop));
                weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(drop));
                // Compact the quadratic form.
                const int k = static_cast<int>(verts.size());
                for (int r = static_cast<int>(drop); r < k; ++r)
                    for (int c = 0; c <= k; ++c) quad(r, c) = quad(r + 1, c);
                for (int c = static_cast<int>(drop); c < k; ++c)
                    for (int r = 0; r < k; ++r) quad(r, c) = quad(r, c + 1);
                const double wsum =
                    std::accumulate(weights.begin(), weights.end(), 0.0);
                for (auto& wv : weights) wv /= wsum;
            }
            const int k = static_cast<int>(verts.size());
            verts.push_back(s);
            vert_rho.push_back(density_from_matrix(s, spec).real_values());
            lin.push_back(std::real((h0s * s).trace()) + d_with_nu(vert_rho.back()));
            for (int i = 0; i <= k; ++i) {
                quad(i, k) = d_pair_vec(vert_rho[static_cast<std::size_t>(i)], vert_rho.back());
                quad(k, i) = quad(i, k);
            }
            weights.push_back(0.0);

            // Pairwise steps on the simplex QP over the hull weights.
            const int nk = k + 1;
            Eigen::VectorXd lam =
                Eigen::Map<const Eigen::VectorXd>(weights.data(), nk);
            if (lam.sum() <= 0.0) lam.setConstant(1.0 / nk);
            const Eigen::VectorXd cvec = Eigen::Map<const Eigen::VectorXd>(lin.data(), nk);
            const auto a = quad.topLeftCorner(nk, nk);
            Eigen::VectorXd g = cvec + a * lam;
            for (int inner = 0; inner < 20000; ++inner) {
                int i_fw = 0, i_aw = -1;
                for (int i = 1; i < nk; ++i)
                    if (g[i] < g[i_fw]) i_fw = i;
                for (int i = 0; i < nk; ++i)
                    if (lam[i] > 0.0 && (i_aw < 0 || g[i] > g[i_aw])) i_aw = i;
                const double slope = g[i_fw] - g[i_aw];
                if (slope > -1e-13 * (1.0 + std::abs(g[i_fw]))) break;
                const double curv = a(i_fw, i_fw) + a(i_aw, i_aw) - 2.0 * a(i_fw, i_aw);
                double t = lam[i_aw];
                if (curv > 1e-300) t = std::min(t, -slope / curv);
                lam[i_fw] += t;
                lam[i_aw] -= t;
                g += t * (a.col(i_fw) - a.col(i_aw));
            }
            for (int i = 0; i < nk; ++i) weights[static_cast<std::size_t>(i)] = lam[i];

            q.setZero();
            rho_q.setZero();
            for (int i = 0; i < nk; ++i) {
                if (lam[i] <= 0.0) continue;
                q += lam[i] * verts[static_cast<std::size_t>(i)];
                rho_q += lam[i] * vert_rho[static_cast<std::size_t>(i)];
            }
        }
    }
    if (!converged) throw SolverDivergence(std::move(res.gap_trace));

    Perturbation minimizer(std::move(best_q), crystal, false);
    res.value = best_f;
    res.gap = best_gap;
    res.tr0_q = tr0(minimizer);
    res.d_rho = w.d_pair(minimizer.density(), minimizer.density());
    if (params.compute_q_norm) res.q_norm_value = q_norm(minimizer, spec);
    res.minimizer = std::move(minimizer);
    return res;
}

double q_norm(const Perturbation& q, const LatticeSpec& spec) {
    const MatrixXcd& g = grad_magnitude_matrix(spec);
    const double s2 = q.matrix().norm();
    const double s1_pp = schatten1_hermitian(q.block_pp());
    const double s1_mm = schatten1_hermitian(q.block_mm());
    const double s2_grad = (g * q.matrix()).norm();
    const double s1_gpp = schatten1_hermitian(g * q.block_pp() * g);
    const double s1_gmm = schatten1_hermitian(g * q.block_mm() * g);
    return s2 + s1_pp + s1_mm + s2_grad + s1_gpp + s1_gmm;
}

DecouplingTable decoupling_probe(const GridFunction& rho1, const GridFunction& rho2,
                                 const std::vector<double>& separations,
                                 const CrystalState& crystal, const CoulombKernel& w,
                                 const ResponseParams& params) {
    const LatticeSpec& spec = crystal.spec;
    const double support_tol = 1e-10;
    for (double s : separations)
        if (s > spec.length() / 2.0)
            throw std::invalid_argument("decoupling_probe: separation exceeds L/2");

    DecouplingTable table;
    table.f1 = minimize_fcrys(rho1, crystal, w, params).value;
    table.f2 = minimize_fcrys(rho2, crystal, w, params).value;
    for (double s : separations) {
        GridFunction shifted = grid::translate(rho2, {s, 0.0, 0.0});
        for (std::size_t i = 0; i < shifted.size(); ++i)
            if (std::abs(rho1[i]) > support_tol && std::abs(shifted[i]) > support_tol)
                throw std::invalid_argument("decoupling_probe: supports overlap at separation " +
                                            std::to_string(s));
        GridFunction combined(spec, rho1.values() + shifted.values(), GridFunction::Tag::Real);
        const double f_comb = minimize_fcrys(combined, crystal, w, params).value;
        table.rows.push_back({s, f_comb, std::abs(f_comb - table.f1 - table.f2)});
    }
    return table;
}

} // namespace plab::response
