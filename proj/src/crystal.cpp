#include "plab/crystal.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include <json.hpp>

namespace plab::crystal {

namespace {

inline void multi_index(int dim, int n, std::size_t idx, int out[3]) {
    for (int ax = dim - 1; ax >= 0; --ax) {
        out[ax] = static_cast<int>(idx % static_cast<std::size_t>(n));
        idx /= static_cast<std::size_t>(n);
    }
}

// Unitary DFT matrix, rows indexed by wavevector, columns by grid point.
MatrixXcd dft_matrix(const LatticeSpec& spec) {
    const auto ks = grid::wavevectors(spec);
    const std::size_t n = spec.n_points();
    MatrixXcd u(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto x = grid::point_of(spec, c);
            const double phase = ks[r][0] * x[0] + ks[r][1] * x[1] + ks[r][2] * x[2];
            u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                scale * std::exp(grid::Complex(0.0, -phase));
        }
    }
    return u;
}

struct KineticKey {
    int dim;
    double a;
    int n_cell;
    int multiplier;
    double mass;
    auto operator<=>(const KineticKey&) const = default;
};

} // namespace

const MatrixXcd& kinetic_matrix(const LatticeSpec& spec, double mass) {
    static std::map<KineticKey, MatrixXcd> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    KineticKey key{spec.dim, spec.a, spec.n_cell, spec.multiplier, mass};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const MatrixXcd u = dft_matrix(spec);
    Eigen::VectorXd mult = grid::k_squared(spec) / (2.0 * mass);
    MatrixXcd k = u.adjoint() * mult.asDiagonal() * u;
    k = (k + k.adjoint()).eval() / 2.0;
    return cache.emplace(key, std::move(k)).first->second;
}

MatrixXcd hamiltonian(const LatticeSpec& spec, const GridFunction& v, double mass) {
    MatrixXcd h = kinetic_matrix(spec, mass);
    h.diagonal() += v.real_values().cast<grid::Complex>();
    return h;
}

GridFunction density_of_operator(const MatrixXcd& q, const LatticeSpec& spec) {
    GridFunction rho(spec, GridFunction::Tag::Real);
    const double w = spec.cell_weight();
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        rho[static_cast<std::size_t>(i)] = std::real(q(i, i)) / w;
    return rho;
}

Eigen::VectorXd multiplication_diagonal(const GridFunction& v) { return v.real_values(); }

NuclearDensity::NuclearDensity(std::vector<GaussianSite> sites) : sites_(std::move(sites)) {
    double z = 0.0;
    for (const auto& s : sites_) {
        if (!(s.sigma > 0.0)) throw std::invalid_argument("NuclearDensity: sigma must be positive");
        if (!(s.charge > 0.0)) throw std::invalid_argument("NuclearDensity: charge must be positive");
        z += s.charge;
    }
    z_ = static_cast<int>(std::round(z));
    if (std::abs(z - z_) > 1e-9 || z_ < 1)
        throw std::invalid_argument("NuclearDensity: total charge must be a positive integer");
}

GridFunction NuclearDensity::realize(const LatticeSpec& spec) const {
    GridFunction mu(spec, GridFunction::Tag::Real);
    for (const auto& site : sites_) {
        const int reach = static_cast<int>(std::ceil(6.0 * site.sigma / spec.a)) + 1;
        const double norm = site.charge / std::pow(2.0 * M_PI * site.sigma * site.sigma, spec.dim / 2.0);
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const auto x = grid::point_of(spec, i);
            // Sum over periodic images of the unit-cell lattice.
            double val = 0.0;
            const int n_img = spec.multiplier * (2 * reach + 1);
            if (spec.dim == 1) {
                for (int m0 = -n_img; m0 <= n_img; ++m0) {
                    const double dx = x[0] - site.center[0] - m0 * spec.a;
                    val += std::exp(-dx * dx / (2.0 * site.sigma * site.sigma));
                }
            } else {
                // Separable Gaussian: per-axis image sums multiply.
                val = 1.0;
                for (int ax = 0; ax < spec.dim; ++ax) {
                    double s = 0.0;
                    for (int m = -n_img; m <= n_img; ++m) {
                        const double dx = x[ax] - site.center[ax] - m * spec.a;
                        s += std::exp(-dx * dx / (2.0 * site.sigma * site.sigma));
                    }
                    val *= s;
                }
            }
            mu[i] += norm * val;
        }
    }
    // Renormalize after gridding so the cell integral is exactly Z.
    const double total = std::real(mu.integral());
    const double target = static_cast<double>(z_) * std::pow(spec.multiplier, spec.dim);
    mu.values() *= target / total;
    return mu;
}

GridFunction restrict_to_cell(const GridFunction& f) {
    const LatticeSpec& sp = f.spec();
    LatticeSpec cell(sp.dim, sp.a, sp.n_cell, 1);
    GridFunction out(cell, f.tag());
    const int n = sp.n_axis();
    const int nc = sp.n_cell;
    const double inv_copies = 1.0 / std::pow(sp.multiplier, sp.dim);
    for (std::size_t i = 0; i < f.size(); ++i) {
        int mi[3] = {0, 0, 0};
        multi_index(sp.dim, n, i, mi);
        std::size_t j = 0;
        for (int ax = 0; ax < sp.dim; ++ax)
            j = j * static_cast<std::size_t>(nc) + static_cast<std::size_t>(mi[ax] % nc);
        out[j] += inv_copies * f[i];
    }
    return out;
}

std::vector<std::array<double, 3>> commensurate_k_points(const LatticeSpec& spec) {
    const int m = spec.multiplier;
    const double dk = 2.0 * M_PI / spec.length();
    std::vector<int> freqs(m);
    for (int j = 0; j < m; ++j) freqs[j] = (j < m - m / 2) ? j : j - m;
    std::vector<std::array<double, 3>> ks;
    if (spec.dim == 1) {
        for (int j : freqs) ks.push_back({dk * j, 0.0, 0.0});
    } else if (spec.dim == 2) {
        for (int j0 : freqs)
            for (int j1 : freqs) ks.push_back({dk * j0, dk * j1, 0.0});
    } else {
        for (int j0 : freqs)
            for (int j1 : freqs)
                for (int j2 : freqs) ks.push_back({dk * j0, dk * j1, dk * j2});
    }
    return ks;
}

namespace {

MatrixXcd bloch_fiber(const GridFunction& v_cell, double mass, const std::array<double, 3>& k) {
    const LatticeSpec& cell = v_cell.spec();
    const MatrixXcd u = dft_matrix(cell);
    const auto gs = grid::wavevectors(cell);
    Eigen::VectorXd mult(static_cast<Eigen::Index>(gs.size()));
    for (std::size_t i = 0; i < gs.size(); ++i) {
        double kg2 = 0.0;
        for (int ax = 0; ax < cell.dim; ++ax) {
            const double kk = k[ax] + gs[i][ax];
            kg2 += kk * kk;
        }
        mult[static_cast<Eigen::Index>(i)] = kg2 / (2.0 * mass);
    }
    MatrixXcd h = u.adjoint() * mult.asDiagonal() * u;
    h = (h + h.adjoint()).eval() / 2.0;
    h.diagonal() += v_cell.real_values().cast<grid::Complex>();
    return h;
}

} // namespace

std::vector<std::vector<double>> band_structure(const GridFunction& v_supercell, double mass,
                                                const std::vector<std::array<double, 3>>& k_points) {
    const GridFunction v_cell = restrict_to_cell(v_supercell);
    std::vector<std::vector<double>> bands;
    bands.reserve(k_points.size());
    for (const auto& k : k_points) {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(bloch_fiber(v_cell, mass, k),
                                                     Eigen::EigenvaluesOnly);
        const auto& ev = eig.eigenvalues();
        bands.emplace_back(ev.data(), ev.data() + ev.size());
    }
    return bands;
}

std::pair<double, double> insulator_check(const std::vector<std::vector<double>>& bands, int z,
                                          double gap_tol) {
    double top = -std::numeric_limits<double>::infinity();
    double bottom = std::numeric_limits<double>::infinity();
    for (const auto& b : bands) {
        if (static_cast<int>(b.size()) <= z)
            throw std::invalid_argument("insulator_check: not enough bands");
        top = std::max(top, b[static_cast<std::size_t>(z - 1)]);
        bottom = std::min(bottom, b[static_cast<std::size_t>(z)]);
    }
    const double gap = bottom - top;
    if (gap <= gap_tol) throw InsulatorViolation(top, bottom);
    return {gap, 0.5 * (top + bottom)};
}

PolaronBand polaron_band(const GridFunction& v_supercell, double mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("polaron_band: mass must be positive");
    const GridFunction v_cell = restrict_to_cell(v_supercell);
    const auto ks = commensurate_k_points(v_supercell.spec());
    double best = std::numeric_limits<double>::infinity();
    std::array<double, 3> k_best{0.0, 0.0, 0.0};
    Eigen::VectorXcd vec_best;
    for (const auto& k : ks) {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(bloch_fiber(v_cell, mass, k));
        if (eig.eigenvalues()[0] < best) {
            best = eig.eigenvalues()[0];
            k_best = k;
            vec_best = eig.eigenvectors().col(0);
        }
    }
    const LatticeSpec& cell = v_cell.spec();
    GridFunction u(cell, vec_best / std::sqrt(cell.cell_weight()), GridFunction::Tag::Complex);
    // Fix the arbitrary global phase: make the largest-magnitude entry real
    // positive, for reproducibility.
    Eigen::Index imax;
    u.values().cwiseAbs().maxCoeff(&imax);
    const grid::Complex ph = u.values()[imax] / std::abs(u.values()[imax]);
    u.values() /= ph;
    const bool at_k0 = (k_best[0] == 0.0 && k_best[1] == 0.0 && k_best[2] == 0.0);
    return PolaronBand{best, std::move(u), at_k0, k_best};
}

MatrixXcd CrystalState::gamma0() const {
    const auto occ = eigenvectors.leftCols(n_occupied);
    return occ * occ.adjoint();
}

MatrixXcd CrystalState::h0_shifted() const {
    return eigenvectors *
           (eigenvalues.array() - fermi_level).matrix().asDiagonal().toDenseMatrix().cast<grid::Complex>() *
           eigenvectors.adjoint();
}

GridFunction CrystalState::u_per_on_supercell() const {
    GridFunction out(spec, GridFunction::Tag::Complex);
    const int n = spec.n_axis();
    const int nc = spec.n_cell;
    for (std::size_t i = 0; i < out.size(); ++i) {
        int mi[3] = {0, 0, 0};
        multi_index(spec.dim, n, i, mi);
        std::size_t j = 0;
        for (int ax = 0; ax < spec.dim; ++ax)
            j = j * static_cast<std::size_t>(nc) + static_cast<std::size_t>(mi[ax] % nc);
        out[i] = u_per[j];
    }
    out.values() /= std::sqrt(std::pow(spec.multiplier, spec.dim));
    return out;
}

CrystalState scf_solve(const NuclearDensity& mu, const LatticeSpec& spec,
                       const ScfParams& params, double polaron_mass) {
    if (!(params.mixing > 0.0 && params.mixing <= 1.0))
        throw std::invalid_argument("scf_solve: mixing must be in (0,1]");
    const CoulombKernel kernel = CoulombKernel::bare(spec);
    const GridFunction mu_grid = mu.realize(spec);
    const int nocc = mu.total_charge() * static_cast<int>(std::round(std::pow(spec.multiplier, spec.dim)));
    const MatrixXcd& kin = kinetic_matrix(spec, 1.0);

    // Uniform electron start: the first potential is the bare nuclear well.
    GridFunction rho = GridFunction::zero(spec);
    rho.values().setConstant(static_cast<double>(nocc) / spec.volume());
    double alpha = params.mixing;
    std::vector<double> energy_trace;
    std::vector<double> residual_trace;

    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig;
    GridFunction v = GridFunction::zero(spec);
    GridFunction rho_new = rho;
    bool converged = false;

    for (int iter = 0; iter < params.max_iter; ++iter) {
        GridFunction diff(spec, rho.values() - mu_grid.values(), GridFunction::Tag::Real);
        v = kernel.potential_of(diff);
        MatrixXcd h = kin;
        h.diagonal() += v.real_values().cast<grid::Complex>();
        eig.compute(h);
        const auto& ev = eig.eigenvalues();
        if (ev[nocc] - ev[nocc - 1] <= params.gap_tol)
            throw InsulatorViolation(ev[nocc - 1], ev[nocc]);

        const auto occ = eig.eigenvectors().leftCols(nocc);
        rho_new = GridFunction(spec, GridFunction::Tag::Real);
        for (Eigen::Index i = 0; i < occ.rows(); ++i)
            rho_new[static_cast<std::size_t>(i)] =
                occ.row(i).squaredNorm() / spec.cell_weight();

        // rHF energy of the current projector, for the monotonicity guard.
        double e_kin = 0.0;
        for (int c = 0; c < nocc; ++c)
            e_kin += std::real(occ.col(c).dot(kin * occ.col(c)));
        GridFunction dev(spec, rho_new.values() - mu_grid.values(), GridFunction::Tag::Real);
        const double energy = e_kin + 0.5 * kernel.d_pair(dev, dev);
        if (!energy_trace.empty() && energy > energy_trace.back() + 1e-12)
            alpha = std::max(alpha / 2.0, 1.0 / 64.0);
        energy_trace.push_back(energy);

        const double resid =
            GridFunction(spec, rho_new.values() - rho.values(), GridFunction::Tag::Real).norm() /
            std::pow(spec.multiplier, spec.dim);
        residual_trace.push_back(resid);
        if (resid < params.tol) {
            converged = true;
            break;
        }
        GridFunction step(spec, rho_new.values() - rho.values(), GridFunction::Tag::Real);
        if (params.kerker_q0 > 0.0) {
            GridFunction c = grid::fourier(step);
            const VectorXd k2 = grid::k_squared(spec);
            const double q0sq = params.kerker_q0 * params.kerker_q0;
            for (Eigen::Index i = 0; i < c.values().size(); ++i)
                c.values()[i] *= k2[i] / (k2[i] + q0sq);
            step = grid::inverse_fourier(c);
        }
        rho.values() += alpha * step.values();
    }
    if (!converged) throw ScfDivergence(std::move(residual_trace));

    // Final self-consistent pass: rebuild H from the output density and
    // measure the gamma fixed-point residual.
    GridFunction diff(spec, rho_new.values() - mu_grid.values(), GridFunction::Tag::Real);
    v = kernel.potential_of(diff);
    MatrixXcd h = kin;
    h.diagonal() += v.real_values().cast<grid::Complex>();
    const MatrixXcd gamma_prev = eig.eigenvectors().leftCols(nocc) *
                                 eig.eigenvectors().leftCols(nocc).adjoint();
    eig.compute(h);
    const auto& ev = eig.eigenvalues();
    if (ev[nocc] - ev[nocc - 1] <= params.gap_tol)
        throw InsulatorViolation(ev[nocc - 1], ev[nocc]);
    const MatrixXcd gamma_out = eig.eigenvectors().leftCols(nocc) *
                                eig.eigenvectors().leftCols(nocc).adjoint();
    const double gamma_residual = (gamma_out - gamma_prev).norm();

    CrystalState st{
        spec,
        mu.total_charge(),
        polaron_mass,
        v,
        density_of_operator(gamma_out, spec),
        mu_grid,
        0.5 * (ev[nocc - 1] + ev[nocc]),
        ev[nocc] - ev[nocc - 1],
        0.0,
        GridFunction::zero(LatticeSpec(spec.dim, spec.a, spec.n_cell, 1)),
        true,
        ev,
        eig.eigenvectors(),
        nocc,
        gamma_residual,
        std::move(energy_trace),
    };
    PolaronBand pb = polaron_band(v, polaron_mass);
    st.e_per = pb.e_per;
    st.u_per = std::move(pb.u_per);
    st.band_minimum_at_k0 = pb.minimum_at_k0;
    return st;
}

namespace {

void write_blob(std::ofstream& out, const void* data, std::size_t bytes) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_blob(std::ifstream& in, void* data, std::size_t bytes) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("crystal cache: short read");
}

} // namespace

void save_crystal(const CrystalState& st, const std::string& path, const std::string& config_hash) {
    nlohmann::json header = {
        {"d", st.spec.dim},           {"a", st.spec.a},
        {"n_c", st.spec.n_cell},      {"M", st.spec.multiplier},
        {"Z", st.z},                  {"m", st.mass},
        {"fermi_level", st.fermi_level}, {"gap", st.gap},
        {"E_per", st.e_per},          {"scf_residual", st.scf_residual},
        {"band_minimum_at_k0", st.band_minimum_at_k0},
        {"n_occupied", st.n_occupied},
        {"config_hash", config_hash},
        {"code_version", 1},
    };
    std::ofstream js(path + ".json");
    js << header.dump(2) << "\n";
    std::ofstream bin(path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("save_crystal: cannot open " + path + ".bin");
    const std::size_t n = st.spec.n_points();
    write_blob(bin, st.v0.values().data(), n * 2 * sizeof(double));
    write_blob(bin, st.rho0.values().data(), n * 2 * sizeof(double));
    write_blob(bin, st.mu0.values().data(), n * 2 * sizeof(double));
    const std::size_t ncell = st.u_per.spec().n_points();
    write_blob(bin, st.u_per.values().data(), ncell * 2 * sizeof(double));
    write_blob(bin, st.eigenvalues.data(), n * sizeof(double));
    write_blob(bin, st.eigenvectors.data(), n * n * 2 * sizeof(double));
}

std::optional<CrystalState> load_crystal(const std::string& path, const std::string& config_hash) {
    std::ifstream js(path + ".json");
    if (!js) return std::nullopt;
    nlohmann::json header = nlohmann::json::parse(js, nullptr, false);
    if (header.is_discarded()) return std::nullopt;
    if (header.value("config_hash", std::string()) != config_hash) return std::nullopt;
    LatticeSpec spec(header.at("d").get<int>(), header.at("a").get<double>(),
                     header.at("n_c").get<int>(), header.at("M").get<int>());
    LatticeSpec cell(spec.dim, spec.a, spec.n_cell, 1);
    std::ifstream bin(path + ".bin", std::ios::binary);
    if (!bin) return std::nullopt;
    const std::size_t n = spec.n_points();
    CrystalState st{
        spec,
        header.at("Z").get<int>(),
        header.at("m").get<double>(),
        GridFunction::zero(spec),
        GridFunction::zero(spec),
        GridFunction::zero(spec),
        header.at("fermi_level").get<double>(),
        header.at("gap").get<double>(),
        header.at("E_per").get<double>(),
        GridFunction::zero(cell, GridFunction::Tag::Complex),
        header.at("band_minimum_at_k0").get<bool>(),
        VectorXd(static_cast<Eigen::Index>(n)),
        MatrixXcd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
        header.at("n_occupied").get<int>(),
        header.at("scf_residual").get<double>(),
        {},
    };
    try {
        read_blob(bin, st.v0.values().data(), n * 2 * sizeof(double));
        read_blob(bin, st.rho0.values().data(), n * 2 * sizeof(double));
        read_blob(bin, st.mu0.values().data(), n * 2 * sizeof(double));
        read_blob(bin, st.u_per.values().data(), cell.n_points() * 2 * sizeof(double));
        read_blob(bin, st.eigenvalues.data(), n * sizeof(double));
        read_blob(bin, st.eigenvectors.data(), n * n * 2 * sizeof(double));
    } catch (const std::runtime_error&) {
        return std::nullopt;
    }
    return st;
}

} // namespace plab::crystal
