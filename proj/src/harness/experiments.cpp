#include "plab/harness/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "plab/localization.hpp"
#include "plab/pekar.hpp"
#include "plab/polaron.hpp"

namespace plab::harness {

namespace fs = std::filesystem;
using grid::GridFunction;
using grid::LatticeSpec;

std::string code_version() { return "polaron-lab 0.1.0"; }

json ExperimentRecord::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["wall_seconds"] = wall_seconds;
    j["results"] = results;
    j["all_passed"] = all_passed;
    j["error"] = error;
    j["properties"] = json::array();
    for (const auto& p : properties)
        j["properties"].push_back({{"name", p.name},
                                   {"relation", p.relation},
                                   {"passed", p.passed},
                                   {"value", p.value},
                                   {"threshold", p.threshold}});
    j["artifacts"] = json::array();
    for (const auto& a : artifacts) j["artifacts"].push_back({{"path", a.path}, {"hash", a.hash}});
    return j;
}

ExperimentRecord ExperimentRecord::from_json(const json& j) {
    ExperimentRecord r;
    r.experiment = j.value("experiment", "");
    r.config_hash = j.value("config_hash", "");
    r.code_version = j.value("code_version", "");
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.results = j.value("results", json::object());
    r.all_passed = j.value("all_passed", false);
    r.error = j.value("error", "");
    for (const auto& p : j.value("properties", json::array()))
        r.properties.push_back({p.value("name", ""), p.value("relation", ""),
                                p.value("passed", false), p.value("value", 0.0),
                                p.value("threshold", 0.0)});
    for (const auto& a : j.value("artifacts", json::array()))
        r.artifacts.push_back({a.value("path", ""), a.value("hash", "")});
    return r;
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

void write_csv(ExperimentRecord& record, const std::string& dir, const std::string& name,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << fmt(row[i]);
        out << '\n';
    }
    out.close();
    record.artifacts.push_back({path, file_hash(path)});
}

void add_property(ExperimentRecord& record, const std::string& name, const std::string& relation,
                  bool passed, double value, double threshold) {
    record.properties.push_back({name, relation, passed, value, threshold});
    record.all_passed = record.all_passed && passed;
}

std::string crystal_hash(const ExperimentConfig& cfg) {
    json j = cfg.to_json();
    json reduced;
    reduced["lattice"] = j["lattice"];
    reduced["site"] = j["site"];
    reduced["scf"] = j["scf"];
    reduced["mass"] = cfg.mass;
    reduced["kernel"] = cfg.kernel;
    reduced["screening"] = cfg.screening;
    return fnv1a_hex(reduced.dump());
}

std::string resolve_cache_root(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (!opts.cache_root.empty()) return opts.cache_root;
    if (const char* env = std::getenv("POLARON_LAB_CACHE")) return env;
    return cfg.out_dir + "/cache";
}

GridFunction gaussian_density(const LatticeSpec& spec, const std::array<double, 3>& center,
                              double sigma, double mass_total) {
    GridFunction rho(spec, GridFunction::Tag::Real);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = grid::torus_distance(spec, grid::point_of(spec, i), center);
        rho[i] = std::exp(-r * r / (2.0 * sigma * sigma));
    }
    const double total = std::real(rho.integral());
    if (total > 0.0) rho.values() *= mass_total / total;
    return rho;
}

// Compactly supported cos^2 bump of unit mass; exact zeros outside `radius`.
GridFunction compact_bump(const LatticeSpec& spec, const std::array<double, 3>& center,
                          double radius, double mass_total) {
    GridFunction rho(spec, GridFunction::Tag::Real);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = grid::torus_distance(spec, grid::point_of(spec, i), center);
        if (r < radius) {
            const double c = std::cos(M_PI * r / (2.0 * radius));
            rho[i] = c * c;
        }
    }
    const double total = std::real(rho.integral());
    if (total > 0.0) rho.values() *= mass_total / total;
    return rho;
}

// ---- individual experiments -------------------------------------------------

void exp_crystal(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                 ExperimentRecord& record) {
    const auto ks = crystal::commensurate_k_points(cfg.spec);
    const auto bands = crystal::band_structure(st.v0, 1.0, ks);

    record.results["e_per"] = st.e_per;
    record.results["gap"] = st.gap;
    record.results["fermi_level"] = st.fermi_level;
    record.results["scf_residual"] = st.scf_residual;
    record.results["band_minimum_at_k0"] = st.band_minimum_at_k0;

    const Eigen::MatrixXcd g = st.gamma0();
    const double idem = (g * g - g).norm();
    add_property(record, "gamma0-idempotent", "||g^2 - g||_F <= 1e-8", idem <= 1e-8, idem, 1e-8);
    const double tr = std::real(g.trace());
    const double tr_target = static_cast<double>(st.n_occupied);
    add_property(record, "gamma0-electron-count", "Tr g = Z M^d", std::abs(tr - tr_target) <= 1e-8,
                 tr, tr_target);
    const double vmean = std::abs(std::real(st.v0.integral())) / st.v0.spec().volume();
    add_property(record, "v0-zero-mean", "mean V0 = 0", vmean <= 1e-10, vmean, 1e-10);
    add_property(record, "positive-gap", "gap > gap_tol", st.gap > cfg.scf.gap_tol, st.gap,
                 cfg.scf.gap_tol);

    std::vector<std::vector<double>> rows;
    const std::size_t n_bands = std::min<std::size_t>(bands.front().size(), 6);
    std::vector<std::string> header{"k"};
    for (std::size_t b = 0; b < n_bands; ++b) header.push_back("band" + std::to_string(b + 1));
    for (std::size_t i = 0; i < ks.size(); ++i) {
        std::vector<double> row{ks[i][0]};
        for (std::size_t b = 0; b < n_bands; ++b) row.push_back(bands[i][b]);
        rows.push_back(row);
    }
    write_csv(record, cfg.out_dir, "bands.csv", header, rows);
}

void exp_fcrys_props(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                     ExperimentRecord& record) {
    const auto w = cfg.make_kernel();
    std::mt19937_64 rng(cfg.seed);
    const int n_random = static_cast<int>(cfg.param_num("n_random", 12));

    auto fcrys = [&](const GridFunction& nu) {
        return response::minimize_fcrys(nu, st, w, cfg.response);
    };

    double worst_bracket = 0.0, worst_conc = 0.0, worst_lip = 0.0, worst_trans = 0.0;
    double gap_tol_seen = 0.0;
    bool bracket_ok = true, conc_ok = true, lip_ok = true, trans_ok = true, strict_ok = true;
    int strict_tested = 0;
    for (int i = 0; i < n_random; ++i) {
        const GridFunction nu = random_density(cfg.spec, rng);
        const auto res = fcrys(nu);
        gap_tol_seen = std::max(gap_tol_seen, res.gap_tol_used);
        const double d_self = w.d_pair(nu, nu);
        const double lower = -0.5 * d_self - 2.0 * res.gap_tol_used;
        bracket_ok = bracket_ok && res.value >= lower && res.value <= 1e-12;
        worst_bracket = std::max(worst_bracket, std::max(lower - res.value, res.value));

        // Concavity on a random pair.
        const GridFunction nu2 = random_density(cfg.spec, rng);
        const auto res2 = fcrys(nu2);
        const double theta = 0.25 + 0.25 * static_cast<double>(i % 3);
        GridFunction mix(cfg.spec, theta * nu.values() + (1.0 - theta) * nu2.values(),
                         GridFunction::Tag::Real);
        const auto resm = fcrys(mix);
        const double slack = resm.value - theta * res.value - (1.0 - theta) * res2.value;
        conc_ok = conc_ok && slack >= -2.0 * resm.gap_tol_used;
        worst_conc = std::min(worst_conc, slack);

        // Coulomb-Lipschitz on the same pair.
        GridFunction diff(cfg.spec, nu.values() - nu2.values(), GridFunction::Tag::Real);
        const double bound = 0.5 * w.d_pair(diff, diff) + 2.0 * res.gap_tol_used;
        const double dev = std::abs(res.value - res2.value);
        lip_ok = lip_ok && dev <= bound;
        worst_lip = std::max(worst_lip, dev - bound);

        // Strict concavity at the origin when the value is comfortably negative.
        if (res.value < -10.0 * res.gap_tol_used && strict_tested < 10) {
            ++strict_tested;
            GridFunction half(cfg.spec, 0.5 * nu.values(), GridFunction::Tag::Real);
            const auto resh = fcrys(half);
            strict_ok = strict_ok && resh.value - 0.5 * res.value > resh.gap_tol_used;
        }

        // Translation invariance.
        if (i < 6) {
            const double tau = (i % 2 == 0) ? cfg.spec.a : 3.0 * cfg.spec.a;
            const GridFunction shifted = grid::translate(nu, {tau, 0.0, 0.0});
            const auto rest = fcrys(shifted);
            const double tdev = std::abs(rest.value - res.value);
            trans_ok = trans_ok && tdev <= 2.0 * res.gap_tol_used;
            worst_trans = std::max(worst_trans, tdev);
        }
    }
    record.results["n_random"] = n_random;
    record.results["gap_tol_used"] = gap_tol_seen;
    add_property(record, "bracket", "-D(v,v)/2 - slack <= F[v] <= 0", bracket_ok, worst_bracket,
                 2.0 * gap_tol_seen);
    add_property(record, "concavity", "F[mix] >= mix of F - slack", conc_ok, worst_conc,
                 -2.0 * gap_tol_seen);
    add_property(record, "strict-concavity-origin", "F[v/2] - F[v]/2 > gap_tol", strict_ok,
                 static_cast<double>(strict_tested), 0.0);
    add_property(record, "coulomb-lipschitz", "|F[a]-F[b]| <= D(a-b,a-b)/2 + slack", lip_ok,
                 worst_lip, 0.0);
    add_property(record, "translation-invariance", "F[shift v] = F[v]", trans_ok, worst_trans,
                 2.0 * gap_tol_seen);
}

void exp_decoupling(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                    ExperimentRecord& record) {
    const auto w = cfg.make_kernel();
    const double radius = cfg.param_num("bump_radius", 0.9);
    const std::vector<double> s_list = cfg.param_list("s_list", {2.0, 4.0, 8.0, 16.0});
    const double L = cfg.spec.length();
    const GridFunction rho1 = compact_bump(cfg.spec, {L / 4.0, 0.0, 0.0}, radius, 1.0);
    const GridFunction rho2 = compact_bump(cfg.spec, {L / 4.0, 0.0, 0.0}, radius, 1.0);
    const auto table = response::decoupling_probe(rho1, rho2, s_list, st, w, cfg.response);

    std::vector<std::vector<double>> rows;
    bool decreasing = true;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        rows.push_back({table.rows[i].separation, table.rows[i].delta, table.rows[i].f_combined});
        if (i > 0) decreasing = decreasing && table.rows[i].delta <= table.rows[i - 1].delta;
    }
    write_csv(record, cfg.out_dir, "decoupling.csv", {"s", "delta", "f_combined"}, rows);
    record.results["f1"] = table.f1;
    record.results["f2"] = table.f2;
    add_property(record, "delta-decreasing", "delta(s) nonincreasing", decreasing,
                 table.rows.back().delta, table.rows.front().delta);
    add_property(record, "delta-far-small", "delta(s_max) < 0.2 delta(s_min)",
                 table.rows.back().delta < 0.2 * table.rows.front().delta,
                 table.rows.back().delta, 0.2 * table.rows.front().delta);
}

void exp_localization(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                      ExperimentRecord& record) {
    const auto w = cfg.make_kernel();
    const std::vector<double> r_list = cfg.param_list("r_list", {2.0, 4.0, 8.0, 16.0});
    const double L = cfg.spec.length();
    std::array<double, 3> center{};
    for (int ax = 0; ax < cfg.spec.dim; ++ax) center[ax] = L / 2.0;
    // Heavy-tailed source by default: a Gaussian-driven response decays so
    // fast that the density and kinetic localization errors collapse onto the
    // same super-polynomial rate and their slope separation washes out. A
    // r^-1.5 tail keeps the density error on a slow power law while the
    // kinetic error still gains the extra gradient factor on the R sweep.
    const std::string profile =
        cfg.params.contains("nu_profile") ? cfg.params["nu_profile"].get<std::string>()
                                          : "powerlaw";
    const double width = cfg.param_num("bump_sigma", 1.0);
    GridFunction nu(cfg.spec, GridFunction::Tag::Real);
    if (profile == "gaussian") {
        nu = gaussian_density(cfg.spec, center, width, 1.0);
    } else if (profile == "powerlaw") {
        for (std::size_t i = 0; i < nu.size(); ++i) {
            const double r = grid::torus_distance(cfg.spec, grid::point_of(cfg.spec, i), center);
            nu[i] = std::pow(1.0 + (r / width) * (r / width), -0.75);
        }
        nu.values() /= std::real(nu.integral());
    } else {
        throw ConfigError("exp-localization: unknown nu_profile " + profile);
    }
    const auto res = response::minimize_fcrys(nu, st, w, cfg.response);
    const auto report = localization::localization_error_report(*res.minimizer, st, w, r_list,
                                                                center);

    std::vector<std::vector<double>> rows;
    for (const auto& row : report.rows)
        rows.push_back({row.radius, row.e_rho, row.e_kin, row.n_bound});
    write_csv(record, cfg.out_dir, "localization.csv", {"R", "e_rho", "e_kin", "n_bound"}, rows);
    record.results["slope_rho"] = report.slope_rho;
    record.results["slope_kin"] = report.slope_kin;
    record.results["q_norm"] = report.q_norm_q;
    add_property(record, "rho-error-decay", "slope(e_rho) <= -0.5", report.slope_rho <= -0.5,
                 report.slope_rho, -0.5);
    add_property(record, "kinetic-error-decay", "slope(e_kin) <= slope(e_rho) - 0.5",
                 report.slope_kin <= report.slope_rho - 0.5, report.slope_kin,
                 report.slope_rho - 0.5);
}

void exp_e1(const ExperimentConfig& cfg, const crystal::CrystalState& st,
            ExperimentRecord& record, const RunOptions& opts) {
    const auto w = cfg.make_kernel();
    polaron::PolaronParams params;
    params.outer_tol = cfg.outer_tol;
    params.max_outer = cfg.max_outer;
    params.response = cfg.response;
    params.disable_response = cfg.disable_response;

    const auto result = polaron::minimize_e1(st, w, params);
    record.results["e1"] = result.energy;
    record.results["e_per"] = st.e_per;
    record.results["margin"] = st.e_per - result.energy;
    record.results["outer_iterations"] = result.outer_iterations;
    record.results["eigen_residual"] = result.eigen_residual;
    record.results["final_gap"] = result.final_gap;

    bool monotone = true;
    for (std::size_t i = 1; i < result.outer_trace.size(); ++i)
        monotone = monotone &&
                   result.outer_trace[i] <= result.outer_trace[i - 1] + 2.0 * cfg.outer_tol;
    add_property(record, "bound-below-eper", "E(1) < E_per - 10 outer_tol",
                 result.energy < st.e_per - 10.0 * cfg.outer_tol, result.energy,
                 st.e_per - 10.0 * cfg.outer_tol);
    add_property(record, "outer-trace-monotone", "outer energies nonincreasing", monotone,
                 static_cast<double>(result.outer_trace.size()), 0.0);
    add_property(record, "eigen-residual", "residual <= 1e-6", result.eigen_residual <= 1e-6,
                 result.eigen_residual, 1e-6);

    grid::save_grid_function(result.rho, cfg.out_dir + "/e1_rho.bin");
    record.artifacts.push_back({cfg.out_dir + "/e1_rho.bin", file_hash(cfg.out_dir + "/e1_rho.bin")});

    // Trial-state lambda sweep.
    const std::vector<double> lambda_list = cfg.param_list("lambda_list", {2.0, 3.0, 4.0});
    const double support = cfg.param_num("support_radius", 2.0);
    auto chi = [](double r) { return std::exp(-r * r / 2.0); };
    auto leg = [&](double lam) {
        const auto trial = polaron::trial_lambda(st, chi, lam, support);
        const auto e = polaron::energy_single(trial, st, w, cfg.response);
        return e.total();
    };
    std::vector<double> energies(lambda_list.size());
    if (opts.jobs > 1) {
        std::vector<std::future<double>> futs;
        for (double lam : lambda_list)
            futs.push_back(std::async(std::launch::async, leg, lam));
        for (std::size_t i = 0; i < futs.size(); ++i) energies[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < lambda_list.size(); ++i) energies[i] = leg(lambda_list[i]);
    }
    std::vector<std::vector<double>> rows;
    bool trial_above = true;
    for (std::size_t i = 0; i < lambda_list.size(); ++i) {
        rows.push_back({lambda_list[i], energies[i],
                        lambda_list[i] * (energies[i] - st.e_per)});
        trial_above = trial_above && energies[i] >= result.energy - 10.0 * cfg.outer_tol;
    }
    write_csv(record, cfg.out_dir, "lambda_sweep.csv", {"lambda", "e_trial", "scaled_excess"},
              rows);
    add_property(record, "trial-above-minimum", "E(1) <= energy of every trial", trial_above,
                 result.energy, 0.0);
}

void exp_binding(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                 ExperimentRecord& record) {
    const auto w = cfg.make_kernel();
    polaron::PolaronParams params;
    params.outer_tol = cfg.outer_tol;
    params.max_outer = cfg.max_outer;
    params.response = cfg.response;
    params.disable_response = cfg.disable_response;
    params.disable_interaction = cfg.disable_interaction;

    const auto report = polaron::binding_report(cfg.n_particles, st, w, params);
    std::vector<std::vector<double>> rows;
    bool upper_ok = true;
    for (const auto& row : report.rows) {
        rows.push_back({static_cast<double>(row.k), row.e_k, row.e_nmk, row.sum, report.e_n,
                        row.satisfied ? 1.0 : 0.0});
        upper_ok = upper_ok && row.large_ok;
    }
    write_csv(record, cfg.out_dir, "binding.csv", {"k", "e_k", "e_nmk", "sum", "e_n", "strict"},
              rows);
    record.results["e_n"] = report.e_n;
    record.results["n"] = report.n;
    record.results["all_strict"] = report.all_satisfied;  // reported, never asserted
    add_property(record, "binding-upper", "E(N) <= E(k) + E(N-k) + finite-size slack",
                 upper_ok, report.e_n, 0.0);
}

void exp_macrolimit(const ExperimentConfig& cfg, const crystal::CrystalState& st,
                    ExperimentRecord& record) {
    const auto w = cfg.make_kernel();
    // The useful window sits near the knee lambda ~ L/2pi where the dilated
    // profile starts to lose its k_min weight; far below it |F| is flat, far
    // above it decays faster than 1/lambda and the fit turns unreliable.
    const std::vector<double> lambda_list = cfg.param_list("lambda_list", {6.0, 8.0, 10.0});
    auto chi = [](double r) { return std::exp(-r * r / 2.0); };
    const auto fit = pekar::extract_epsilon(st, chi, lambda_list, w, cfg.response);

    std::vector<std::vector<double>> rows;
    for (const auto& [lam, f] : fit.table) rows.push_back({lam, f, lam * f});
    write_csv(record, cfg.out_dir, "epsilon_sweep.csv", {"lambda", "f_crys", "lambda_f"}, rows);
    record.results["epsilon_fit"] = fit.epsilon;
    record.results["c_fit"] = fit.c;
    record.results["slope_fit"] = fit.slope;
    add_property(record, "scaling-exponent", "log-log slope in [-1.3, -0.7]",
                 fit.slope >= -1.3 && fit.slope <= -0.7, fit.slope, -1.0);
    add_property(record, "epsilon-above-one", "eps_fit > 1", fit.epsilon > 1.0, fit.epsilon, 1.0);

    // Synthetic round trip at a known dielectric constant.
    const double eps_true = 3.0;
    const double lam_ref = lambda_list.back();
    const GridFunction rho_ref = pekar::dilated_profile_density(cfg.spec, chi, lam_ref);
    const double c_true = lam_ref * pekar::fp_effective(rho_ref, pekar::DielectricModel::scalar(eps_true));
    std::vector<std::pair<double, double>> synth;
    for (double lam : lambda_list) synth.emplace_back(lam, c_true / lam);
    const auto round_trip = pekar::fit_epsilon_from_table(synth, rho_ref, lam_ref);
    add_property(record, "synthetic-round-trip", "|eps_fit - eps_true| <= 1e-6",
                 std::abs(round_trip.epsilon - eps_true) <= 1e-6, round_trip.epsilon, eps_true);
}

void exp_choquard(const ExperimentConfig& cfg, ExperimentRecord& record) {
    const double eps = cfg.param_num("epsilon", 2.0);
    pekar::ChoquardParams params;
    params.max_iter = static_cast<int>(cfg.param_num("max_iter", 3000));
    const auto result =
        pekar::choquard_solve(pekar::DielectricModel::scalar(eps), cfg.mass, cfg.spec, params);

    record.results["energy"] = result.energy;
    record.results["iterations"] = result.iterations;
    bool monotone = true;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < result.energy_trace.size(); ++i) {
        rows.push_back({static_cast<double>(i), result.energy_trace[i]});
        if (i > 0) monotone = monotone && result.energy_trace[i] <= result.energy_trace[i - 1];
    }
    write_csv(record, cfg.out_dir, "choquard_trace.csv", {"iter", "energy"}, rows);
    add_property(record, "descent-monotone", "energy trace nonincreasing", monotone,
                 result.energy, 0.0);

    // Minimality against a family of Gaussian trials.
    bool below_trials = true;
    for (double sigma : {cfg.spec.length() / 16.0, cfg.spec.length() / 8.0, cfg.spec.length() / 4.0}) {
        GridFunction psi(cfg.spec, GridFunction::Tag::Complex);
        std::array<double, 3> center{};
        for (int ax = 0; ax < cfg.spec.dim; ++ax) center[ax] = cfg.spec.length() / 2.0;
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double r = grid::torus_distance(cfg.spec, grid::point_of(cfg.spec, i), center);
            psi[i] = std::exp(-r * r / (2.0 * sigma * sigma));
        }
        polaron::SingleState trial{std::move(psi), cfg.mass};
        trial.normalize();
        below_trials = below_trials &&
                       result.energy <= pekar::pekar_energy(trial, pekar::DielectricModel::scalar(eps)) + 1e-9;
    }
    add_property(record, "below-gaussian-trials", "E <= Pekar energy of Gaussian trials",
                 below_trials, result.energy, 0.0);
}

} // namespace

GridFunction random_density(const LatticeSpec& spec, std::mt19937_64& rng, int n_bumps) {
    std::uniform_real_distribution<double> pos(0.0, spec.length());
    std::uniform_real_distribution<double> width(0.4, 1.2);
    std::uniform_real_distribution<double> amp(0.5, 1.5);
    GridFunction rho = GridFunction::zero(spec);
    for (int b = 0; b < n_bumps; ++b) {
        std::array<double, 3> center{};
        for (int ax = 0; ax < spec.dim; ++ax) center[ax] = pos(rng);
        const double sigma = width(rng);
        const double a = amp(rng);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            const double r = grid::torus_distance(spec, grid::point_of(spec, i), center);
            rho[i] += a * std::exp(-r * r / (2.0 * sigma * sigma));
        }
    }
    const double total = std::real(rho.integral());
    rho.values() /= total;
    return rho;
}

GridFunction random_signed_density(const LatticeSpec& spec, std::mt19937_64& rng) {
    GridFunction a = random_density(spec, rng);
    GridFunction b = random_density(spec, rng);
    return GridFunction(spec, a.values() - b.values(), GridFunction::Tag::Real);
}

crystal::CrystalState solve_or_load_crystal(const ExperimentConfig& cfg, const RunOptions& opts) {
    const std::string hash = crystal_hash(cfg);
    const std::string root = resolve_cache_root(cfg, opts);
    const std::string path = root + "/crystal-" + hash + ".json";
    if (opts.use_cache) {
        if (auto cached = crystal::load_crystal(path, hash)) return *std::move(cached);
    }
    crystal::CrystalState st = crystal::scf_solve(cfg.nuclear(), cfg.spec, cfg.scf, cfg.mass);
    if (opts.use_cache) {
        fs::create_directories(root);
        crystal::save_crystal(st, path, hash);
    }
    return st;
}

ExperimentRecord run(const ExperimentConfig& cfg, const RunOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(cfg.out_dir);

    ExperimentRecord record;
    record.experiment = cfg.experiment;
    record.config_hash = config_hash(cfg);
    record.code_version = code_version();

    try {
        if (cfg.experiment == "exp-choquard") {
            exp_choquard(cfg, record);
        } else {
            const crystal::CrystalState st = solve_or_load_crystal(cfg, opts);
            if (cfg.experiment == "exp-crystal") exp_crystal(cfg, st, record);
            else if (cfg.experiment == "exp-fcrys-props") exp_fcrys_props(cfg, st, record);
            else if (cfg.experiment == "exp-decoupling") exp_decoupling(cfg, st, record);
            else if (cfg.experiment == "exp-localization") exp_localization(cfg, st, record);
            else if (cfg.experiment == "exp-e1") exp_e1(cfg, st, record, opts);
            else if (cfg.experiment == "exp-binding") exp_binding(cfg, st, record);
            else if (cfg.experiment == "exp-macrolimit") exp_macrolimit(cfg, st, record);
            else throw ConfigError("unknown experiment: " + cfg.experiment);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const crystal::InsulatorViolation& e) {
        record.error = std::string("InsulatorViolation: ") + e.what();
        record.results["band_below"] = e.band_below;
        record.results["band_above"] = e.band_above;
        record.all_passed = false;
    } catch (const std::exception& e) {
        record.error = e.what();
        record.all_passed = false;
    }

    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const auto scripts = emit_plots(record, cfg.out_dir);
    for (const auto& s : scripts) record.artifacts.push_back({s, file_hash(s)});

    {
        std::ofstream out(cfg.out_dir + "/record.json");
        out << record.to_json().dump(2) << '\n';
    }
    return record;
}

std::vector<std::string> emit_plots(const ExperimentRecord& record, const std::string& out_dir) {
    std::vector<std::string> scripts;
    auto has_csv = [&](const std::string& name) {
        for (const auto& a : record.artifacts)
            if (a.path.size() >= name.size() &&
                a.path.compare(a.path.size() - name.size(), name.size(), name) == 0)
                return true;
        return false;
    };
    auto emit = [&](const std::string& stem, const std::string& body) {
        const std::string path = out_dir + "/" + stem + ".gp";
        std::ofstream out(path);
        out << "set terminal pngcairo size 900,600\n"
            << "set output '" << stem << ".png'\n"
            << body;
        scripts.push_back(path);
    };
    if (has_csv("bands.csv"))
        emit("bands",
             "set datafile separator ','\nset xlabel 'k'\nset ylabel 'energy'\n"
             "plot for [b=2:7] 'bands.csv' using 1:b with linespoints title columnheader(b)\n");
    if (has_csv("decoupling.csv"))
        emit("decoupling",
             "set datafile separator ','\nset logscale xy\nset xlabel 's'\nset ylabel 'delta'\n"
             "plot 'decoupling.csv' using 1:2 with linespoints title 'delta(s)'\n");
    if (has_csv("localization.csv"))
        emit("localization",
             "set datafile separator ','\nset logscale xy\nset xlabel 'R'\n"
             "plot 'localization.csv' using 1:2 with linespoints title 'e_rho', "
             "'localization.csv' using 1:3 with linespoints title 'e_kin'\n");
    if (has_csv("lambda_sweep.csv"))
        emit("lambda_sweep",
             "set datafile separator ','\nset xlabel 'lambda'\nset ylabel 'lambda*(E-E_per)'\n"
             "plot 'lambda_sweep.csv' using 1:3 with linespoints title 'scaled excess'\n");
    if (has_csv("epsilon_sweep.csv"))
        emit("epsilon_sweep",
             "set datafile separator ','\nset xlabel 'lambda'\nset ylabel 'lambda*F'\n"
             "plot 'epsilon_sweep.csv' using 1:3 with linespoints title 'lambda F'\n");
    if (has_csv("binding.csv"))
        emit("binding",
             "set datafile separator ','\nset xlabel 'k'\nset ylabel 'energy'\n"
             "plot 'binding.csv' using 1:4 with points title 'E(k)+E(N-k)', "
             "'binding.csv' using 1:5 with lines title 'E(N)'\n");
    if (has_csv("choquard_trace.csv"))
        emit("choquard_trace",
             "set datafile separator ','\nset xlabel 'iteration'\nset ylabel 'energy'\n"
             "plot 'choquard_trace.csv' using 1:2 with lines title 'descent'\n");
    return scripts;
}

std::vector<std::string> verify_record(const std::string& record_path) {
    std::ifstream in(record_path);
    if (!in) throw ConfigError("cannot open record: " + record_path);
    json j;
    in >> j;
    const ExperimentRecord record = ExperimentRecord::from_json(j);
    std::vector<std::string> mismatches;
    for (const auto& a : record.artifacts) {
        if (!fs::exists(a.path)) {
            mismatches.push_back(a.path + " (missing)");
            continue;
        }
        if (file_hash(a.path) != a.hash) mismatches.push_back(a.path + " (hash mismatch)");
    }
    return mismatches;
}

} // namespace plab::harness
