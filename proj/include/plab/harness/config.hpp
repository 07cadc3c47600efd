#pragma once

#include <nlohmann/json.hpp>

#include "plab/crystal.hpp"
#include "plab/response.hpp"

namespace plab::harness {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minimal TOML reader covering the config surface: [section], [[list]],
/// key = string | number | boolean | homogeneous array, # comments.
json parse_toml(const std::string& text);
json parse_toml_file(const std::string& path);

struct ExperimentConfig {
    std::string preset;            // empty when fully explicit
    std::string experiment = "exp-crystal";
    unsigned long long seed = 1234;
    std::string out_dir = "results";

    grid::LatticeSpec spec;
    std::vector<crystal::GaussianSite> sites;
    double mass = 1.0;
    std::string kernel = "bare";   // "bare" | "yukawa"
    double screening = 1.0;

    crystal::ScfParams scf;
    response::ResponseParams response;
    double outer_tol = 1e-7;
    int max_outer = 300;
    int n_particles = 2;
    std::string statistics = "fermionic";
    bool disable_interaction = false;
    bool disable_response = false;

    json params;  // per-experiment extras (r_list, lambda_list, ...)

    json to_json() const;
    std::string to_toml() const;
    static ExperimentConfig from_json(const json& j);

    coulomb::CoulombKernel make_kernel() const;
    crystal::NuclearDensity nuclear() const;

    std::vector<double> param_list(const std::string& key,
                                   const std::vector<double>& fallback) const;
    double param_num(const std::string& key, double fallback) const;
};

/// Loads a TOML config; a `preset` key seeds defaults which explicit keys
/// then override.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_toml(const std::string& text);

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

/// FNV-1a over the canonical (key-sorted) JSON dump.
std::string config_hash(const ExperimentConfig& cfg);
std::string fnv1a_hex(const std::string& bytes);

} // namespace plab::harness
