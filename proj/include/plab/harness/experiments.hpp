#pragma once

#include <random>

#include "plab/harness/config.hpp"

namespace plab::harness {

struct PropertyResult {
    std::string name;
    std::string relation;  // the inequality or identity being checked
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

struct Artifact {
    std::string path;
    std::string hash;  // FNV-1a of the file bytes
};

struct ExperimentRecord {
    std::string experiment;
    std::string config_hash;
    std::string code_version;
    double wall_seconds = 0.0;
    json results;
    std::vector<PropertyResult> properties;
    std::vector<Artifact> artifacts;
    bool all_passed = true;
    std::string error;  // nonempty when a module error aborted the run

    json to_json() const;
    static ExperimentRecord from_json(const json& j);
};

struct RunOptions {
    bool use_cache = true;
    int jobs = 1;
    std::string cache_root;  // empty: $POLARON_LAB_CACHE or <out_dir>/cache
};

/// Dispatches the configured experiment, writes the record, CSVs, binary
/// arrays and plot scripts into the output directory.
ExperimentRecord run(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Plot scripts (gnuplot dialect) for the tabular artifacts of a record.
/// Returns the script paths written next to the CSVs.
std::vector<std::string> emit_plots(const ExperimentRecord& record, const std::string& out_dir);

/// Re-hashes the artifacts listed in a record file; returns the mismatches.
std::vector<std::string> verify_record(const std::string& record_path);

/// Shared crystal solve with on-disk caching keyed by the config hash.
crystal::CrystalState solve_or_load_crystal(const ExperimentConfig& cfg, const RunOptions& opts);

std::string code_version();

/// Smooth nonnegative random density (mixture of Gaussian bumps), unit mass.
grid::GridFunction random_density(const grid::LatticeSpec& spec, std::mt19937_64& rng,
                                  int n_bumps = 3);
/// Smooth real random function with zero mean (signed).
grid::GridFunction random_signed_density(const grid::LatticeSpec& spec, std::mt19937_64& rng);

} // namespace plab::harness
