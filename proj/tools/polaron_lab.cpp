#include <CLI11.hpp>

#include <iostream>

#include "plab/harness/experiments.hpp"

using namespace plab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 2;
constexpr int kExitSolver = 3;
constexpr int kExitConfig = 4;

int do_run(const std::string& config_path, const std::string& out_override, int jobs,
           bool no_cache) {
    harness::ExperimentConfig cfg;
    try {
        cfg = harness::load_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    harness::RunOptions opts;
    opts.use_cache = !no_cache;
    opts.jobs = jobs;

    harness::ExperimentRecord record;
    try {
        record = harness::run(cfg, opts);
    } catch (const harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    std::cout << "experiment:  " << record.experiment << '\n'
              << "config hash: " << record.config_hash << '\n'
              << "wall time:   " << record.wall_seconds << " s\n";
    for (const auto& p : record.properties)
        std::cout << (p.passed ? "  [pass] " : "  [FAIL] ") << p.name << "  (" << p.relation
                  << ")\n";
    if (!record.error.empty()) {
        std::cout << "error: " << record.error << '\n';
        return kExitSolver;
    }
    std::cout << "record: " << cfg.out_dir << "/record.json\n";
    return record.all_passed ? kExitOk : kExitAssertion;
}

int do_presets() {
    for (const auto& name : harness::preset_names()) {
        const auto cfg = harness::preset_config(name);
        std::cout << "# ---- preset: " << name << " ----\n" << cfg.to_toml() << '\n';
    }
    return kExitOk;
}

int do_verify(const std::string& record_path) {
    try {
        const auto mismatches = harness::verify_record(record_path);
        if (mismatches.empty()) {
            std::cout << "all artifact hashes match\n";
            return kExitOk;
        }
        for (const auto& m : mismatches) std::cout << "mismatch: " << m << '\n';
        return kExitAssertion;
    } catch (const harness::ConfigError& e) {
        std::cerr << "verify error: " << e.what() << '\n';
        return kExitConfig;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polaron-lab: mean-field crystal polaron experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, record_path;
    int jobs = 1;
    bool no_cache = false;

    auto* run_cmd = app.add_subcommand("run", "run an experiment from a TOML config");
    run_cmd->add_option("--config", config_path, "config file")->required();
    run_cmd->add_option("--out", out_dir, "output directory override");
    run_cmd->add_option("--jobs", jobs, "parallel legs for independent sweeps");
    run_cmd->add_flag("--no-cache", no_cache, "disable the crystal cache");

    auto* presets_cmd = app.add_subcommand("presets", "print the shipped presets as TOML");

    auto* verify_cmd = app.add_subcommand("verify", "recompute artifact hashes of a record");
    verify_cmd->add_option("--record", record_path, "record JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) return do_run(config_path, out_dir, jobs, no_cache);
    if (presets_cmd->parsed()) return do_presets();
    if (verify_cmd->parsed()) return do_verify(record_path);
    return kExitConfig;
}
