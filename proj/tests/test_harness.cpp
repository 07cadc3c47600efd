#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "plab/harness/experiments.hpp"

using namespace plab::harness;

TEST_CASE("toml: sections, scalars, arrays, comments") {
    const std::string text = R"(
# top comment
preset = "deepwell-1d"   # trailing comment
seed = 42
outer_tol = 1e-8
flag = true

[lattice]
dim = 1
a = 1.5
n_cell = 16

[params]
lambda_list = [2.0, 3.0, 4.0]
names = ["a", "b"]
)";
    auto j = parse_toml(text);
    CHECK(j["preset"] == "deepwell-1d");
    CHECK(j["seed"] == 42);
    CHECK(j["outer_tol"] == 1e-8);
    CHECK(j["flag"] == true);
    CHECK(j["lattice"]["a"] == 1.5);
    CHECK(j["lattice"]["n_cell"] == 16);
    CHECK(j["params"]["lambda_list"].size() == 3);
    CHECK(j["params"]["lambda_list"][1] == 3.0);
    CHECK(j["params"]["names"][0] == "a");
}

TEST_CASE("toml: array-of-tables and dotted keys") {
    const std::string text = R"(
[[sites]]
sigma = 0.12
charge = 1.0

[[sites]]
sigma = 0.3
charge = 2.0

[scf]
mixing = 0.4
)";
    auto j = parse_toml(text);
    REQUIRE(j["sites"].size() == 2);
    CHECK(j["sites"][0]["sigma"] == 0.12);
    CHECK(j["sites"][1]["charge"] == 2.0);
    CHECK(j["scf"]["mixing"] == 0.4);
}

TEST_CASE("toml: malformed input is a config error") {
    CHECK_THROWS_AS(parse_toml("key = "), ConfigError);
    CHECK_THROWS_AS(parse_toml("[unclosed\nkey = 1"), ConfigError);
    CHECK_THROWS_AS(parse_toml("key = \"no end"), ConfigError);
}

TEST_CASE("presets: all load, solve-ready fields populated") {
    auto names = preset_names();
    CHECK(names.size() >= 4);
    for (const auto& name : names) {
        auto cfg = preset_config(name);
        CHECK(cfg.preset == name);
        CHECK(!cfg.sites.empty());
        CHECK(cfg.spec.n_cell >= 4);
        CHECK(cfg.mass > 0.0);
    }
    CHECK_THROWS_AS(preset_config("no-such-preset"), ConfigError);
}

TEST_CASE("config: TOML round trip preserves the hash") {
    auto cfg = preset_config("deepwell-1d");
    cfg.seed = 99;
    cfg.experiment = "exp-e1";
    auto back = config_from_toml(cfg.to_toml());
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.seed == 99);
    CHECK(back.experiment == "exp-e1");
    CHECK(back.spec == cfg.spec);
}

TEST_CASE("config: preset keys can be overridden") {
    auto cfg = config_from_toml(R"(
preset = "deepwell-1d"
experiment = "exp-crystal"
[lattice]
multiplier = 3
[scf]
mixing = 0.33
)");
    CHECK(cfg.spec.multiplier == 3);
    CHECK(cfg.scf.mixing == 0.33);
    // untouched keys keep the preset values
    CHECK(cfg.spec.n_cell == preset_config("deepwell-1d").spec.n_cell);
}

TEST_CASE("config: hash ignores the output directory, tracks physics") {
    auto a = preset_config("deepwell-1d");
    auto b = a;
    b.out_dir = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    b.mass = 2.0;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("config: unknown experiment rejected at run time") {
    auto cfg = preset_config("deepwell-1d");
    cfg.experiment = "exp-unknown";
    cfg.out_dir = "test_harness_unknown_out";
    CHECK_THROWS_AS(run(cfg), ConfigError);
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("record: JSON round trip") {
    ExperimentRecord rec;
    rec.experiment = "exp-crystal";
    rec.config_hash = "abc123";
    rec.code_version = code_version();
    rec.wall_seconds = 1.25;
    rec.results["gap"] = 19.7;
    rec.properties.push_back({"gap-positive", "gap > 0", true, 19.7, 0.0});
    rec.artifacts.push_back({"bands.csv", "beef"});
    auto back = ExperimentRecord::from_json(rec.to_json());
    CHECK(back.experiment == rec.experiment);
    CHECK(back.config_hash == rec.config_hash);
    CHECK(back.results["gap"] == 19.7);
    REQUIRE(back.properties.size() == 1);
    CHECK(back.properties[0].name == "gap-positive");
    CHECK(back.properties[0].passed);
    REQUIRE(back.artifacts.size() == 1);
    CHECK(back.artifacts[0].hash == "beef");
}

TEST_CASE("run: exp-crystal end to end with artifact verification") {
    auto cfg = preset_config("deepwell-1d");
    cfg.experiment = "exp-crystal";
    cfg.spec.multiplier = 2;
    cfg.out_dir = "test_harness_crystal_out";
    std::filesystem::remove_all(cfg.out_dir);
    auto rec = run(cfg);
    CHECK(rec.all_passed);
    CHECK(rec.error.empty());
    CHECK(rec.results["gap"].get<double>() > 0.0);
    CHECK(std::filesystem::exists(cfg.out_dir + "/record.json"));
    CHECK(std::filesystem::exists(cfg.out_dir + "/bands.csv"));

    auto mismatches = verify_record(cfg.out_dir + "/record.json");
    CHECK(mismatches.empty());

    // tamper with an artifact: verification must notice
    {
        std::ofstream out(cfg.out_dir + "/bands.csv", std::ios::app);
        out << "tampered\n";
    }
    auto tampered = verify_record(cfg.out_dir + "/record.json");
    CHECK(!tampered.empty());
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("run: records a module error instead of crashing") {
    auto cfg = preset_config("free");
    cfg.experiment = "exp-crystal";
    cfg.out_dir = "test_harness_free_out";
    std::filesystem::remove_all(cfg.out_dir);
    auto rec = run(cfg);
    CHECK(!rec.all_passed);
    CHECK(!rec.error.empty());
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("run: determinism, same seed gives identical CSV bytes") {
    auto cfg = preset_config("deepwell-1d");
    cfg.experiment = "exp-crystal";
    cfg.spec.multiplier = 2;
    RunOptions opts;
    opts.use_cache = false;

    auto read_all = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };

    cfg.out_dir = "test_harness_det_a";
    std::filesystem::remove_all(cfg.out_dir);
    run(cfg, opts);
    auto bytes_a = read_all(cfg.out_dir + "/bands.csv");

    cfg.out_dir = "test_harness_det_b";
    std::filesystem::remove_all(cfg.out_dir);
    run(cfg, opts);
    auto bytes_b = read_all(cfg.out_dir + "/bands.csv");

    CHECK(!bytes_a.empty());
    CHECK(bytes_a == bytes_b);
    std::filesystem::remove_all("test_harness_det_a");
    std::filesystem::remove_all("test_harness_det_b");
}

TEST_CASE("emit_plots writes scripts referencing the CSVs") {
    auto cfg = preset_config("deepwell-1d");
    cfg.experiment = "exp-crystal";
    cfg.spec.multiplier = 2;
    cfg.out_dir = "test_harness_plot_out";
    std::filesystem::remove_all(cfg.out_dir);
    auto rec = run(cfg);
    auto scripts = emit_plots(rec, cfg.out_dir);
    CHECK(!scripts.empty());
    for (const auto& s : scripts)
        CHECK(std::filesystem::exists(s));
    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("fnv1a: stable reference values") {
    // reference digests of the 64-bit FNV-1a function
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
