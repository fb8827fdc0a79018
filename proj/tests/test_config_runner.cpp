#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbsde/config.hpp"
#include "qbsde/errors.hpp"
#include "qbsde/runner.hpp"

using namespace qbsde;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("qbsde_test_" + tag);
    std::filesystem::remove_all(dir);
    return dir.string();
}

} // namespace

TEST_CASE("minimal config materializes every default") {
    const ParseOutcome out = parse_config("{}");
    REQUIRE(out.ok());
    const ExperimentConfig& cfg = *out.config;
    CHECK(cfg.master_seed == 1234);
    CHECK(cfg.n_paths == 50000);
    CHECK(cfg.n_steps == 64);
    CHECK(cfg.generator.name == "zero");
    CHECK(cfg.bsde.basis_degree == 2);
    CHECK_FALSE(cfg.bsde.z_max.has_value());

    // Echo completeness: every default the run would use appears explicitly.
    const std::string echo = cfg.echo_json();
    for (const char* key :
         {"master_seed", "horizon", "n_steps", "n_paths", "generator", "sde", "terminal",
          "bsde", "picard_tol", "represent", "ladder", "properties", "output_dir"}) {
        INFO("key ", key);
        CHECK(echo.find(key) != std::string::npos);
    }
}

TEST_CASE("validation failures are collected with key paths") {
    const ParseOutcome out = parse_config(R"({
        "n_paths": 0,
        "generator": {"name": "pur_quadratic", "params": [1.0]},
        "bsde": {"picard_tol": -1.0}
    })");
    CHECK_FALSE(out.ok());
    REQUIRE(out.errors.size() >= 3);

    bool saw_paths = false, saw_gen = false, saw_tol = false;
    for (const auto& e : out.errors) {
        if (e.rfind("n_paths:", 0) == 0) saw_paths = true;
        if (e.rfind("generator.name:", 0) == 0) {
            saw_gen = true;
            CHECK(e.find("pure_quadratic") != std::string::npos); // nearest catalog match
        }
        if (e.rfind("bsde.picard_tol:", 0) == 0) saw_tol = true;
    }
    CHECK(saw_paths);
    CHECK(saw_gen);
    CHECK(saw_tol);
}

TEST_CASE("syntax errors carry line and column") {
    const ParseOutcome out = parse_config("{\n  \"horizon\": 1.0,\n  oops\n}");
    CHECK_FALSE(out.ok());
    REQUIRE(out.errors.size() == 1);
    CHECK(out.errors[0].find("line 3") != std::string::npos);
    CHECK(out.errors[0].find("column") != std::string::npos);
}

TEST_CASE("solve subcommand writes payloads and envelope") {
    const ParseOutcome out = parse_config(R"({
        "n_paths": 5000,
        "generator": {"name": "zero", "params": []},
        "terminal": {"name": "brownian_endpoint", "params": [8.0]}
    })");
    REQUIRE(out.ok());
    ExperimentConfig cfg = *out.config;
    cfg.output_dir = temp_dir("solve");

    const ReportEnvelope env = run(cfg, "solve");
    CHECK(env.aggregate_pass);
    CHECK(env.payload_files.size() == 2);
    CHECK(std::filesystem::exists(cfg.output_dir + "/solve.json"));
    CHECK(std::filesystem::exists(cfg.output_dir + "/solve_nodes.csv"));
    CHECK(std::filesystem::exists(cfg.output_dir + "/envelope.json"));

    // Y_0 of the martingale case sits near zero.
    const std::string payload = slurp(cfg.output_dir + "/solve.json");
    CHECK(payload.find("\"y0\"") != std::string::npos);

    const std::string csv = slurp(cfg.output_dir + "/solve_nodes.csv");
    CHECK(csv.rfind("node,time,mean_y,se_y\n", 0) == 0);
    std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("represent subcommand emits the documented CSV schema") {
    const ParseOutcome out = parse_config(R"({
        "n_paths": 4000,
        "generator": {"name": "pure_quadratic", "params": [1.0]},
        "represent": {"t_values": [0.0], "y": 0.0, "x": [0.0], "q": [1.0], "c0": 5.0,
                      "ladder": {"epsilons": [0.2, 0.1, 0.05, 0.025],
                                  "substeps": [64, 64, 64, 64]}}
    })");
    REQUIRE(out.ok());
    ExperimentConfig cfg = *out.config;
    cfg.output_dir = temp_dir("represent");

    const ReportEnvelope env = run(cfg, "represent");
    const std::string csv = slurp(cfg.output_dir + "/represent_t0.csv");
    CHECK(csv.rfind("epsilon,quotient_mean,quotient_se,target,abs_err,z_energy,sup_tildeY,"
                    "capped_fraction\n",
                    0) == 0);
    CHECK(env.payload_files.size() == 2); // csv + summary
    std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("check-assumptions subcommand verdict") {
    const ParseOutcome out = parse_config(R"({
        "generator": {"name": "siny_quadratic", "params": []}
    })");
    REQUIRE(out.ok());
    ExperimentConfig cfg = *out.config;
    cfg.output_dir = temp_dir("audit");
    const ReportEnvelope env = run(cfg, "check-assumptions");
    CHECK(env.aggregate_pass);
    CHECK(std::filesystem::exists(cfg.output_dir + "/assumptions.json"));
    std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("payload bytes are a pure function of config and seed") {
    const ParseOutcome out = parse_config(R"({
        "n_paths": 3000,
        "n_steps": 32,
        "generator": {"name": "pure_quadratic", "params": [1.0]},
        "terminal": {"name": "brownian_endpoint", "params": [8.0]}
    })");
    REQUIRE(out.ok());
    ExperimentConfig a = *out.config, b = *out.config;
    a.output_dir = temp_dir("det_a");
    b.output_dir = temp_dir("det_b");
    run(a, "solve");
    run(b, "solve");
    CHECK(slurp(a.output_dir + "/solve.json") == slurp(b.output_dir + "/solve.json"));
    CHECK(slurp(a.output_dir + "/solve_nodes.csv") == slurp(b.output_dir + "/solve_nodes.csv"));

    // A different seed must change the numbers.
    ExperimentConfig c = *out.config;
    c.master_seed = 777;
    c.output_dir = temp_dir("det_c");
    run(c, "solve");
    CHECK(slurp(a.output_dir + "/solve_nodes.csv") != slurp(c.output_dir + "/solve_nodes.csv"));

    std::filesystem::remove_all(a.output_dir);
    std::filesystem::remove_all(b.output_dir);
    std::filesystem::remove_all(c.output_dir);
}

TEST_CASE("unknown subcommand is rejected") {
    const ParseOutcome out = parse_config("{}");
    REQUIRE(out.ok());
    ExperimentConfig cfg = *out.config;
    cfg.output_dir = temp_dir("bad");
    CHECK_THROWS_AS(run(cfg, "frobnicate"), ConfigError);
    std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("a module error leaves a failed-marker envelope behind") {
    const ParseOutcome out = parse_config(R"({
        "n_paths": 500,
        "generator": {"name": "linear", "params": [1.0, 0.0]},
        "properties": {"theorems": ["5.3"], "eval_times": [0.0],
                        "shifts": [1.0], "y_values": [0.0]}
    })");
    REQUIRE(out.ok());
    ExperimentConfig cfg = *out.config;
    cfg.output_dir = temp_dir("failmark");
    // linear(1,0) is not A5-flagged: the 5.3 probe refuses it.
    CHECK_THROWS(run(cfg, "properties"));
    const std::string envelope = slurp(cfg.output_dir + "/envelope.json");
    CHECK(envelope.find("\"aggregate_verdict\": \"failed\"") != std::string::npos);
    CHECK(envelope.find("\"error\"") != std::string::npos);
    std::filesystem::remove_all(cfg.output_dir);
}
