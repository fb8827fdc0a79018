#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qbsde/runner.hpp"

namespace {

int run_subcommand(const std::string& subcommand, const std::string& config_path,
                   std::optional<std::uint64_t> seed_override,
                   std::optional<std::string> out_override) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config file '" << config_path << "'\n";
        return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();

    qbsde::ParseOutcome outcome = qbsde::parse_config(ss.str());
    if (!outcome.ok()) {
        std::cerr << "config validation failed (" << outcome.errors.size() << " error(s)):\n";
        for (const auto& e : outcome.errors) std::cerr << "  - " << e << "\n";
        return 2;
    }

    qbsde::ExperimentConfig cfg = *outcome.config;
    if (seed_override) cfg.master_seed = *seed_override;
    if (out_override) cfg.output_dir = *out_override;

    try {
        const qbsde::ReportEnvelope env = qbsde::run(cfg, subcommand);
        std::cout << subcommand << ": " << (env.aggregate_pass ? "pass" : "FAIL") << "  ("
                  << env.payload_files.size() << " payload file(s) in " << env.output_dir << ", "
                  << env.wall_clock_seconds << " s)\n";
        return env.aggregate_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qbsde: quadratic-BSDE Monte Carlo laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;

    for (const std::string name : {"solve", "represent", "properties", "check-assumptions"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "path to the JSON experiment config")->required();
        sub->add_option("--seed", seed, "override master_seed");
        sub->add_option("--out", out_dir, "override output directory");
    }

    CLI11_PARSE(app, argc, argv);
    return run_subcommand(app.get_subcommands().front()->get_name(), config_path, seed, out_dir);
}
