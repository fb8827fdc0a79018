#include "qbsde/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qbsde/errors.hpp"
#include "qbsde/gexpectation.hpp"

namespace qbsde {

using nlohmann::json;

namespace {

constexpr const char* kArtifactVersion = "qbsde 0.1.0";

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json case_to_json(const CaseRecord& c) {
    json j;
    j["case_id"] = c.case_id;
    j["statistic"] = c.statistic;
    j["se"] = c.se;
    j["threshold"] = c.threshold;
    j["verdict"] = c.pass ? "pass" : "fail";
    j["witness"] = c.witness;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

json report_to_json(const PropertyReport& rep) {
    json j;
    j["theorem_id"] = rep.theorem_id;
    j["aggregate"] = rep.aggregate_pass() ? "pass" : "fail";
    if (!rep.notes.empty()) j["notes"] = rep.notes;
    j["cases"] = json::array();
    for (const auto& c : rep.cases) j["cases"].push_back(case_to_json(c));
    return j;
}

json representation_to_json(const RepresentationReport& rep) {
    json j;
    j["target"] = rep.target;
    j["extrapolated_limit"] = rep.extrapolated_limit;
    j["raw_smallest"] = rep.raw_smallest;
    j["threshold"] = rep.threshold;
    j["c_fit"] = rep.c_fit;
    j["c_fit_ok"] = rep.c_fit_ok;
    j["max_capped_fraction"] = rep.max_capped_fraction;
    j["z_slope"] = rep.z_slope ? json(*rep.z_slope) : json(nullptr);
    j["sup_slope"] = rep.sup_slope ? json(*rep.sup_slope) : json(nullptr);
    j["lp_errors"] = json::array();
    for (const auto& r : rep.rows) {
        j["lp_errors"].push_back({{"epsilon", r.eps}, {"l1", r.l1_error}, {"l2", r.l2_error}});
    }
    j["verdict"] = rep.pass ? "pass" : "fail";
    return j;
}

std::string representation_csv(const RepresentationReport& rep) {
    std::string csv = "epsilon,quotient_mean,quotient_se,target,abs_err,z_energy,sup_tildeY,"
                      "capped_fraction\n";
    for (const auto& r : rep.rows) {
        csv += fmt17(r.eps) + "," + fmt17(r.quotient_mean) + "," + fmt17(r.quotient_se) + "," +
               fmt17(r.target) + "," + fmt17(std::abs(r.quotient_mean - r.target)) + "," +
               fmt17(r.z_energy) + "," + fmt17(r.sup_tilde_y) + "," + fmt17(r.capped_fraction) +
               "\n";
    }
    return csv;
}

struct SolveArtifacts {
    BsdeSolution solution;
    TimeGrid grid;
};

SolveArtifacts run_solve(const ExperimentConfig& cfg) {
    const TimeGrid grid = make_grid(0.0, cfg.horizon, cfg.n_steps);
    const PathBundle bundle = sample_brownian(grid, cfg.n_paths, cfg.dim,
                                              RngPolicy{cfg.master_seed, 0});
    const SdeCoefficients coeffs = cfg.make_coefficients();
    std::vector<double> x0(coeffs.m, 0.0);
    const StatePaths paths = simulate_euler(coeffs, 0.0, x0, bundle);
    return {solve_bsde(cfg.make_generator(), cfg.make_terminal(), paths, bundle, nullptr, cfg.bsde),
            grid};
}

GexpEnvironment env_from_config(const ExperimentConfig& cfg) {
    GexpEnvironment env;
    env.horizon = cfg.horizon;
    env.n_steps = cfg.n_steps;
    env.n_paths = cfg.n_paths;
    env.dim = cfg.dim;
    env.master_seed = cfg.master_seed;
    env.coeffs = cfg.make_coefficients();
    env.cfg = cfg.bsde;
    return env;
}

} // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

ReportEnvelope run(const ExperimentConfig& cfg, const std::string& subcommand) {
    const auto t_start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(cfg.output_dir);

    ReportEnvelope env_out;
    env_out.subcommand = subcommand;
    env_out.seed = cfg.master_seed;
    env_out.output_dir = cfg.output_dir;

    auto emit = [&](const std::string& name, const std::string& content) {
        write_file_atomic(cfg.output_dir + "/" + name, content);
        env_out.payload_files.push_back(name);
    };

    // On a module error, whatever payloads were already written stay on disk
    // and the envelope records the failure before the error propagates.
    auto write_envelope = [&](const std::string& verdict, const std::string& error_msg) {
        json envelope;
        envelope["artifact_version"] = kArtifactVersion;
        envelope["subcommand"] = subcommand;
        envelope["seed"] = cfg.master_seed;
        envelope["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        envelope["aggregate_verdict"] = verdict;
        if (!error_msg.empty()) envelope["error"] = error_msg;
        envelope["payloads"] = env_out.payload_files;
        envelope["config"] = json::parse(cfg.echo_json());
        write_file_atomic(cfg.output_dir + "/envelope.json", envelope.dump(2) + "\n");
    };

    bool pass = true;
    try {
    if (subcommand == "solve") {
        const SolveArtifacts art = run_solve(cfg);
        const auto& sol = art.solution;

        json j;
        j["y0"] = sol.y0();
        j["se_y0"] = sol.diag.se_y0;
        j["band"] = sol.diag.band;
        j["band_violation_fraction"] = sol.diag.band_violation_fraction;
        j["truncation_hits"] = sol.diag.truncation_hits;
        j["clip_hits"] = sol.diag.clip_hits;
        j["rank_deficient_nodes"] = sol.diag.rank_deficient_nodes;
        j["terminal_bound_violations"] = sol.diag.terminal_bound_violations;
        j["z_max_used"] = sol.diag.z_max_used;
        emit("solve.json", j.dump(2) + "\n");

        std::string csv = "node,time,mean_y,se_y\n";
        for (std::size_t i = 0; i <= art.grid.n_steps; ++i) {
            double mean, se;
            sol.node_mean_se(i, mean, se);
            csv += std::to_string(i) + "," + fmt17(art.grid.node(i)) + "," + fmt17(mean) + "," +
                   fmt17(se) + "\n";
        }
        emit("solve_nodes.csv", csv);
        pass = sol.diag.terminal_bound_violations == 0;
    } else if (subcommand == "represent") {
        json summary = json::array();
        for (std::size_t i = 0; i < cfg.represent.t_values.size(); ++i) {
            RepresentationQuery query;
            query.t = cfg.represent.t_values[i];
            query.horizon = cfg.horizon;
            query.y = cfg.represent.y;
            query.x = cfg.represent.x;
            query.q = cfg.represent.q;
            query.c0 = cfg.represent.c0;
            query.dim = cfg.dim;
            query.gen = cfg.make_generator();
            query.coeffs = cfg.make_coefficients();

            EpsilonLadder ladder;
            ladder.epsilons = cfg.represent.ladder_epsilons;
            ladder.substeps = cfg.represent.ladder_substeps;

            const RepresentationReport rep =
                limit_study(query, ladder, cfg.n_paths, cfg.bsde, cfg.master_seed);
            const std::string csv_name = "represent_t" + std::to_string(i) + ".csv";
            emit(csv_name, representation_csv(rep));

            json entry = representation_to_json(rep);
            entry["t"] = query.t;
            entry["csv"] = csv_name;
            summary.push_back(entry);
            pass = pass && rep.pass;
        }
        emit("represent_summary.json", summary.dump(2) + "\n");
    } else if (subcommand == "properties") {
        const GexpEnvironment env = env_from_config(cfg);
        const GeneratorSpec g1 = cfg.make_generator();
        const auto g2 = cfg.make_generator2();

        json reports = json::array();
        for (const auto& theorem : cfg.properties.theorems) {
            PropertyReport rep;
            if (theorem == "4.1" || theorem == "5.2") {
                rep = converse_comparison_probe(g1, g2.value_or(instantiate_generator("zero", {})),
                                                default_terminal_battery(),
                                                cfg.properties.eval_times, env);
            } else if (theorem == "4.2") {
                rep = self_financing_check(g1, env);
            } else if (theorem == "4.3") {
                rep = zero_interest_check(g1, cfg.properties.y_values, env);
            } else if (theorem == "5.1") {
                rep = uniqueness_probe(g1, g2.value_or(instantiate_generator("zero", {})),
                                       uniqueness_terminal_battery(), env);
            } else if (theorem == "5.3") {
                rep = translation_invariance_check(g1, cfg.make_terminal(), cfg.properties.shifts,
                                                   env);
            } else if (theorem == "24") {
                StopSpec stop;
                stop.kind = StopSpec::Kind::Deterministic;
                stop.time = 0.5 * cfg.horizon;
                rep = horizon_consistency_check(g1, cfg.make_terminal(), stop, env);
            } else {
                throw ConfigError("unknown theorem id '" + theorem + "'");
            }
            reports.push_back(report_to_json(rep));
            pass = pass && rep.aggregate_pass();
        }
        emit("properties.json", reports.dump(2) + "\n");
    } else if (subcommand == "check-assumptions") {
        json reports = json::array();
        auto audit_one = [&](const GeneratorSpec& gen) {
            const auto grid_pts = standard_audit_grid(cfg.horizon, cfg.dim, 100000);
            const AuditReport rep = check_assumptions(gen, grid_pts);
            json j;
            j["generator"] = gen.name;
            j["g1_violation"] = rep.g1_violation;
            j["g2_violation"] = rep.g2_violation;
            j["growth_violation"] = rep.growth_violation;
            j["a5_violation"] = rep.a5_violation;
            j["lambda_M"] = rep.lambda_m;
            j["tolerance"] = rep.tolerance;
            j["verdict"] = rep.pass ? "pass" : "fail";
            reports.push_back(j);
            pass = pass && rep.pass;
        };
        audit_one(cfg.make_generator());
        if (const auto g2 = cfg.make_generator2()) audit_one(*g2);
        emit("assumptions.json", reports.dump(2) + "\n");
    } else {
        throw ConfigError("unknown subcommand '" + subcommand +
                          "' (expected solve | represent | properties | check-assumptions)");
    }
    } catch (const std::exception& e) {
        write_envelope("failed", e.what());
        throw;
    }

    env_out.aggregate_pass = pass;
    env_out.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_envelope(pass ? "pass" : "fail", "");
    return env_out;
}

} // namespace qbsde
