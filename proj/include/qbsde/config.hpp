#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qbsde/bsde_solver.hpp"
#include "qbsde/representation.hpp"

namespace qbsde {

// Declarative experiment description parsed from a JSON document.  Every
// field carries its default here, so the config echo in the report envelope
// is complete by construction.
struct GeneratorConfig {
    std::string name = "zero";
    std::vector<double> params;
};

struct SdeConfig {
    std::string name = "zero_drift_unit_diffusion";
    std::vector<double> params;
    std::size_t m = 1;
};

struct TerminalConfig {
    std::string name = "brownian_endpoint";
    std::vector<double> params;
};

struct RepresentConfig {
    std::vector<double> t_values = {0.0, 0.25, 0.5};
    double y = 0.0;
    std::vector<double> x = {0.0};
    std::vector<double> q = {1.0};
    double c0 = 0.0; // 0 = |x| + 5
    std::vector<double> ladder_epsilons = {0.2, 0.1, 0.05, 0.025};
    std::vector<std::size_t> ladder_substeps = {64, 64, 64, 64};
};

struct PropertiesConfig {
    std::vector<std::string> theorems = {"4.1", "4.2", "4.3", "5.1", "5.3", "24"};
    // "5.2" is accepted as an alias of the combined converse-comparison probe.
    std::vector<double> eval_times = {0.0, 0.5};
    std::vector<double> shifts = {-1.0, 0.5, 2.0};
    std::vector<double> y_values = {-2.0, -0.5, 0.0, 1.0, 3.0};
};

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t master_seed = 1234;
    double horizon = 1.0;
    std::size_t n_steps = 64;
    std::size_t n_paths = 50000;
    std::size_t dim = 1;
    GeneratorConfig generator;
    std::optional<GeneratorConfig> generator2; // paired probes
    SdeConfig sde;
    TerminalConfig terminal;
    RegressionConfig bsde;
    RepresentConfig represent;
    PropertiesConfig properties;
    std::string output_dir = "out";

    GeneratorSpec make_generator() const;
    std::optional<GeneratorSpec> make_generator2() const;
    SdeCoefficients make_coefficients() const;
    TerminalFunctional make_terminal() const;

    // Full JSON echo with every default materialized.
    std::string echo_json() const;
};

struct ParseOutcome {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors; // "key.path: message", or "line L, column C: ..." for syntax

    bool ok() const { return config.has_value() && errors.empty(); }
};

ParseOutcome parse_config(const std::string& text);

std::vector<std::string> terminal_catalog_names();

} // namespace qbsde
