#include "qbsde/config.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "qbsde/errors.hpp"

namespace qbsde {

using nlohmann::json;

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string nearest_name(const std::string& name, const std::vector<std::string>& catalog) {
    std::string best;
    std::size_t best_d = std::string::npos;
    for (const auto& c : catalog) {
        const std::size_t d = levenshtein(name, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

struct Validator {
    std::vector<std::string>& errors;

    void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

    template <typename T>
    bool read(const json& j, const std::string& path, const std::string& key, T& out,
              bool required = false) {
        if (!j.contains(key)) {
            if (required) fail(path + key, "missing required key");
            return false;
        }
        try {
            out = j.at(key).get<T>();
            return true;
        } catch (const json::exception& e) {
            fail(path + key, std::string("wrong type (") + e.what() + ")");
            return false;
        }
    }
};

void validate_positive(Validator& v, const std::string& path, double value) {
    if (!(value > 0.0)) v.fail(path, "must be positive");
}

} // namespace

GeneratorSpec ExperimentConfig::make_generator() const {
    return instantiate_generator(generator.name, generator.params);
}

std::optional<GeneratorSpec> ExperimentConfig::make_generator2() const {
    if (!generator2) return std::nullopt;
    return instantiate_generator(generator2->name, generator2->params);
}

SdeCoefficients ExperimentConfig::make_coefficients() const {
    return instantiate_coefficients(sde.name, sde.params, sde.m);
}

TerminalFunctional ExperimentConfig::make_terminal() const {
    const auto& p = terminal.params;
    auto arg = [&p](std::size_t i, double fallback) { return i < p.size() ? p[i] : fallback; };
    if (terminal.name == "constant") return terminal_constant(arg(0, 0.0));
    if (terminal.name == "brownian_endpoint") return terminal_brownian_endpoint(arg(0, 8.0));
    if (terminal.name == "state_endpoint") return terminal_state_endpoint(arg(0, 8.0));
    if (terminal.name == "abs_brownian_capped") return terminal_abs_brownian_capped(arg(0, 2.0));
    if (terminal.name == "cos_brownian") return terminal_cos_brownian();
    if (terminal.name == "smoothed_indicator") return terminal_smoothed_indicator(arg(0, 4.0));
    throw BadParameters("unknown terminal '" + terminal.name + "'");
}

std::vector<std::string> terminal_catalog_names() {
    return {"constant", "brownian_endpoint", "state_endpoint", "abs_brownian_capped",
            "cos_brownian", "smoothed_indicator"};
}

std::string ExperimentConfig::echo_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["master_seed"] = master_seed;
    j["horizon"] = horizon;
    j["n_steps"] = n_steps;
    j["n_paths"] = n_paths;
    j["dim"] = dim;
    j["generator"] = {{"name", generator.name}, {"params", generator.params}};
    if (generator2) j["generator2"] = {{"name", generator2->name}, {"params", generator2->params}};
    j["sde"] = {{"name", sde.name}, {"params", sde.params}, {"m", sde.m}};
    j["terminal"] = {{"name", terminal.name}, {"params", terminal.params}};
    j["bsde"] = {{"basis_degree", bsde.basis_degree},
                 {"z_max", bsde.z_max ? json(*bsde.z_max) : json(nullptr)},
                 {"picard_tol", bsde.picard_tol},
                 {"picard_max_iters", bsde.picard_max_iters},
                 {"clip_y", bsde.clip_y},
                 {"include_brownian_state", bsde.include_brownian_state}};
    j["represent"] = {{"t_values", represent.t_values},
                      {"y", represent.y},
                      {"x", represent.x},
                      {"q", represent.q},
                      {"c0", represent.c0},
                      {"ladder", {{"epsilons", represent.ladder_epsilons},
                                  {"substeps", represent.ladder_substeps}}}};
    j["properties"] = {{"theorems", properties.theorems},
                       {"eval_times", properties.eval_times},
                       {"shifts", properties.shifts},
                       {"y_values", properties.y_values}};
    j["output_dir"] = output_dir;
    return j.dump(2);
}

ParseOutcome parse_config(const std::string& text) {
    ParseOutcome out;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports a byte offset; translate to line/column.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        out.errors.push_back("line " + std::to_string(line) + ", column " + std::to_string(col) +
                             ": " + e.what());
        return out;
    }

    ExperimentConfig cfg;
    Validator v{out.errors};

    v.read(j, "", "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1) v.fail("schema_version", "unrecognized (expected 1)");
    v.read(j, "", "master_seed", cfg.master_seed);
    v.read(j, "", "horizon", cfg.horizon);
    validate_positive(v, "horizon", cfg.horizon);
    v.read(j, "", "n_steps", cfg.n_steps);
    if (cfg.n_steps < 1) v.fail("n_steps", "must be >= 1");
    if (j.contains("n_paths")) {
        // Catch non-positive values before the unsigned conversion swallows them.
        double raw = -1;
        v.read(j, "", "n_paths", raw);
        if (!(raw >= 1.0)) {
            v.fail("n_paths", "must be >= 1");
        } else {
            cfg.n_paths = static_cast<std::size_t>(raw);
        }
    }
    v.read(j, "", "dim", cfg.dim);
    if (cfg.dim < 1) v.fail("dim", "must be >= 1");

    auto read_generator = [&](const json& node, const std::string& path, GeneratorConfig& gc) {
        v.read(node, path + ".", "name", gc.name);
        v.read(node, path + ".", "params", gc.params);
        const auto catalog = generator_catalog_names();
        if (std::find(catalog.begin(), catalog.end(), gc.name) == catalog.end()) {
            v.fail(path + ".name", "unknown generator '" + gc.name + "' (nearest catalog match: '" +
                                       nearest_name(gc.name, catalog) + "')");
        } else {
            try {
                instantiate_generator(gc.name, gc.params);
            } catch (const std::exception& e) {
                v.fail(path + ".params", e.what());
            }
        }
    };
    if (j.contains("generator")) read_generator(j["generator"], "generator", cfg.generator);
    if (j.contains("generator2")) {
        GeneratorConfig g2;
        read_generator(j["generator2"], "generator2", g2);
        cfg.generator2 = g2;
    }

    if (j.contains("sde")) {
        const json& s = j["sde"];
        v.read(s, "sde.", "name", cfg.sde.name);
        v.read(s, "sde.", "params", cfg.sde.params);
        v.read(s, "sde.", "m", cfg.sde.m);
        const auto catalog = coefficient_catalog_names();
        if (std::find(catalog.begin(), catalog.end(), cfg.sde.name) == catalog.end()) {
            v.fail("sde.name", "unknown coefficients '" + cfg.sde.name +
                                   "' (nearest catalog match: '" +
                                   nearest_name(cfg.sde.name, catalog) + "')");
        }
    }

    if (j.contains("terminal")) {
        const json& t = j["terminal"];
        v.read(t, "terminal.", "name", cfg.terminal.name);
        v.read(t, "terminal.", "params", cfg.terminal.params);
        const auto catalog = terminal_catalog_names();
        if (std::find(catalog.begin(), catalog.end(), cfg.terminal.name) == catalog.end()) {
            v.fail("terminal.name", "unknown terminal '" + cfg.terminal.name +
                                        "' (nearest catalog match: '" +
                                        nearest_name(cfg.terminal.name, catalog) + "')");
        }
    }

    if (j.contains("bsde")) {
        const json& b = j["bsde"];
        v.read(b, "bsde.", "basis_degree", cfg.bsde.basis_degree);
        if (cfg.bsde.basis_degree < 0) v.fail("bsde.basis_degree", "must be >= 0");
        if (b.contains("z_max") && !b["z_max"].is_null()) {
            double zm = 0;
            if (v.read(b, "bsde.", "z_max", zm)) {
                if (!(zm > 0)) v.fail("bsde.z_max", "must be positive (or null for automatic)");
                cfg.bsde.z_max = zm;
            }
        }
        v.read(b, "bsde.", "picard_tol", cfg.bsde.picard_tol);
        validate_positive(v, "bsde.picard_tol", cfg.bsde.picard_tol);
        v.read(b, "bsde.", "picard_max_iters", cfg.bsde.picard_max_iters);
        if (cfg.bsde.picard_max_iters < 1) v.fail("bsde.picard_max_iters", "must be >= 1");
        v.read(b, "bsde.", "clip_y", cfg.bsde.clip_y);
        v.read(b, "bsde.", "include_brownian_state", cfg.bsde.include_brownian_state);
    }

    if (j.contains("represent")) {
        const json& r = j["represent"];
        v.read(r, "represent.", "t_values", cfg.represent.t_values);
        v.read(r, "represent.", "y", cfg.represent.y);
        v.read(r, "represent.", "x", cfg.represent.x);
        v.read(r, "represent.", "q", cfg.represent.q);
        v.read(r, "represent.", "c0", cfg.represent.c0);
        if (r.contains("ladder")) {
            const json& l = r["ladder"];
            v.read(l, "represent.ladder.", "epsilons", cfg.represent.ladder_epsilons);
            v.read(l, "represent.ladder.", "substeps", cfg.represent.ladder_substeps);
        }
        for (double t : cfg.represent.t_values) {
            if (t < 0 || t >= cfg.horizon) {
                v.fail("represent.t_values", "entries must lie in [0, horizon)");
                break;
            }
        }
        if (cfg.represent.ladder_substeps.size() != cfg.represent.ladder_epsilons.size()) {
            v.fail("represent.ladder.substeps", "must match the number of epsilons");
        }
    }

    if (j.contains("properties")) {
        const json& p = j["properties"];
        v.read(p, "properties.", "theorems", cfg.properties.theorems);
        v.read(p, "properties.", "eval_times", cfg.properties.eval_times);
        v.read(p, "properties.", "shifts", cfg.properties.shifts);
        v.read(p, "properties.", "y_values", cfg.properties.y_values);
        const std::vector<std::string> known = {"4.1", "5.2", "4.2", "4.3", "5.1", "5.3", "24"};
        for (const auto& t : cfg.properties.theorems) {
            if (std::find(known.begin(), known.end(), t) == known.end()) {
                v.fail("properties.theorems", "unknown theorem id '" + t + "'");
            }
        }
    }

    v.read(j, "", "output_dir", cfg.output_dir);

    if (out.errors.empty()) out.config = cfg;
    return out;
}

} // namespace qbsde
