#pragma once

#include <string>
#include <vector>

#include "qbsde/config.hpp"

namespace qbsde {

// Orchestration of one subcommand run: dispatch to the solver / probe
// modules, then write CSV payloads (plot-ready ladders) and JSON payloads
// (verdict trees) plus an envelope that echoes the full config.  Payload
// files are a pure function of (config, seed); the envelope additionally
// carries wall-clock and is excluded from the bit-exactness contract.
struct ReportEnvelope {
    std::string subcommand;
    std::uint64_t seed = 0;
    bool aggregate_pass = false;
    std::vector<std::string> payload_files; // paths relative to the output dir
    double wall_clock_seconds = 0.0;
    std::string output_dir;
};

ReportEnvelope run(const ExperimentConfig& config, const std::string& subcommand);

// Atomic text write (write-then-rename).
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace qbsde
