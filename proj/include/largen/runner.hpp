#pragma once

// Experiment orchestration behind the command-line verbs.

#include "largen/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace largen {

enum ExitCode : int {
    kExitOk = 0,
    kExitIdentityViolation = 1,  // a deterministic identity or bound failed
    kExitConfigError = 2,
    kExitRuntimeError = 3,
};

struct RunOptions {
    std::string verb;
    std::string config_path;  // may be empty for report and verify-identities
    std::optional<std::uint64_t> seed;
    std::string out;  // --out; empty: LARGEN_OUT, then run.out
    bool resume = false;
    int threads = 1;
};

inline constexpr const char* kOutputEnv = "LARGEN_OUT";

// --out, then $LARGEN_OUT, then the config's run.out
std::filesystem::path output_directory(const RunOptions& options, const RunConfig& config);

// runs one verb; statistical misses are reported as WARN lines and flags in
// summary.tsv without changing the exit status
int run_verb(const RunOptions& options, std::ostream& out, std::ostream& err);

// plain-text report of a run directory; "status: no data" when nothing is there
std::string render_report(const std::filesystem::path& dir);

}  // namespace largen
