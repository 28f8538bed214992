#pragma once

// Run configuration: an INI-style text format with [sections] and key = value
// lines. Every key has a type and a default; unknown keys, malformed values and
// missing required keys are reported with their line numbers.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace largen {

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
    int line;  // 0 when the problem is not tied to a line
};

enum class ExperimentKind { GapSolve, GffSample, McmcRun, ThermoIntegrate, Analyze, VerifyIdentities, Scan };

std::string to_string(ExperimentKind k);

struct RunConfig {
    int format_version = 1;
    ExperimentKind kind = ExperimentKind::GapSolve;

    double lambda = 1.0, beta = 0.0;
    int N = 4;
    double L = 8.0;
    int n = 32;
    double mass = 0.0;  // 0: use the gap mass
    std::vector<double> lambda_grid, beta_grid;
    std::vector<int> N_grid;

    std::uint64_t thermalization = 200, measurements = 1000, stride = 1, checkpoint_every = 100;
    double target_acceptance = 0.775;

    int thermo_points = 8;
    double s_min_fraction = 1.0 / 64;

    std::uint64_t seed = 1;
    int chains = 1;
    int samples = 1000;
    std::string out = "largen-out";

    std::string observable = "quadratic";
    double amplitude = 1.0;
    double radius = -1.0;

    std::string scan = "N";

    // every key with its resolved value, defaults included
    std::map<std::string, std::string> resolved;
    std::uint64_t hash = 0;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// override one key after parsing (used for --seed); re-resolves and rehashes
void set_key(RunConfig& config, const std::string& key, const std::string& value);

// sorted "section.key = value" lines of the resolved config, run.out excluded
std::string canonical_text(const RunConfig& config);
std::uint64_t fnv1a(const std::string& bytes);
std::string hash_hex(std::uint64_t h);

// plain edit distance, used for "did you mean" suggestions
int levenshtein(const std::string& a, const std::string& b);

}  // namespace largen
