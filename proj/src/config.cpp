#include "largen/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace largen {

namespace {

enum class Type { Double, Int, UInt, String, DoubleList, IntList, Kind };

struct KeySpec {
    const char* name;
    Type type;
    const char* fallback;  // nullptr: required
};

// required keys carry a nullptr default; lambda and beta are only required by
// the experiments that use them (checked after parsing)
const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        {"experiment.kind", Type::Kind, nullptr},
        {"experiment.format_version", Type::Int, "1"},
        {"model.lambda", Type::Double, "1"},
        {"model.beta", Type::Double, "0"},
        {"model.N", Type::Int, "4"},
        {"model.L", Type::Double, "8"},
        {"model.n", Type::Int, "32"},
        {"model.mass", Type::Double, "0"},
        {"model.lambda_grid", Type::DoubleList, ""},
        {"model.beta_grid", Type::DoubleList, ""},
        {"model.N_grid", Type::IntList, ""},
        {"schedule.thermalization", Type::UInt, "200"},
        {"schedule.measurements", Type::UInt, "1000"},
        {"schedule.stride", Type::UInt, "1"},
        {"schedule.checkpoint_every", Type::UInt, "100"},
        {"schedule.target_acceptance", Type::Double, "0.775"},
        {"thermo.points", Type::Int, "8"},
        {"thermo.s_min_fraction", Type::Double, "0.015625"},
        {"run.seed", Type::UInt, "1"},
        {"run.chains", Type::Int, "1"},
        {"run.samples", Type::Int, "1000"},
        {"run.out", Type::String, "largen-out"},
        {"analysis.observable", Type::String, "quadratic"},
        {"analysis.amplitude", Type::Double, "1"},
        {"analysis.radius", Type::Double, "-1"},
        {"scan.kind", Type::String, "N"},
    };
    return keys;
}

const KeySpec* find_key(const std::string& name) {
    for (const KeySpec& k : registry())
        if (name == k.name) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string at_line(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

std::string nearest(const std::string& word, const std::vector<std::string>& options) {
    std::string best;
    int bd = 1 << 30;
    for (const std::string& o : options) {
        const int d = levenshtein(word, o);
        if (d < bd) bd = d, best = o;
    }
    return best;
}

double to_double(const std::string& key, const std::string& v, int line) {
    double x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError(at_line(line) + "key '" + key + "' expects a number, got '" + v + "'", line);
    return x;
}

long long to_int(const std::string& key, const std::string& v, int line, bool non_negative) {
    long long x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || (non_negative && x < 0))
        throw ConfigError(at_line(line) + "key '" + key + "' expects " +
                              (non_negative ? "a non-negative integer" : "an integer") + ", got '" + v + "'",
                          line);
    return x;
}

unsigned long long to_uint(const std::string& key, const std::string& v, int line) {
    unsigned long long x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || v[0] == '-' || r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError(at_line(line) + "key '" + key + "' expects a non-negative integer, got '" + v + "'", line);
    return x;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ExperimentKind to_kind(const std::string& v, int line) {
    static const std::vector<std::pair<std::string, ExperimentKind>> kinds = {
        {"gap-solve", ExperimentKind::GapSolve},
        {"gff-sample", ExperimentKind::GffSample},
        {"mcmc-run", ExperimentKind::McmcRun},
        {"thermo-integrate", ExperimentKind::ThermoIntegrate},
        {"analyze", ExperimentKind::Analyze},
        {"verify-identities", ExperimentKind::VerifyIdentities},
        {"scan", ExperimentKind::Scan},
    };
    std::vector<std::string> names;
    for (const auto& [name, k] : kinds) {
        if (v == name) return k;
        names.push_back(name);
    }
    throw ConfigError(at_line(line) + "unknown experiment kind '" + v + "' (did you mean '" + nearest(v, names) + "'?)",
                      line);
}

// parse one value into the config and return its canonical text
std::string apply(RunConfig& c, const KeySpec& spec, const std::string& v, int line) {
    const std::string key = spec.name;
    std::string canon;
    switch (spec.type) {
    case Type::Double: canon = format_double(to_double(key, v, line)); break;
    case Type::Int: canon = std::to_string(to_int(key, v, line, false)); break;
    case Type::UInt: canon = std::to_string(to_uint(key, v, line)); break;
    case Type::String: canon = v; break;
    case Type::Kind: canon = to_string(to_kind(v, line)); break;
    case Type::DoubleList:
    case Type::IntList: {
        std::string joined;
        for (const std::string& item : split_list(v)) {
            if (!joined.empty()) joined += ",";
            joined += spec.type == Type::DoubleList ? format_double(to_double(key, item, line))
                                                    : std::to_string(to_int(key, item, line, false));
        }
        canon = joined;
        break;
    }
    }

    const auto dbl = [&] { return to_double(key, canon, line); };
    const auto integer = [&] { return to_int(key, canon, line, false); };
    const auto dlist = [&] {
        std::vector<double> out;
        for (const std::string& s : split_list(canon)) out.push_back(to_double(key, s, line));
        return out;
    };
    if (key == "experiment.kind") c.kind = to_kind(canon, line);
    else if (key == "experiment.format_version") c.format_version = int(integer());
    else if (key == "model.lambda") c.lambda = dbl();
    else if (key == "model.beta") c.beta = dbl();
    else if (key == "model.N") c.N = int(integer());
    else if (key == "model.L") c.L = dbl();
    else if (key == "model.n") c.n = int(integer());
    else if (key == "model.mass") c.mass = dbl();
    else if (key == "model.lambda_grid") c.lambda_grid = dlist();
    else if (key == "model.beta_grid") c.beta_grid = dlist();
    else if (key == "model.N_grid") {
        c.N_grid.clear();
        for (const std::string& s : split_list(canon)) c.N_grid.push_back(int(to_int(key, s, line, false)));
    }
    else if (key == "schedule.thermalization") c.thermalization = std::stoull(canon);
    else if (key == "schedule.measurements") c.measurements = std::stoull(canon);
    else if (key == "schedule.stride") c.stride = std::stoull(canon);
    else if (key == "schedule.checkpoint_every") c.checkpoint_every = std::stoull(canon);
    else if (key == "schedule.target_acceptance") c.target_acceptance = dbl();
    else if (key == "thermo.points") c.thermo_points = int(integer());
    else if (key == "thermo.s_min_fraction") c.s_min_fraction = dbl();
    else if (key == "run.seed") c.seed = std::stoull(canon);
    else if (key == "run.chains") c.chains = int(integer());
    else if (key == "run.samples") c.samples = int(integer());
    else if (key == "run.out") c.out = canon;
    else if (key == "analysis.observable") c.observable = canon;
    else if (key == "analysis.amplitude") c.amplitude = dbl();
    else if (key == "analysis.radius") c.radius = dbl();
    else if (key == "scan.kind") c.scan = canon;
    return canon;
}

struct Entry {
    std::string value;
    int line;
};

void check_ranges(const RunConfig& c, const std::map<std::string, Entry>& given) {
    const auto line_of = [&](const std::string& k) {
        const auto it = given.find(k);
        return it == given.end() ? 0 : it->second.line;
    };
    const auto fail = [&](const std::string& k, const std::string& why) {
        throw ConfigError(at_line(line_of(k)) + "key '" + k + "' " + why, line_of(k));
    };
    if (c.format_version != 1) fail("experiment.format_version", "must be 1");
    if (c.lambda < 0) fail("model.lambda", "must be non-negative");
    if (c.beta < 0) fail("model.beta", "must be non-negative");
    if (c.N < 1) fail("model.N", "must be at least 1");
    if (!(c.L > 0)) fail("model.L", "must be positive");
    if (c.n < 4 || c.n % 2) fail("model.n", "must be even and at least 4");
    if (c.mass < 0) fail("model.mass", "must be non-negative");
    if (c.stride < 1) fail("schedule.stride", "must be at least 1");
    if (!(c.target_acceptance > 0 && c.target_acceptance < 1)) fail("schedule.target_acceptance", "must lie in (0, 1)");
    if (c.thermo_points < 1) fail("thermo.points", "must be at least 1");
    if (!(c.s_min_fraction > 0 && c.s_min_fraction <= 1)) fail("thermo.s_min_fraction", "must lie in (0, 1]");
    if (c.chains < 1) fail("run.chains", "must be at least 1");
    if (c.samples < 1) fail("run.samples", "must be at least 1");
    for (int N : c.N_grid)
        if (N < 1) fail("model.N_grid", "entries must be at least 1");
    if (c.scan != "N" && c.scan != "beta") fail("scan.kind", "must be N or beta");

    const bool needs_coupling = c.kind == ExperimentKind::GapSolve || c.kind == ExperimentKind::McmcRun ||
                                c.kind == ExperimentKind::ThermoIntegrate || c.kind == ExperimentKind::Scan;
    if (needs_coupling) {
        for (const char* k : {"model.lambda", "model.beta"})
            if (!given.count(k))
                throw ConfigError("missing required key '" + std::string(k) + "' for " + to_string(c.kind), 0);
    }
    if (c.kind == ExperimentKind::ThermoIntegrate && !(c.lambda > 0)) fail("model.lambda", "must be positive for thermo-integrate");
}

RunConfig resolve(const std::map<std::string, Entry>& given) {
    RunConfig c;
    for (const KeySpec& spec : registry()) {
        const auto it = given.find(spec.name);
        if (it == given.end()) {
            if (!spec.fallback) throw ConfigError("missing required key '" + std::string(spec.name) + "'", 0);
            c.resolved[spec.name] = apply(c, spec, spec.fallback, 0);
        } else {
            c.resolved[spec.name] = apply(c, spec, it->second.value, it->second.line);
        }
    }
    check_ranges(c, given);
    c.hash = fnv1a(canonical_text(c));
    return c;
}

}  // namespace

std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::GapSolve: return "gap-solve";
    case ExperimentKind::GffSample: return "gff-sample";
    case ExperimentKind::McmcRun: return "mcmc-run";
    case ExperimentKind::ThermoIntegrate: return "thermo-integrate";
    case ExperimentKind::Analyze: return "analyze";
    case ExperimentKind::VerifyIdentities: return "verify-identities";
    case ExperimentKind::Scan: return "scan";
    }
    return "?";
}

int levenshtein(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = int(i);
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RunConfig parse_config(const std::string& text) {
    std::map<std::string, Entry> given;
    std::vector<std::string> sections, all_keys;
    for (const KeySpec& k : registry()) {
        const std::string name = k.name;
        const std::string sec = name.substr(0, name.find('.'));
        if (std::find(sections.begin(), sections.end(), sec) == sections.end()) sections.push_back(sec);
        all_keys.push_back(name);
    }

    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find_first_of("#;");
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(at_line(line) + "malformed section header '" + s + "'", line);
            section = trim(s.substr(1, s.size() - 2));
            if (std::find(sections.begin(), sections.end(), section) == sections.end())
                throw ConfigError(at_line(line) + "unknown section '" + section + "' (did you mean '" +
                                      nearest(section, sections) + "'?)",
                                  line);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(at_line(line) + "expected key = value, got '" + s + "'", line);
        if (section.empty()) throw ConfigError(at_line(line) + "key outside any [section]", line);
        const std::string key = trim(s.substr(0, eq));
        const std::string full = section + "." + key;
        if (!find_key(full)) {
            std::vector<std::string> local;
            for (const std::string& k : all_keys)
                if (k.rfind(section + ".", 0) == 0) local.push_back(k.substr(section.size() + 1));
            const std::string near = nearest(key, local);
            const std::string near_any = nearest(full, all_keys);
            const std::string hint = levenshtein(key, near) <= levenshtein(full, near_any) ? near : near_any;
            throw ConfigError(at_line(line) + "unknown key '" + key + "' in [" + section + "] (did you mean '" + hint +
                                  "'?)",
                              line);
        }
        if (given.count(full))
            throw ConfigError(at_line(line) + "duplicate key '" + full + "' (first set on line " +
                                  std::to_string(given[full].line) + ")",
                              line);
        given[full] = {trim(s.substr(eq + 1)), line};
    }
    return resolve(given);
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'", 0);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (!find_key(key)) throw ConfigError("unknown key '" + key + "'", 0);
    std::map<std::string, Entry> given;
    for (const auto& [k, v] : c.resolved) given[k] = {v, 0};
    given[key] = {value, 0};
    c = resolve(given);
}

std::string canonical_text(const RunConfig& c) {
    std::string out;
    for (const auto& [k, v] : c.resolved)
        if (k != "run.out") out += k + " = " + v + "\n";
    return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace largen
