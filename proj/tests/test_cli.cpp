#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "largen/config.hpp"
#include "largen/io.hpp"
#include "largen/mcmc.hpp"
#include "largen/runner.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace largen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("largen-test-" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string cli() {
    const char* p = std::getenv("LARGEN_CLI");
    return p ? p : "";
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = cli() + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return read_text(p); }

const char* kMcmc = R"(# small HMC run
[experiment]
kind = mcmc-run
[model]
lambda = 1
beta = 0
N = 3
L = 2
n = 8
[schedule]
thermalization = 100
measurements = 1500
checkpoint_every = 40
[run]
seed = 9
chains = 2
)";

}  // namespace

TEST_CASE("config defaults resolve and hash stably") {
    const RunConfig a = parse_config("[experiment]\nkind = gap-solve\n[model]\nlambda = 2\nbeta = 0.5\n");
    CHECK(a.kind == ExperimentKind::GapSolve);
    CHECK(a.lambda == 2.0);
    CHECK(a.N == 4);
    CHECK(std::stod(a.resolved.at("schedule.target_acceptance")) == 0.775);
    // comments, spacing and key order do not change the hash
    const RunConfig b =
        parse_config("; header\n[model]\n beta=0.5 \nlambda = 2 # inline\n[experiment]\nkind = gap-solve\n");
    CHECK(a.hash == b.hash);
    // the output directory is not part of the identity
    const RunConfig c = parse_config("[experiment]\nkind = gap-solve\n[model]\nlambda = 2\nbeta = 0.5\n[run]\nout = x\n");
    CHECK(a.hash == c.hash);
    const RunConfig d = parse_config("[experiment]\nkind = gap-solve\n[model]\nlambda = 2\nbeta = 0.25\n");
    CHECK(a.hash != d.hash);
    CHECK(hash_hex(a.hash).size() == 16);
}

TEST_CASE("config errors carry line numbers and suggestions") {
    try {
        parse_config("[experiment]\nkind = gap-solve\n[model]\nlamda = 1\nbeta = 0\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.line == 4);
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
    try {
        parse_config("[experiment]\nkind = gff-sample\n[model]\nN = four\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.line == 4);
        CHECK(std::string(e.what()).find("'model.N' expects an integer") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("[experiment]\nkind = mcmc-run\n[model]\nlambda = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nlambda = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nkind = gap-solve\nkind = scan\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[experiment]\nkind = gap-solve\n[model]\nlambda = -1\nbeta = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[experimnt]\nkind = gap-solve\n"), ConfigError);
    CHECK(levenshtein("lamda", "lambda") == 1);
}

TEST_CASE("seed override rehashes") {
    RunConfig a = parse_config("[experiment]\nkind = gff-sample\n");
    const std::uint64_t h = a.hash;
    set_key(a, "run.seed", "42");
    CHECK(a.seed == 42);
    CHECK(a.hash != h);
}

TEST_CASE("measurement records round trip") {
    const StreamRecord r{"0123456789abcdef", "delta_h", 17, 0.1 + 1e-17, 0.25, 123.5};
    const StreamRecord s = parse_record(format_record(r));
    CHECK(s.config_hash == r.config_hash);
    CHECK(s.observable == r.observable);
    CHECK(s.sweep == r.sweep);
    CHECK(s.value == r.value);
    CHECK(*s.error == *r.error);
    CHECK(*s.n_eff == *r.n_eff);
    const StreamRecord inf = parse_record(format_record({"h", "delta_h", 1, INFINITY, {}, {}}));
    CHECK(std::isinf(inf.value));
    CHECK_FALSE(inf.error.has_value());
    CHECK_THROWS(parse_record("{\"schema_version\": 99}"));
    CHECK_THROWS(parse_record("{\"observable\": "));
}

TEST_CASE("torn stream lines are dropped on truncation") {
    const fs::path dir = scratch("torn");
    {
        StreamWriter w(dir / "s.jsonl", "h", false);
        for (std::uint64_t k = 0; k < 10; ++k) w.write(StreamRecord{"h", "x", k, double(k), {}, {}});
    }
    {
        std::FILE* f = std::fopen((dir / "s.jsonl").c_str(), "a");
        std::fputs("{\"schema_version\":1,\"obs", f);
        std::fclose(f);
    }
    truncate_stream(dir / "s.jsonl", 6);
    const auto recs = read_stream(dir / "s.jsonl");
    REQUIRE(recs.size() == 6);
    CHECK(recs.back().sweep == 5);
}

TEST_CASE("checkpoints round trip byte for byte") {
    const Torus torus(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.0, 3, torus);
    const LatticeModel model = beta_form(p);
    ChainState st = init_chain(model, 5, 1);
    run_chain(st, model, Schedule{20, 30, 1, 0.775}, {}, [](const MeasurementRecord&) {}, 37);
    const Checkpoint c{kCheckpointVersion, 0xfeedbeefULL, Scheme::LatticeTadpole, 1.0, p.mass, st};
    const auto bytes = encode_checkpoint(c);
    const Checkpoint d = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(d) == bytes);
    CHECK(d.state.sweep == 37);
    CHECK(d.state.field.values == st.field.values);
    CHECK(d.state.step_size == st.step_size);
    CHECK(d.state.field.torus == torus);

    auto corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x01;
    CHECK_THROWS(decode_checkpoint(corrupt));
    CHECK_THROWS(decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3)));
}

TEST_CASE("output directory precedence") {
    RunConfig cfg = parse_config("[experiment]\nkind = gff-sample\n[run]\nout = from-config\n");
    RunOptions opt;
    ::unsetenv(kOutputEnv);
    CHECK(output_directory(opt, cfg) == "from-config");
    ::setenv(kOutputEnv, "from-env", 1);
    CHECK(output_directory(opt, cfg) == "from-env");
    opt.out = "from-flag";
    CHECK(output_directory(opt, cfg) == "from-flag");
    ::unsetenv(kOutputEnv);
}

TEST_CASE("in-process verbs") {
    const fs::path dir = scratch("inproc");
    std::ostringstream out, err;
    RunOptions opt{"verify-identities", "", {}, (dir / "vi").string(), false, 1};
    CHECK(run_verb(opt, out, err) == kExitOk);
    CHECK(out.str().find("failures=none") != std::string::npos);

    write_text(dir / "gap.ini", "[experiment]\nkind = gap-solve\n[model]\nlambda = 3\nbeta = 0.2\n");
    opt = {"gap-solve", (dir / "gap.ini").string(), {}, (dir / "gap").string(), false, 1};
    CHECK(run_verb(opt, out, err) == kExitOk);
    const Table t = parse_table(read_text(dir / "gap" / "summary.tsv"));
    REQUIRE(t.rows.size() == 1);
    CHECK(t.header.front() == "config_hash=" + hash_hex(load_config((dir / "gap.ini").string()).hash));

    // verb and config kind must agree
    opt.verb = "mcmc-run";
    CHECK(run_verb(opt, out, err) == kExitConfigError);
    opt.verb = "frobnicate";
    CHECK(run_verb(opt, out, err) == kExitConfigError);

    std::ostringstream rep;
    opt = {"report", "", {}, (dir / "nothing").string(), false, 1};
    CHECK(run_verb(opt, rep, err) == kExitOk);
    CHECK(rep.str().find("status: no data") != std::string::npos);
}

TEST_CASE("command line exit codes") {
    if (cli().empty()) {
        MESSAGE("LARGEN_CLI not set; skipping");
        return;
    }
    const fs::path dir = scratch("cli");
    CHECK(run_cli("verify-identities --out " + (dir / "vi").string(), dir / "vi.log") == 0);
    CHECK(slurp(dir / "vi.log").find("failed=0") != std::string::npos);

    CHECK(run_cli("report --out " + (dir / "empty").string(), dir / "r.log") == 0);
    CHECK(slurp(dir / "r.log").find("status: no data") != std::string::npos);

    write_text(dir / "bad.ini", "[experiment]\nkind = gff-sample\n[model]\nlamda = 1\n");
    CHECK(run_cli("gff-sample --config " + (dir / "bad.ini").string() + " --out " + (dir / "bad").string(),
                  dir / "bad.log") == 2);
    const std::string msg = slurp(dir / "bad.log");
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("did you mean 'lambda'") != std::string::npos);

    CHECK(run_cli("no-such-verb", dir / "nv.log") == 2);
    CHECK(run_cli("gff-sample --config /nonexistent.ini", dir / "ne.log") == 2);
    CHECK(run_cli("mcmc-run", dir / "nc.log") == 2);

    write_text(dir / "gff.ini", "[experiment]\nkind = gff-sample\n[model]\nmass = 1\nN = 2\nL = 2\nn = 8\n[run]\nsamples = 200\n");
    CHECK(run_cli("gff-sample --config " + (dir / "gff.ini").string() + " --seed 4 --out " + (dir / "gff").string(),
                  dir / "gff.log") == 0);
    CHECK(fs::exists(dir / "gff" / "measurements.jsonl"));
    CHECK(run_cli("analyze --out " + (dir / "gff").string(), dir / "an.log") == 0);
    CHECK(fs::exists(dir / "gff" / "analysis.tsv"));
    CHECK(run_cli("report --out " + (dir / "gff").string(), dir / "rep.log") == 0);
    CHECK(slurp(dir / "rep.log").find("phi2") != std::string::npos);
}

TEST_CASE("killed chains resume to the identical stream") {
    if (cli().empty()) {
        MESSAGE("LARGEN_CLI not set; skipping");
        return;
    }
    const fs::path dir = scratch("resume");
    write_text(dir / "mcmc.ini", kMcmc);
    const std::string cfg = (dir / "mcmc.ini").string();
    REQUIRE(run_cli("mcmc-run --config " + cfg + " --out " + (dir / "ref").string(), dir / "ref.log") == 0);
    const std::string reference = slurp(dir / "ref" / "measurements.jsonl");

    // SIGKILL at several points, resuming each time
    const fs::path b = dir / "killed";
    for (int delay_ms : {40, 90, 150, 220}) {
        std::fflush(stdout);
        std::fflush(stderr);
        const pid_t pid = ::fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            if (!::freopen("/dev/null", "w", stdout)) ::_exit(126);
            if (!::freopen("/dev/null", "w", stderr)) ::_exit(126);
            const std::string out = b.string();
            if (fs::exists(b))
                ::execl(cli().c_str(), "largen", "mcmc-run", "--config", cfg.c_str(), "--out", out.c_str(), "--resume",
                        static_cast<char*>(nullptr));
            else
                ::execl(cli().c_str(), "largen", "mcmc-run", "--config", cfg.c_str(), "--out", out.c_str(),
                        static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::usleep(delay_ms * 1000);
        ::kill(pid, SIGKILL);
        int status = 0;
        ::waitpid(pid, &status, 0);
    }
    REQUIRE(run_cli("mcmc-run --config " + cfg + " --resume --out " + b.string(), dir / "b.log") == 0);
    CHECK(slurp(b / "measurements.jsonl") == reference);

    // a checkpoint from a different config is refused
    write_text(dir / "other.ini", std::string(kMcmc) + "[thermo]\npoints = 5\n");
    CHECK(run_cli("mcmc-run --config " + (dir / "other.ini").string() + " --resume --out " + b.string(),
                  dir / "o.log") == 2);
}
