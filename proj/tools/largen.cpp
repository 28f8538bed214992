#include "largen/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"largen: lattice O(N) field experiments"};
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all");

    largen::RunOptions opt;
    std::uint64_t seed = 0;
    const std::vector<std::pair<std::string, std::string>> verbs = {
        {"gap-solve", "solve the gap equation on a (lambda, beta) grid"},
        {"gff-sample", "sample the free field and check Wick identities"},
        {"mcmc-run", "run HMC chains for the interacting measure"},
        {"thermo-integrate", "log partition function and relative entropy by coupling integration"},
        {"analyze", "recompute summaries from measurements.jsonl"},
        {"verify-identities", "deterministic identity and bound checks"},
        {"scan", "beta or N scans"},
        {"report", "print a run directory as text"},
    };
    for (const auto& [name, help] : verbs) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "experiment config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override run.seed");
        sub->add_option("--out", opt.out, "output directory (default $LARGEN_OUT, then run.out)");
        sub->add_flag("--resume", opt.resume, "continue chains from their checkpoints");
        sub->add_option("--threads", opt.threads, "parallel chains")->check(CLI::PositiveNumber);
        sub->callback([&opt, &seed, sub, name] {
            opt.verb = name;
            if (sub->count("--seed")) opt.seed = seed;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : largen::kExitConfigError;
    }
    return largen::run_verb(opt, std::cout, std::cerr);
}
