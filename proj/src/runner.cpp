#include "largen/runner.hpp"

#include "largen/analysis.hpp"
#include "largen/errors.hpp"
#include "largen/gap.hpp"
#include "largen/gff.hpp"
#include "largen/io.hpp"
#include "largen/mcmc.hpp"
#include "largen/rng.hpp"
#include "largen/wick.hpp"

#include <cmath>
#include <cstdlib>
#include <future>
#include <map>
#include <numbers>
#include <sstream>

namespace largen {

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    int code = kExitOk;
    std::vector<std::string> flags;     // statistical warnings
    std::vector<std::string> failures;  // identity violations

    void warn(const std::string& f) { flags.push_back(f); }
    void fail(const std::string& f) {
        failures.push_back(f);
        code = kExitIdentityViolation;
    }
};

struct Context {
    RunConfig cfg;
    RunOptions opt;
    fs::path dir;
    std::string hash;
    std::ostream& out;
    std::ostream& err;
};

std::string num(double x) { return format_number(x); }

Table new_table(const Context& c, std::vector<std::string> columns) {
    Table t;
    t.header = {"config_hash=" + c.hash, "experiment=" + c.opt.verb, "schema_version=" + std::to_string(kSchemaVersion)};
    t.columns = std::move(columns);
    return t;
}

void finish_table(Table& t, const Outcome& o) {
    std::string flags;
    for (const std::string& f : o.flags) flags += (flags.empty() ? "" : ",") + f;
    std::string fails;
    for (const std::string& f : o.failures) fails += (fails.empty() ? "" : ",") + f;
    t.header.push_back(std::string("status=") + (o.failures.empty() ? (o.flags.empty() ? "ok" : "warn") : "fail"));
    t.header.push_back("flags=" + (flags.empty() ? std::string("none") : flags));
    t.header.push_back("failures=" + (fails.empty() ? std::string("none") : fails));
}

void emit(const Context& c, const std::string& name, Table t, const Outcome& o) {
    finish_table(t, o);
    const std::string text = format_table(t);
    write_text(c.dir / name, text);
    c.out << text;
    for (const std::string& f : o.flags) c.err << "WARN " << f << "\n";
    for (const std::string& f : o.failures) c.err << "FAIL " << f << "\n";
}

void write_summary_records(const Context& c, const std::vector<StreamRecord>& records) {
    StreamWriter w(c.dir / "summary.jsonl", c.hash, false);
    for (const StreamRecord& r : records) w.write(r);
}

StreamRecord summary_record(const Context& c, const std::string& name, std::uint64_t sweep, const SeriesSummary& s) {
    return {c.hash, name, sweep, s.mean, s.std_error, s.n_eff};
}

Torus torus_of(const RunConfig& cfg) { return Torus(cfg.L, cfg.n); }

ModelParams params_of(const RunConfig& cfg) {
    if (cfg.lambda > 0) return make_model_params(cfg.lambda, cfg.beta, cfg.N, torus_of(cfg));
    return make_free_params(cfg.mass > 0 ? cfg.mass : 1.0, cfg.N, torus_of(cfg));
}

Schedule schedule_of(const RunConfig& cfg) {
    return {cfg.thermalization, cfg.measurements, cfg.stride, cfg.target_acceptance};
}

std::vector<double> grid_or(const std::vector<double>& g, double v) { return g.empty() ? std::vector<double>{v} : g; }

// ---------------------------------------------------------------- gap-solve

int gap_solve(Context& c) {
    Outcome o;
    Table t = new_table(c, {"lambda", "beta", "N", "L", "n", "m_star", "m_LN", "m_lattice", "res_star", "res_LN",
                            "res_lattice", "tail_LN"});
    StreamWriter w(c.dir / "measurements.jsonl", c.hash, false);
    std::uint64_t row = 0;
    for (double lambda : grid_or(c.cfg.lambda_grid, c.cfg.lambda))
        for (double beta : grid_or(c.cfg.beta_grid, c.cfg.beta)) {
            const GapSolution s = solve_gap_continuum(lambda, beta);
            const GapSolution f = solve_gap_finite(lambda, beta, c.cfg.N, c.cfg.L);
            const GapSolution l = solve_gap_lattice(lambda, beta, c.cfg.N, torus_of(c.cfg));
            const auto [lo, hi] = continuum_log_mass_bounds(lambda, beta);
            const double ln_m = 0.5 * s.log_m_squared;
            if (!(lo <= ln_m && ln_m <= hi)) o.fail("mass_bounds[lambda=" + num(lambda) + ",beta=" + num(beta) + "]");
            for (const GapSolution* g : {&s, &f, &l})
                if (!(std::abs(g->residual) < 1e-10)) o.fail("gap_residual[lambda=" + num(lambda) + ",beta=" + num(beta) + "]");
            t.rows.push_back({num(lambda), num(beta), std::to_string(c.cfg.N), num(c.cfg.L), std::to_string(c.cfg.n),
                              num(std::sqrt(s.m_squared)), num(std::sqrt(f.m_squared)), num(std::sqrt(l.m_squared)),
                              num(s.residual), num(f.residual), num(l.residual), num(f.truncation_certificate)});
            w.write(StreamRecord{c.hash, "m_star", row, std::sqrt(s.m_squared), std::abs(s.residual), {}});
            w.write(StreamRecord{c.hash, "m_LN", row, std::sqrt(f.m_squared), std::abs(f.residual), {}});
            w.write(StreamRecord{c.hash, "m_lattice", row, std::sqrt(l.m_squared), std::abs(l.residual), {}});
            ++row;
        }
    emit(c, "summary.tsv", t, o);
    return o.code;
}

// --------------------------------------------------------------- gff-sample

int gff_sample(Context& c) {
    Outcome o;
    const Torus torus = torus_of(c.cfg);
    const double m = c.cfg.mass > 0 ? c.cfg.mass
                                    : std::sqrt(solve_gap_lattice(c.cfg.lambda, c.cfg.beta, c.cfg.N, torus).m_squared);
    const ModelParams p = make_free_params(m, c.cfg.N, torus);
    const SpectralCovariance cov = make_covariance(m, torus, Symbol::Lattice);
    const WickContext ctx{wick_counterterm(p), c.cfg.N, {Scheme::LatticeTadpole, m}};
    const double bound = action_lower_bound(ctx, torus.area());
    StreamWriter w(c.dir / "measurements.jsonl", c.hash, false);
    std::map<std::string, std::vector<double>> series;
    for (int k = 0; k < c.cfg.samples; ++k) {
        Stream rng(c.cfg.seed, 0, std::uint64_t(k));
        const FieldConfig f = sample_gff(cov, c.cfg.N, rng);
        const double F = quartic_action(f, ctx);
        if (F < bound - 1e-9 * std::abs(bound)) o.fail("action_bound[sample=" + std::to_string(k) + "]");
        const std::vector<std::pair<std::string, double>> vals = {
            {"phi2", f.norm2().mean()}, {"wick2", wick_norm2(f, ctx).mean()}, {"F", F}};
        for (const auto& [name, v] : vals) {
            series[name].push_back(v);
            w.write(MeasurementRecord{name, std::uint64_t(k), v});
        }
    }
    Table t = new_table(c, {"observable", "mean", "error", "tau_int", "n_eff", "exact"});
    std::vector<StreamRecord> summary;
    const std::map<std::string, double> exact = {{"phi2", c.cfg.N * ctx.C}, {"wick2", 0.0}, {"F", 0.0}};
    for (const auto& [name, v] : series) {
        const SeriesSummary s = summarize_series(v);
        summary.push_back(summary_record(c, name, v.size(), s));
        t.rows.push_back({name, num(s.mean), num(s.std_error), num(s.tau_int), num(s.n_eff), num(exact.at(name))});
        if (std::abs(s.mean - exact.at(name)) > 4 * s.std_error) o.warn("stat_mean_" + name);
    }
    write_summary_records(c, summary);
    t.header.push_back("mass=" + num(m));
    emit(c, "summary.tsv", t, o);
    return o.code;
}

// ----------------------------------------------------------------- mcmc-run

struct ChainResult {
    AcceptanceStats acceptance;
    double step_size;
    bool bound_ok = true;
};

fs::path chain_stream(const fs::path& dir, int k) { return dir / ("measurements-chain" + std::to_string(k) + ".jsonl"); }
fs::path chain_checkpoint(const fs::path& dir, int k) { return dir / ("checkpoint-chain" + std::to_string(k) + ".bin"); }

ChainResult run_one_chain(const Context& c, const ModelParams& p, const LatticeModel& model, int k) {
    const Schedule sch = schedule_of(c.cfg);
    const fs::path stream = chain_stream(c.dir, k), ckpt = chain_checkpoint(c.dir, k);
    std::optional<ChainState> state;
    const bool resumed = c.opt.resume && fs::exists(ckpt);
    if (resumed) {
        Checkpoint cp = load_checkpoint(ckpt);
        if (cp.config_hash != c.cfg.hash)
            throw ConfigError("checkpoint " + ckpt.string() + " was written by a different config (hash " +
                                  hash_hex(cp.config_hash) + ")",
                              0);
        truncate_stream(stream, cp.state.sweep);
        state = std::move(cp.state);
    } else {
        state = init_chain(model, c.cfg.seed, std::uint64_t(k));
    }
    StreamWriter w(stream, c.hash, resumed);

    const WickContext ctx{wick_counterterm(p), p.N, {Scheme::LatticeTadpole, p.mass}};
    const double bound = action_lower_bound(ctx, p.torus.area());
    ChainResult r;
    const std::vector<Observable> obs = {
        {"F", [&](const FieldConfig& f) {
             const double F = quartic_action(f, ctx);
             if (F < bound - 1e-9 * std::abs(bound)) r.bound_ok = false;
             return F;
         }},
        {"phi2", [](const FieldConfig& f) { return f.norm2().mean(); }},
        {"action", [&](const FieldConfig& f) { return lattice_action(f, model); }},
    };
    const std::uint64_t total = sch.thermalization + sch.measurements;
    const std::uint64_t every = std::max<std::uint64_t>(1, c.cfg.checkpoint_every);
    while (state->sweep < total) {
        run_chain(*state, model, sch, obs, [&](const MeasurementRecord& m) { w.write(m); }, every);
        save_checkpoint(ckpt, {kCheckpointVersion, c.cfg.hash, Scheme::LatticeTadpole, p.scheme.reference_mass, p.mass, *state});
    }
    r.acceptance = state->acceptance;
    r.step_size = state->step_size;
    return r;
}

int mcmc_run(Context& c) {
    Outcome o;
    const ModelParams p = params_of(c.cfg);
    const LatticeModel model = c.cfg.lambda > 0 ? beta_form(p) : wick_form(p, 0.0);
    std::vector<ChainResult> results(c.cfg.chains);
    {
        std::vector<std::future<ChainResult>> jobs;
        int next = 0;
        while (next < c.cfg.chains || !jobs.empty()) {
            while (next < c.cfg.chains && int(jobs.size()) < std::max(1, c.opt.threads)) {
                const int k = next++;
                jobs.push_back(std::async(std::launch::async, [&, k] { return run_one_chain(c, p, model, k); }));
            }
            // chains finish in launch order closely enough; join the oldest
            results[next - int(jobs.size())] = jobs.front().get();
            jobs.erase(jobs.begin());
        }
    }

    // single-writer merge of the per-chain streams
    std::vector<StreamRecord> merged;
    std::map<std::string, std::vector<double>> series;
    std::vector<MeasurementRecord> dh;
    for (int k = 0; k < c.cfg.chains; ++k)
        for (StreamRecord r : read_stream(chain_stream(c.dir, k))) {
            if (r.observable != "thermalization_action") series[r.observable].push_back(r.value);
            if (r.observable == "delta_h") dh.push_back({r.observable, r.sweep, r.value});
            r.observable = "chain" + std::to_string(k) + "/" + r.observable;
            merged.push_back(r);
        }
    {
        StreamWriter w(c.dir / "measurements.jsonl", c.hash, false);
        for (const StreamRecord& r : merged) w.write(r);
    }

    Table t = new_table(c, {"observable", "mean", "error", "tau_int", "n_eff"});
    std::vector<StreamRecord> summary;
    for (const auto& [name, v] : series) {
        if (v.size() < 2) continue;
        const SeriesSummary s = summarize_series(v);
        summary.push_back(summary_record(c, name, v.size(), s));
        t.rows.push_back({name, num(s.mean), num(s.std_error), num(s.tau_int), num(s.n_eff)});
    }
    std::uint64_t proposed = 0, accepted = 0, nonfinite = 0;
    for (const ChainResult& r : results) {
        proposed += r.acceptance.proposed;
        accepted += r.acceptance.accepted;
        nonfinite += r.acceptance.nonfinite;
        if (!r.bound_ok) o.fail("action_bound");
    }
    if (dh.size() >= 2) {
        const Estimate e = exp_minus_delta_h(dh);
        t.rows.push_back({"exp_minus_delta_h", num(e.value), num(e.error), "-", "-"});
        summary.push_back({c.hash, "exp_minus_delta_h", dh.size(), e.value, e.error, {}});
        if (std::abs(e.value - 1.0) > 3 * e.error) o.warn("stat_exp_minus_delta_h");
    }
    if (nonfinite > 0) o.warn("nonfinite_energy");
    write_summary_records(c, summary);
    t.header.push_back("mass=" + num(p.mass));
    t.header.push_back("acceptance=" + num(proposed ? double(accepted) / proposed : 0.0));
    t.header.push_back("step_size=" + num(results.front().step_size));
    emit(c, "summary.tsv", t, o);
    return o.code;
}

// --------------------------------------------------------- thermo-integrate

int thermo_integrate(Context& c) {
    Outcome o;
    const ModelParams p = params_of(c.cfg);
    const std::vector<double> grid = coupling_grid(p.lambda, c.cfg.thermo_points, c.cfg.s_min_fraction);
    const ThermoResult th = thermo_integrate_logZ(p, grid, schedule_of(c.cfg), c.cfg.seed);
    const EntropyResult h = relative_entropy_from(th, p);
    StreamWriter w(c.dir / "measurements.jsonl", c.hash, false);
    Table t = new_table(c, {"node", "coupling", "mean_F", "error", "tau_int", "log_z", "log_z_error"});
    for (size_t k = 0; k < th.nodes.size(); ++k) {
        const ThermoNode& nd = th.nodes[k];
        const double neff = nd.coupling == 0 ? 0.0 : c.cfg.measurements / (2 * nd.tau_int);
        w.write(StreamRecord{c.hash, "coupling", k, nd.coupling, {}, {}});
        w.write(StreamRecord{c.hash, "mean_F", k, nd.mean_F.value, nd.mean_F.error, neff});
        w.write(StreamRecord{c.hash, "log_z", k, th.log_z[k].value, th.log_z[k].error, {}});
        t.rows.push_back({std::to_string(k), num(nd.coupling), num(nd.mean_F.value), num(nd.mean_F.error),
                          num(nd.tau_int), num(th.log_z[k].value), num(th.log_z[k].error)});
        if (th.log_z[k].value < -3 * th.log_z[k].error) o.warn("stat_jensen_log_z[node=" + std::to_string(k) + "]");
    }
    if (th.needs_refinement) o.warn("grid_needs_refinement");
    if (h.H.value < -3 * h.H.error) o.warn("stat_entropy_negative");
    write_summary_records(c, {{c.hash, "log_z_total", grid.size(), th.log_z_total.value, th.log_z_total.error, {}},
                              {c.hash, "H", grid.size(), h.H.value, h.H.error, {}},
                              {c.hash, "H_per_volume", grid.size(), h.H_per_volume.value, h.H_per_volume.error, {}}});
    t.header.push_back("mass=" + num(p.mass));
    t.header.push_back("log_z_total=" + num(th.log_z_total.value) + "+-" + num(th.log_z_total.error));
    t.header.push_back("H=" + num(h.H.value) + "+-" + num(h.H.error));
    t.header.push_back("H_per_volume=" + num(h.H_per_volume.value) + "+-" + num(h.H_per_volume.error));
    emit(c, "summary.tsv", t, o);
    return o.code;
}

// ------------------------------------------------------------------ analyze

Table stream_summary_table(const std::vector<StreamRecord>& recs, std::vector<std::string> header) {
    std::map<std::string, std::vector<double>> series;
    for (const StreamRecord& r : recs)
        if (!r.error) series[r.observable].push_back(r.value);
    Table t;
    t.header = std::move(header);
    t.columns = {"observable", "count", "mean", "error", "tau_int", "n_eff"};
    for (const auto& [name, v] : series) {
        if (v.size() < 2) continue;
        const SeriesSummary s = summarize_series(v);
        t.rows.push_back({name, std::to_string(v.size()), num(s.mean), num(s.std_error), num(s.tau_int), num(s.n_eff)});
    }
    return t;
}

int analyze(Context& c) {
    const fs::path stream = c.dir / "measurements.jsonl";
    if (!fs::exists(stream)) {
        c.out << "status: no data (" << stream.string() << " not found)\n";
        return kExitRuntimeError;
    }
    const std::vector<StreamRecord> recs = read_stream(stream);
    std::string source = recs.empty() ? std::string("none") : recs.front().config_hash;
    Table t = stream_summary_table(recs, {"config_hash=" + c.hash, "source_hash=" + source,
                                          "schema_version=" + std::to_string(kSchemaVersion)});
    Outcome o;
    emit(c, "analysis.tsv", t, o);
    return kExitOk;
}

// -------------------------------------------------------- verify-identities

int verify_identities(Context& c) {
    Outcome o;
    Table t = new_table(c, {"suite", "passed", "failed"});
    const auto suite = [&](const std::string& name, const std::vector<bool>& checks) {
        int pass = 0, fail = 0;
        for (bool b : checks) (b ? pass : fail)++;
        t.rows.push_back({name, std::to_string(pass), std::to_string(fail)});
        if (fail) o.fail(name);
    };

    std::vector<bool> poisson;
    for (double m : {0.5, 1.0})
        for (double L : {1.0, 2.0, 4.0}) poisson.push_back(std::abs(verify_poisson_identity(m, L).residual) < 1e-8);
    suite("poisson", poisson);

    std::vector<bool> riemann;
    for (double L : {1.0, 2.0, 4.0, 8.0})
        for (double m : {0.25, 0.5}) {
            const RiemannReport r = verify_riemann_bounds(m, L);
            for (const RiemannCheck* k : {&r.paired, &r.power_43}) {
                riemann.push_back(k->lower_holds);
                riemann.push_back(k->gap_holds);
            }
        }
    suite("riemann", riemann);

    std::vector<bool> nelson;
    for (double lambda : {std::exp(1.0), 10.0, 100.0}) nelson.push_back(verify_nelson_integral_bound(lambda).holds);
    suite("nelson", nelson);

    std::vector<bool> talagrand;
    for (int k = 0; k < 100; ++k) {
        Stream rng(c.cfg.seed, 1, std::uint64_t(k));
        const int d = 1 + int(rng.uniform() * 8);
        Eigen::VectorXd a(d), r(d);
        for (int i = 0; i < d; ++i) {
            a(i) = rng.normal();
            r(i) = std::exp(1.5 * rng.normal());
        }
        const TalagrandResult res = talagrand_gaussian_check(a, r);
        talagrand.push_back(res.w2_sq <= res.two_h * (1 + 1e-12));
        const TalagrandResult shift = talagrand_gaussian_check(a, Eigen::VectorXd::Ones(d));
        talagrand.push_back(std::abs(shift.w2_sq - shift.two_h) <= 1e-12 * std::max(1.0, shift.two_h));
    }
    suite("talagrand", talagrand);

    // collapsed :|Phi|^4: against the product of Hermite polynomials
    std::vector<bool> hermite_checks;
    for (int k = 0; k < 200; ++k) {
        Stream rng(c.cfg.seed, 2, std::uint64_t(k));
        const int N = 1 + int(rng.uniform() * 6);
        const double C = 0.1 + 2 * rng.uniform();
        std::vector<double> phi(N);
        double s = 0;
        for (double& x : phi) {
            x = 2 * rng.normal();
            s += x * x;
        }
        double prod = 0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double zi = phi[i] / std::sqrt(C), zj = phi[j] / std::sqrt(C);
                prod += i == j ? C * C * hermite(4, zi) : C * hermite(2, zi) * C * hermite(2, zj);
            }
        hermite_checks.push_back(std::abs(wick_quartic(s, C, N) - prod) <= 1e-10 * std::max(1.0, std::abs(prod)));
    }
    suite("hermite", hermite_checks);

    std::vector<bool> bound;
    {
        const Torus torus(2.0, 8);
        for (int k = 0; k < 100; ++k) {
            Stream rng(c.cfg.seed, 3, std::uint64_t(k));
            const int N = 1 + k % 4;
            const WickContext ctx{0.05 + rng.uniform(), N, {}};
            FieldConfig f(torus, N);
            for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values(i) = 2 * rng.normal();
            const double lb = action_lower_bound(ctx, torus.area());
            bound.push_back(quartic_action(f, ctx) >= lb - 1e-9 * std::abs(lb));
        }
    }
    suite("action_bound", bound);

    int passed = 0, failed = 0;
    for (const auto& r : t.rows) {
        passed += std::stoi(r[1]);
        failed += std::stoi(r[2]);
    }
    t.header.push_back("passed=" + std::to_string(passed));
    t.header.push_back("failed=" + std::to_string(failed));
    emit(c, "summary.tsv", t, o);
    return o.code;
}

// --------------------------------------------------------------------- scan

int scan_beta(Context& c) {
    Outcome o;
    std::vector<double> betas = c.cfg.beta_grid;
    if (betas.empty())
        for (int k = 1; k <= 10; ++k) betas.push_back(0.1 * k);
    const BetaScan s = mass_beta_scan(c.cfg.lambda, betas);
    Table t = new_table(c, {"beta", "ln_m_star", "lower", "upper", "inside"});
    for (size_t k = 0; k < betas.size(); ++k) {
        const auto [lo, hi] = continuum_log_mass_bounds(c.cfg.lambda, betas[k]);
        t.rows.push_back({num(betas[k]), num(s.trend.y[k]), num(lo), num(hi), s.inside_bounds[k] ? "yes" : "no"});
        if (!s.inside_bounds[k]) o.fail("mass_bounds[beta=" + num(betas[k]) + "]");
    }
    t.header.push_back("scan=beta");
    t.header.push_back("lambda=" + num(c.cfg.lambda));
    t.header.push_back("slope=" + num(s.trend.slope) + " reference=" + num(-kTwoPi) +
                       " relative_error=" + num(s.slope_relative_error));
    t.header.push_back("intercept=" + num(s.intercept_offset) + " band=" + num(kTwoPi / c.cfg.lambda));
    emit(c, "scan.tsv", t, o);
    return o.code;
}

int scan_n(Context& c) {
    Outcome o;
    std::vector<int> Ns = c.cfg.N_grid;
    if (Ns.empty()) Ns = {2, 4, 8, 16, 32};
    const Torus torus = torus_of(c.cfg);
    const CylindricalSpec spec{c.cfg.observable, c.cfg.amplitude, c.cfg.radius, 4};
    std::vector<std::future<LargeNPoint>> jobs;
    std::vector<LargeNPoint> pts;
    for (size_t k = 0; k < Ns.size(); ++k) {
        const int N = Ns[k];
        jobs.push_back(std::async(c.opt.threads > 1 ? std::launch::async : std::launch::deferred, [&, N] {
            return measure_large_n(make_model_params(c.cfg.lambda, c.cfg.beta, N, torus), schedule_of(c.cfg), c.cfg.seed,
                                   spec);
        }));
        if (int(jobs.size()) >= std::max(1, c.opt.threads)) {
            for (auto& j : jobs) pts.push_back(j.get());
            jobs.clear();
        }
    }
    for (auto& j : jobs) pts.push_back(j.get());

    StreamWriter w(c.dir / "measurements.jsonl", c.hash, false);
    Table t = new_table(c, {"N", "mass", "kappa4", "kappa4_err", "gap", "gap_err", "proxy", "proxy_err", "acceptance"});
    std::vector<double> x, k4, k4e, gap, gape;
    for (const LargeNPoint& p : pts) {
        t.rows.push_back({std::to_string(p.N), num(p.mass), num(p.kappa4.value), num(p.kappa4.error), num(p.gap.gap),
                          num(p.gap.error), num(p.proxy.value), num(p.proxy.error), num(p.acceptance)});
        const std::uint64_t n = std::uint64_t(p.N);
        w.write(StreamRecord{c.hash, "kappa4", n, p.kappa4.value, p.kappa4.error, {}});
        w.write(StreamRecord{c.hash, "cylindrical_gap", n, p.gap.gap, p.gap.error, {}});
        w.write(StreamRecord{c.hash, "mode_proxy", n, p.proxy.value, p.proxy.error, {}});
        x.push_back(p.N);
        k4.push_back(p.kappa4.value);
        k4e.push_back(p.kappa4.error);
        gap.push_back(p.gap.gap);
        gape.push_back(p.gap.error);
        if (std::abs(p.exp_minus_delta_h.value - 1) > 3 * p.exp_minus_delta_h.error)
            o.warn("stat_exp_minus_delta_h[N=" + std::to_string(p.N) + "]");
    }
    for (size_t k = 1; k < pts.size(); ++k)
        if (std::abs(pts[k].kappa4.value) > std::abs(pts[k - 1].kappa4.value) + 3 * std::hypot(pts[k].kappa4.error, pts[k - 1].kappa4.error))
            o.warn("stat_kappa4_not_decreasing[N=" + std::to_string(pts[k].N) + "]");
    t.header.push_back("scan=N");
    if (pts.size() >= 2) {
        const TrendReport kt = make_trend("N", x, k4, k4e, true);
        const TrendReport gt = make_trend("N", x, gap, gape, true);
        t.header.push_back("kappa4_loglog_slope=" + num(kt.slope) + "+-" + num(kt.slope_error));
        t.header.push_back("gap_loglog_slope=" + num(gt.slope) + "+-" + num(gt.slope_error));
    }
    emit(c, "scan.tsv", t, o);
    return o.code;
}

}  // namespace

fs::path output_directory(const RunOptions& opt, const RunConfig& cfg) {
    if (!opt.out.empty()) return opt.out;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return cfg.out;
}

std::string render_report(const fs::path& dir) {
    std::ostringstream r;
    r << "report: " << dir.string() << "\n";
    const bool any = fs::is_directory(dir) &&
                     (fs::exists(dir / "summary.tsv") || fs::exists(dir / "scan.tsv") || fs::exists(dir / "measurements.jsonl"));
    if (!any) {
        r << "status: no data\n";
        return r.str();
    }
    if (fs::exists(dir / "scan.tsv")) {
        const Table t = parse_table(read_text(dir / "scan.tsv"));
        bool is_n = false;
        for (const std::string& h : t.header) is_n = is_n || h == "scan=N";
        if (is_n) {
            // refit from the stored table alone
            std::vector<double> x, k4, k4e, gap, gape;
            for (const auto& row : t.rows) {
                x.push_back(std::stod(row[0]));
                k4.push_back(std::stod(row[2]));
                k4e.push_back(std::stod(row[3]));
                gap.push_back(std::stod(row[4]));
                gape.push_back(std::stod(row[5]));
            }
            r << "kappa4 against N\n";
            Table k;
            k.columns = {"N", "kappa4", "error"};
            for (size_t i = 0; i < x.size(); ++i) k.rows.push_back({num(x[i]), num(k4[i]), num(k4e[i])});
            r << format_table(k);
            if (x.size() >= 2) {
                const TrendReport kt = make_trend("N", x, k4, k4e, true);
                const TrendReport gt = make_trend("N", x, gap, gape, true);
                r << "fit ln|kappa4| = a + b ln N: b = " << num(kt.slope) << " +- " << num(kt.slope_error) << "\n";
                r << "fit ln gap = a + b ln N: b = " << num(gt.slope) << " +- " << num(gt.slope_error) << "\n";
            }
        } else {
            std::vector<double> b, y;
            for (const auto& row : t.rows) {
                b.push_back(std::stod(row[0]));
                y.push_back(std::stod(row[1]));
            }
            r << "ln m* against beta\n" << format_table(Table{{}, {"beta", "ln_m_star"}, {}});
            for (size_t i = 0; i < b.size(); ++i) r << num(b[i]) << "  " << num(y[i]) << "\n";
            if (b.size() >= 2) {
                const TrendReport tr = make_trend("beta", b, y, std::vector<double>(b.size(), 0.0), false);
                r << "slope " << num(tr.slope) << " against -2 pi = " << num(-kTwoPi)
                  << " (relative " << num(std::abs(tr.slope + kTwoPi) / kTwoPi) << ")\n";
            }
        }
        for (const std::string& h : t.header) r << "# " << h << "\n";
    }
    if (fs::exists(dir / "summary.tsv")) {
        const Table t = parse_table(read_text(dir / "summary.tsv"));
        r << "summary\n" << format_table(t);
    }
    if (fs::exists(dir / "measurements.jsonl")) {
        const auto recs = read_stream(dir / "measurements.jsonl");
        r << "recomputed from measurements.jsonl (" << recs.size() << " records)\n";
        r << format_table(stream_summary_table(recs, {}));
    }
    return r.str();
}

int run_verb(const RunOptions& opt, std::ostream& out, std::ostream& err) {
    static const std::vector<std::string> verbs = {"gap-solve", "gff-sample", "mcmc-run", "thermo-integrate", "analyze",
                                                   "verify-identities", "scan", "report"};
    if (std::find(verbs.begin(), verbs.end(), opt.verb) == verbs.end()) {
        err << "unknown verb '" << opt.verb << "'\n";
        return kExitConfigError;
    }
    try {
        if (opt.verb == "report") {
            fs::path dir = opt.out;
            if (dir.empty()) {
                if (const char* env = std::getenv(kOutputEnv); env && *env) dir = env;
                else if (!opt.config_path.empty()) dir = load_config(opt.config_path).out;
                else dir = "largen-out";
            }
            out << render_report(dir);
            return kExitOk;
        }
        RunConfig cfg;
        if (opt.config_path.empty()) {
            if (opt.verb != "verify-identities" && opt.verb != "analyze") {
                err << "error: " << opt.verb << " needs --config\n";
                return kExitConfigError;
            }
            cfg = parse_config("[experiment]\nkind = " + opt.verb + "\n");
        } else {
            cfg = load_config(opt.config_path);
        }
        if (to_string(cfg.kind) != opt.verb)
            throw ConfigError("config experiment.kind is '" + to_string(cfg.kind) + "' but the verb is '" + opt.verb + "'", 0);
        if (opt.seed) set_key(cfg, "run.seed", std::to_string(*opt.seed));
        if (opt.threads < 1) throw ConfigError("--threads must be at least 1", 0);

        Context c{cfg, opt, output_directory(opt, cfg), hash_hex(cfg.hash), out, err};
        fs::create_directories(c.dir);
        write_text(c.dir / "config.resolved", "# config_hash=" + c.hash + "\n" + canonical_text(cfg));

        switch (cfg.kind) {
        case ExperimentKind::GapSolve: return gap_solve(c);
        case ExperimentKind::GffSample: return gff_sample(c);
        case ExperimentKind::McmcRun: return mcmc_run(c);
        case ExperimentKind::ThermoIntegrate: return thermo_integrate(c);
        case ExperimentKind::Analyze: return analyze(c);
        case ExperimentKind::VerifyIdentities: return verify_identities(c);
        case ExperimentKind::Scan: return cfg.scan == "beta" ? scan_beta(c) : scan_n(c);
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

}  // namespace largen
