#include "largen/mcmc.hpp"

#include "largen/errors.hpp"
#include "largen/gap.hpp"
#include "largen/gff.hpp"
#include "largen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace largen {

namespace {

void check_shape(const FieldConfig& f, const Torus& t, int N) {
    if (!(f.torus == t) || f.components() != N)
        throw DimensionError("field shape does not match the model (" + std::to_string(f.components()) +
                             " components, expected " + std::to_string(N) + ")");
}

int default_steps(const LatticeModel& m, double step) {
    const double tau = 0.5 * std::numbers::pi / (m.torus.spacing() * m.trajectory_mass);
    return std::clamp(int(std::ceil(tau / step)), 4, 500);
}

}  // namespace

ModelParams make_model_params(double lambda, double beta, int N, const Torus& torus) {
    if (!(lambda > 0.0)) throw DomainError("make_model_params needs lambda > 0; use make_free_params for lambda = 0");
    if (N < 1) throw DomainError("make_model_params needs N >= 1");
    ModelParams p;
    p.lambda = lambda;
    p.beta = beta;
    p.N = N;
    p.torus = torus;
    p.scheme = {Scheme::LatticeTadpole, 1.0};
    p.C = counterterm(p.scheme.reference_mass, torus, p.scheme.tag);
    p.mass = std::sqrt(solve_gap_lattice(lambda, beta, N, torus).m_squared);
    return p;
}

ModelParams make_free_params(double mass, int N, const Torus& torus) {
    if (!(mass > 0.0)) throw DomainError("make_free_params needs mass > 0");
    ModelParams p;
    p.lambda = 0.0;
    p.beta = 0.0;
    p.N = N;
    p.torus = torus;
    p.scheme = {Scheme::LatticeTadpole, 1.0};
    p.C = counterterm(1.0, torus, Scheme::LatticeTadpole);
    p.mass = mass;
    return p;
}

LatticeModel beta_form(const ModelParams& p) {
    const double c = 1.0 + 2.0 / p.N;
    return {p.torus, p.N, {0.0, -0.5 * p.lambda * (c * p.C + p.beta), p.lambda / (4.0 * p.N)}, p.mass};
}

double wick_counterterm(const ModelParams& p) { return counterterm(p.mass, p.torus, Scheme::LatticeTadpole); }

LatticeModel wick_form(const ModelParams& p, double s) {
    if (!(s >= 0.0)) throw DomainError("wick_form needs a non-negative coupling");
    const double Cm = wick_counterterm(p);
    const int N = p.N;
    Potential pot;
    pot.q2 = 0.5 * p.mass * p.mass - s * Cm * (N + 2) / (2.0 * N);
    pot.q4 = s / (4.0 * N);
    pot.q0 = s * Cm * Cm * (N + 2) / 4.0;
    return {p.torus, N, pot, p.mass};
}

double lattice_action(const FieldConfig& f, const LatticeModel& m) {
    check_shape(f, m.torus, m.N);
    const int n = m.torus.points();
    const double eps2 = m.torus.spacing() * m.torus.spacing();
    double kin = 0;
    for (int c = 0; c < m.N; ++c) {
        const auto X = f.component(c);
        kin += (X.bottomRows(n - 1) - X.topRows(n - 1)).square().sum() + (X.row(0) - X.row(n - 1)).square().sum();
        kin += (X.rightCols(n - 1) - X.leftCols(n - 1)).square().sum() + (X.col(0) - X.col(n - 1)).square().sum();
    }
    const Eigen::ArrayXd s = f.norm2();
    const double pot = (m.pot.q2 * s + m.pot.q4 * s.square()).sum() + m.pot.q0 * s.size();
    return 0.5 * kin + eps2 * pot;
}

double lattice_action(const FieldConfig& f, const ModelParams& p) { return lattice_action(f, beta_form(p)); }

FieldConfig action_gradient(const FieldConfig& f, const LatticeModel& m) {
    check_shape(f, m.torus, m.N);
    const int n = m.torus.points();
    const double eps2 = m.torus.spacing() * m.torus.spacing();
    FieldConfig g(m.torus, m.N);
    const Eigen::ArrayXd diag = 4.0 + eps2 * (2.0 * m.pot.q2 + 4.0 * m.pot.q4 * f.norm2());
    g.values = (f.values.array().colwise() * diag).matrix();
    for (int c = 0; c < m.N; ++c) {
        const auto X = f.component(c);
        auto G = g.component(c);
        // neighbours along the first index
        G.topRows(n - 1) -= X.bottomRows(n - 1);
        G.row(n - 1) -= X.row(0);
        G.bottomRows(n - 1) -= X.topRows(n - 1);
        G.row(0) -= X.row(n - 1);
        // along the second index
        G.leftCols(n - 1) -= X.rightCols(n - 1);
        G.col(n - 1) -= X.col(0);
        G.rightCols(n - 1) -= X.leftCols(n - 1);
        G.col(0) -= X.col(n - 1);
    }
    return g;
}

FieldConfig action_gradient(const FieldConfig& f, const ModelParams& p) { return action_gradient(f, beta_form(p)); }

double wick_quartic_action(const FieldConfig& f, const ModelParams& p) {
    return quartic_action(f, {wick_counterterm(p), p.N, {Scheme::LatticeTadpole, p.mass}});
}

double form_difference(const FieldConfig& f, const ModelParams& p) {
    const LatticeModel b = beta_form(p), w = wick_form(p, p.lambda);
    const double eps2 = p.torus.spacing() * p.torus.spacing();
    return (b.pot.q2 - w.pot.q2) * eps2 * f.norm2().sum() - w.pot.q0 * p.torus.area();
}

double wick_action_variance(const ModelParams& p) {
    // F = eps^2/(4N) sum_x :|Phi(x)|^4:, E[:|Phi(x)|^4: :|Phi(y)|^4:] = 8 N (N+2) G(x-y)^4
    const Grid G = lattice_propagator(p.mass, p.torus);
    const double eps2 = p.torus.spacing() * p.torus.spacing();
    const double N = p.N;
    return eps2 * eps2 * (N + 2) / (2.0 * N) * p.torus.sites() * G.square().square().sum();
}

ChainState init_chain(const LatticeModel& model, std::uint64_t seed, std::uint64_t chain) {
    Stream rng(seed, chain, std::numeric_limits<std::uint64_t>::max());
    const SpectralCovariance cov = make_covariance(model.trajectory_mass, model.torus, Symbol::Lattice);
    ChainState s{sample_gff(cov, model.N, rng), 0.3, 0, {}, seed, chain, 0};
    s.trajectory_steps = default_steps(model, s.step_size);
    return s;
}

HmcResult hmc_step(ChainState& state, const LatticeModel& model) {
    Stream rng(state.seed, state.chain, state.sweep);
    const int steps = std::max(1, state.trajectory_steps / 2 + int(rng.uniform() * (state.trajectory_steps + 1)));
    const double dt = state.step_size;

    Eigen::MatrixXd p(state.field.values.rows(), state.field.values.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.normal();
    const double h0 = 0.5 * p.squaredNorm() + lattice_action(state.field, model);

    FieldConfig x = state.field;
    p -= 0.5 * dt * action_gradient(x, model).values;
    for (int k = 0; k < steps; ++k) {
        x.values += dt * p;
        const double w = k + 1 < steps ? dt : 0.5 * dt;
        p -= w * action_gradient(x, model).values;
    }
    const double h1 = 0.5 * p.squaredNorm() + lattice_action(x, model);
    const double dh = h1 - h0;

    HmcResult r{dh, false, std::isfinite(dh)};
    const double u = rng.uniform();
    if (r.finite && (dh <= 0.0 || u < std::exp(-dh))) {
        r.accepted = true;
        state.field.values = std::move(x.values);
    }
    if (!r.finite) ++state.acceptance.nonfinite;
    ++state.acceptance.proposed;
    ++state.acceptance.window_proposed;
    if (r.accepted) {
        ++state.acceptance.accepted;
        ++state.acceptance.window_accepted;
    }
    ++state.sweep;
    return r;
}

void run_chain(ChainState& state, const LatticeModel& model, const Schedule& sch,
               const std::vector<Observable>& observables, const RecordSink& sink, std::uint64_t stop_after) {
    if (sch.stride < 1) throw DomainError("schedule stride must be positive");
    const std::uint64_t total = sch.thermalization + sch.measurements;
    for (std::uint64_t done = 0; state.sweep < total && done < stop_after; ++done) {
        const bool thermalizing = state.sweep < sch.thermalization;
        const HmcResult r = hmc_step(state, model);
        const std::uint64_t k = state.sweep - 1;
        if (thermalizing) {
            sink({"thermalization_action", k, lattice_action(state.field, model)});
            auto& a = state.acceptance;
            if (a.window_proposed == 25) {
                const double rate = double(a.window_accepted) / a.window_proposed;
                state.step_size *= std::exp(0.5 * (rate - sch.target_acceptance));
                state.step_size = std::min(state.step_size, 0.65);
                state.trajectory_steps = default_steps(model, state.step_size);
                a.window_proposed = a.window_accepted = 0;
            }
            if (state.sweep == sch.thermalization) {
                // acceptance statistics restart with the frozen step size
                a = AcceptanceStats{};
            }
            continue;
        }
        sink({"delta_h", k, r.finite ? r.delta_h : INFINITY});
        if ((k - sch.thermalization) % sch.stride == 0)
            for (const Observable& o : observables) sink({o.name, k, o.fn(state.field)});
    }
}

std::vector<MeasurementRecord> run_chain(const LatticeModel& model, const Schedule& sch,
                                         const std::vector<Observable>& observables, std::uint64_t seed,
                                         std::uint64_t chain) {
    ChainState st = init_chain(model, seed, chain);
    std::vector<MeasurementRecord> out;
    run_chain(st, model, sch, observables, [&](const MeasurementRecord& r) { out.push_back(r); });
    return out;
}

std::vector<double> series_of(const std::vector<MeasurementRecord>& records, const std::string& name) {
    std::vector<double> v;
    for (const auto& r : records)
        if (r.observable == name) v.push_back(r.value);
    return v;
}

bool thermalized(const std::vector<MeasurementRecord>& records) {
    const std::vector<double> a = series_of(records, "thermalization_action");
    if (a.size() < 16) return false;
    const size_t q = a.size() / 4;
    const std::vector<double> third(a.end() - 2 * q, a.end() - q), last(a.end() - q, a.end());
    const SeriesSummary s3 = summarize_series(third), s4 = summarize_series(last);
    return std::abs(s3.mean - s4.mean) <= 4.0 * std::hypot(s3.std_error, s4.std_error);
}

Estimate exp_minus_delta_h(const std::vector<MeasurementRecord>& records) {
    std::vector<double> v = series_of(records, "delta_h");
    for (double& x : v) x = std::exp(-x);
    const SeriesSummary s = summarize_series(v);
    return {s.mean, s.std_error};
}

std::vector<double> coupling_grid(double lambda, int points, double frac) {
    if (!(lambda > 0.0) || points < 1 || !(frac > 0.0 && frac <= 1.0))
        throw DomainError("coupling_grid needs lambda > 0, points >= 1, 0 < fraction <= 1");
    std::vector<double> g{0.0};
    if (points == 1) {
        g.push_back(lambda);
        return g;
    }
    const double smin = lambda * frac;
    for (int j = 0; j < points; ++j) g.push_back(j + 1 == points ? lambda : smin * std::pow(lambda / smin, double(j) / (points - 1)));
    return g;
}

namespace {

// trapezoid weights on nodes[idx]; other entries zero
std::vector<double> trapezoid(const std::vector<double>& s, const std::vector<size_t>& idx) {
    std::vector<double> w(s.size(), 0.0);
    for (size_t k = 0; k + 1 < idx.size(); ++k) {
        const double h = s[idx[k + 1]] - s[idx[k]];
        w[idx[k]] += 0.5 * h;
        w[idx[k + 1]] += 0.5 * h;
    }
    return w;
}

}  // namespace

ThermoResult thermo_integrate_logZ(const ModelParams& p, const std::vector<double>& grid, const Schedule& sch,
                                   std::uint64_t seed) {
    if (grid.empty() || grid.front() != 0.0) throw DomainError("thermodynamic integration grid must start at 0");
    for (size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw DomainError("thermodynamic integration grid must increase");
    ThermoResult out;
    const Observable F{"F", [&p](const FieldConfig& f) { return wick_quartic_action(f, p); }};
    for (size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] == 0.0) {
            // Wick powers are centred under mu_m exactly
            out.nodes.push_back({0.0, {0.0, 0.0}, 0.5});
            continue;
        }
        const LatticeModel model = wick_form(p, grid[k]);
        const auto rec = run_chain(model, sch, {F}, seed, k);
        const SeriesSummary s = summarize_series(series_of(rec, "F"));
        out.nodes.push_back({grid[k], {s.mean, s.std_error}, s.tau_int});
    }
    // cumulative log Z(s_k) = -int_0^{s_k} E_s F ds
    double acc = 0, var = 0;
    out.log_z.push_back({0.0, 0.0});
    std::vector<double> coef(grid.size(), 0.0);
    for (size_t k = 1; k < grid.size(); ++k) {
        const double h = grid[k] - grid[k - 1];
        acc -= 0.5 * h * (out.nodes[k - 1].mean_F.value + out.nodes[k].mean_F.value);
        coef[k - 1] += 0.5 * h;
        coef[k] += 0.5 * h;
        var = 0;
        for (size_t j = 0; j <= k; ++j) var += std::pow(coef[j] * out.nodes[j].mean_F.error, 2);
        out.log_z.push_back({acc, std::sqrt(var)});
    }
    out.log_z_total = out.log_z.back();
    out.log_z_per_volume = {out.log_z_total.value / p.torus.area(), out.log_z_total.error / p.torus.area()};

    std::vector<size_t> all, coarse;
    for (size_t k = 0; k < grid.size(); ++k) {
        all.push_back(k);
        if (k % 2 == 0 || k + 1 == grid.size()) coarse.push_back(k);
    }
    const auto wf = trapezoid(grid, all), wc = trapezoid(grid, coarse);
    double diff = 0, dvar = 0;
    for (size_t k = 0; k < grid.size(); ++k) {
        diff += (wf[k] - wc[k]) * out.nodes[k].mean_F.value;
        dvar += std::pow((wf[k] - wc[k]) * out.nodes[k].mean_F.error, 2);
    }
    out.needs_refinement = std::abs(diff) > 3.0 * std::sqrt(dvar);
    return out;
}

EntropyResult relative_entropy_from(const ThermoResult& t, const ModelParams& p) {
    // H = sum_k w_k E_k F - lambda E_K F with trapezoid weights w_k
    const size_t K = t.nodes.size() - 1;
    std::vector<double> c(K + 1, 0.0);
    for (size_t k = 1; k <= K; ++k) {
        const double h = t.nodes[k].coupling - t.nodes[k - 1].coupling;
        c[k - 1] += 0.5 * h;
        c[k] += 0.5 * h;
    }
    c[K] -= t.nodes[K].coupling;
    double H = 0, var = 0;
    for (size_t k = 0; k <= K; ++k) {
        H += c[k] * t.nodes[k].mean_F.value;
        var += std::pow(c[k] * t.nodes[k].mean_F.error, 2);
    }
    const Estimate e{H, std::sqrt(var)};
    return {e, {e.value / p.torus.area(), e.error / p.torus.area()}, t};
}

EntropyResult estimate_relative_entropy(const ModelParams& p, const std::vector<double>& grid,
                                        const Schedule& sch, std::uint64_t seed) {
    if (p.lambda == 0.0) return {{0.0, 0.0}, {0.0, 0.0}, {}};
    if (grid.back() != p.lambda) throw DomainError("relative entropy grid must end at lambda");
    return relative_entropy_from(thermo_integrate_logZ(p, grid, sch, seed), p);
}

}  // namespace largen
