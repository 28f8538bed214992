#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "largen/errors.hpp"
#include "largen/gap.hpp"
#include "largen/gff.hpp"
#include "largen/mcmc.hpp"
#include "largen/rng.hpp"
#include "largen/stats.hpp"

#include <cmath>

using namespace largen;

namespace {

FieldConfig random_field(const Torus& t, int N, std::uint64_t seed, double scale = 1.0) {
    Stream rng(seed, 0, 0);
    FieldConfig f(t, N);
    for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values(i) = scale * rng.normal();
    return f;
}

// nearest-neighbour action written with array shifts
double action_oracle(const FieldConfig& f, const Potential& pot) {
    const int n = f.torus.points();
    const double eps2 = f.torus.spacing() * f.torus.spacing();
    double s = 0;
    for (int c = 0; c < f.components(); ++c) {
        const Grid X = f.component(c);
        Grid right(n, n), up(n, n);
        right << X.bottomRows(n - 1), X.topRows(1);
        up << X.rightCols(n - 1), X.leftCols(1);
        s += 0.5 * ((right - X).square().sum() + (up - X).square().sum());
    }
    const Eigen::ArrayXd r = f.norm2();
    return s + eps2 * (pot.q0 * r.size() + pot.q2 * r.sum() + pot.q4 * r.square().sum());
}

double mode_power(const FieldConfig& f, int c, int a, int b) {
    return std::norm(fft_forward(Grid(f.component(c)), f.torus)(a, b));
}

}  // namespace

TEST_CASE("summarize_series recovers the AR(1) autocorrelation time") {
    const double rho = 0.5;
    Stream rng(11, 0, 0);
    std::vector<double> x(200000);
    double v = rng.normal() / std::sqrt(1 - rho * rho);
    for (double& xi : x) {
        v = rho * v + rng.normal();
        xi = v;
    }
    const SeriesSummary s = summarize_series(x);
    CHECK(s.tau_int == doctest::Approx((1 + rho) / (2 * (1 - rho))).epsilon(0.05));
    CHECK(std::abs(s.mean) < 4 * s.std_error);
    CHECK(s.n_eff == doctest::Approx(x.size() / (2 * s.tau_int)));
    CHECK_THROWS_AS(summarize_series({1.0}), DomainError);

    const std::vector<double> flat(10, 3.0);
    CHECK(summarize_series(flat).std_error == 0.0);
}

TEST_CASE("jackknife of a mean matches the iid error, ratio is consistent") {
    Stream rng(12, 0, 0);
    Eigen::MatrixXd s(4000, 2);
    std::vector<double> col;
    for (int i = 0; i < s.rows(); ++i) {
        s(i, 0) = 1.0 + rng.normal();
        s(i, 1) = 2.0 + 0.1 * rng.normal();
        col.push_back(s(i, 0));
    }
    const Estimate j = jackknife(s, 4000, [](const Eigen::VectorXd& m) { return m(0); });
    const Estimate iid = mean_iid(col);
    CHECK(j.value == doctest::Approx(iid.value).epsilon(1e-12));
    CHECK(j.error == doctest::Approx(iid.error).epsilon(1e-9));
    const Estimate r = jackknife(s, 40, [](const Eigen::VectorXd& m) { return m(0) / m(1); });
    CHECK(std::abs(r.value - 0.5) < 4 * r.error);
    CHECK_THROWS_AS(jackknife(s, 1, [](const Eigen::VectorXd& m) { return m(0); }), DomainError);
}

TEST_CASE("lattice action: zero field, constant field, shift oracle") {
    const Torus t(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.3, 3, t);
    const LatticeModel w = wick_form(p, 0.7);
    FieldConfig zero(t, 3);
    CHECK(lattice_action(zero, w) == doctest::Approx(w.pot.q0 * t.area()).epsilon(1e-14));
    CHECK(lattice_action(zero, p) == 0.0);

    FieldConfig c(t, 3);
    c.values.col(1).setConstant(0.8);
    const double r = 0.64;
    CHECK(lattice_action(c, w) ==
          doctest::Approx(t.area() * (w.pot.q0 + w.pot.q2 * r + w.pot.q4 * r * r)).epsilon(1e-13));

    for (int N : {1, 2, 4}) {
        const ModelParams q = make_model_params(2.0, 0.1, N, t);
        const FieldConfig f = random_field(t, N, 100 + N);
        CHECK(lattice_action(f, q) == doctest::Approx(action_oracle(f, beta_form(q).pot)).epsilon(1e-12));
    }
}

TEST_CASE("lambda = 0 Wick form is the lattice GFF quadratic form") {
    const Torus t(4.0, 16);
    const ModelParams p = make_free_params(0.7, 2, t);
    const LatticeModel w = wick_form(p, 0.0);
    CHECK(w.pot.q0 == 0.0);
    CHECK(w.pot.q4 == 0.0);
    CHECK(w.pot.q2 == doctest::Approx(0.5 * 0.49));
    // S = (1/2) sum_xi |F(xi)|^2 (m^2 + symbol) / L^2 by Parseval
    const FieldConfig f = random_field(t, 2, 7);
    const Grid sym = symbol_grid(t, Symbol::Lattice);
    double s = 0;
    for (int c = 0; c < 2; ++c) {
        const ModeGrid F = fft_forward(Grid(f.component(c)), t);
        s += 0.5 * (F.abs2() * (0.49 + sym)).sum() / (t.area());
    }
    CHECK(lattice_action(f, w) == doctest::Approx(s).epsilon(1e-11));
}

TEST_CASE("action gradient matches central finite differences") {
    for (int N : {1, 2}) {
        const Torus t(2.0, 8);
        const ModelParams p = make_model_params(1.5, 0.2, N, t);
        for (const LatticeModel& m : {beta_form(p), wick_form(p, 0.9)}) {
            const FieldConfig f = random_field(t, N, 40 + N);
            const FieldConfig g = action_gradient(f, m);
            double worst = 0;
            for (Eigen::Index i = 0; i < f.values.size(); i += 3) {
                const double h = 1e-5;
                FieldConfig a = f, b = f;
                a.values(i) += h;
                b.values(i) -= h;
                const double fd = (lattice_action(a, m) - lattice_action(b, m)) / (2 * h);
                worst = std::max(worst, std::abs(fd - g.values(i)) / std::max(1.0, std::abs(g.values(i))));
            }
            CHECK(worst < 1e-6);
        }
    }
    const Torus t(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.0, 2, t);
    CHECK(action_gradient(FieldConfig(t, 2), p).values.isZero(0.0));
    FieldConfig c(t, 2);
    c.values.col(0).setConstant(0.5);
    const LatticeModel b = beta_form(p);
    const double expect = t.spacing() * t.spacing() * (2 * b.pot.q2 * 0.5 + 4 * b.pot.q4 * 0.125);
    CHECK(action_gradient(c, b).values.col(0).array().isApproxToConstant(expect, 1e-12));
    CHECK_THROWS_AS(action_gradient(FieldConfig(t, 3), b), DimensionError);
}

TEST_CASE("beta form and m-Wick form differ by a field-independent constant") {
    const Torus t(4.0, 16);
    for (int N : {1, 3, 8}) {
        const ModelParams p = make_model_params(1.2, 0.4, N, t);
        const LatticeModel b = beta_form(p), w = wick_form(p, p.lambda);
        CHECK(std::abs(b.pot.q2 - w.pot.q2) < 1e-10);
        const double Cm = wick_counterterm(p);
        const double expect = -0.25 * p.lambda * (N + 2) * Cm * Cm * t.area();
        for (std::uint64_t s : {1, 2, 3}) {
            const FieldConfig f = random_field(t, N, s, 1.5);
            const double diff = lattice_action(f, b) - lattice_action(f, w);
            CHECK(diff == doctest::Approx(expect).epsilon(1e-9));
            CHECK(form_difference(f, p) == doctest::Approx(expect).epsilon(1e-9));
        }
        // the Wick form's interaction is exactly lambda F_m
        const FieldConfig f = random_field(t, N, 9);
        const double fm = wick_quartic_action(f, p);
        CHECK(lattice_action(f, w) - lattice_action(f, wick_form(p, 0.0)) ==
              doctest::Approx(p.lambda * fm).epsilon(1e-10));
    }
}

TEST_CASE("free HMC reproduces the lattice GFF mode variances") {
    const Torus t(4.0, 16);
    const double m = 1.0;
    const ModelParams p = make_free_params(m, 2, t);
    const LatticeModel w = wick_form(p, 0.0);
    const Grid sym = symbol_grid(t, Symbol::Lattice);
    std::vector<Observable> obs;
    for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {2, 3}})
        obs.push_back({"mode" + std::to_string(a) + std::to_string(b), [a, b](const FieldConfig& f) {
                           return 0.5 * (mode_power(f, 0, a, b) + mode_power(f, 1, a, b));
                       }});
    const double Cm = wick_counterterm(p);
    obs.push_back({"wick2", [Cm](const FieldConfig& f) {
                       return wick_norm2(f, {Cm, 2, {Scheme::LatticeTadpole, 1.0}}).mean();
                   }});
    const auto rec = run_chain(w, {100, 4000, 1, 0.775}, obs, 5);
    CHECK(thermalized(rec));
    for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {2, 3}}) {
        const SeriesSummary s = summarize_series(series_of(rec, "mode" + std::to_string(a) + std::to_string(b)));
        const double exact = t.area() / (m * m + sym(a, b));
        CHECK(std::abs(s.mean - exact) < 4 * s.std_error);
    }
    const SeriesSummary c = summarize_series(series_of(rec, "wick2"));
    CHECK(std::abs(c.mean) < 4 * c.std_error);
    const Estimate e = exp_minus_delta_h(rec);
    CHECK(std::abs(e.value - 1.0) < 4 * e.error);
}

TEST_CASE("HMC acceptance tends to one as the step shrinks") {
    const Torus t(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.0, 2, t);
    const LatticeModel b = beta_form(p);
    double prev = 0;
    for (double dt : {0.1, 0.05, 0.025}) {
        ChainState s = init_chain(b, 3, 0);
        s.step_size = dt;
        s.trajectory_steps = int(1.0 / dt);
        double mean_abs = 0;
        for (int k = 0; k < 40; ++k) mean_abs += std::abs(hmc_step(s, b).delta_h) / 40;
        if (dt == 0.025) CHECK(s.acceptance.rate() >= 0.97);
        if (prev > 0) {
            CHECK(prev / mean_abs > 2.5);
            CHECK(prev / mean_abs < 6.5);
        }
        prev = mean_abs;
    }
}

TEST_CASE("chains are reproducible and resumable") {
    const Torus t(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.0, 2, t);
    const LatticeModel b = beta_form(p);
    const std::vector<Observable> obs{{"F", [&p](const FieldConfig& f) { return wick_quartic_action(f, p); }}};
    const Schedule sch{60, 80, 2, 0.775};
    const auto a = run_chain(b, sch, obs, 21, 4);
    const auto c = run_chain(b, sch, obs, 21, 4);
    REQUIRE(a.size() == c.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].observable == c[i].observable);
        CHECK(a[i].sweep == c[i].sweep);
        CHECK(a[i].value == c[i].value);
    }
    CHECK(series_of(a, "F").size() == 40);
    CHECK(series_of(a, "delta_h").size() == 80);
    CHECK(series_of(a, "thermalization_action").size() == 60);

    // stop part-way (inside thermalization and again inside measurement), then continue
    ChainState s = init_chain(b, 21, 4);
    std::vector<MeasurementRecord> r;
    const RecordSink sink = [&](const MeasurementRecord& x) { r.push_back(x); };
    run_chain(s, b, sch, obs, sink, 37);
    CHECK(s.sweep == 37);
    run_chain(s, b, sch, obs, sink, 50);
    run_chain(s, b, sch, obs, sink);
    REQUIRE(r.size() == a.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(r[i].value == a[i].value);

    const auto other = run_chain(b, sch, obs, 21, 5);
    CHECK(series_of(other, "F") != series_of(a, "F"));
}

TEST_CASE("Monte Carlo error halves when measurements quadruple") {
    const Torus t(2.0, 8);
    const ModelParams p = make_free_params(1.0, 1, t);
    const LatticeModel w = wick_form(p, 0.0);
    const std::vector<Observable> obs{{"phi2", [](const FieldConfig& f) { return f.norm2().mean(); }}};
    const auto shortrun = run_chain(w, {50, 1000, 1, 0.775}, obs, 8);
    const auto longrun = run_chain(w, {50, 4000, 1, 0.775}, obs, 8);
    const double ratio = summarize_series(series_of(shortrun, "phi2")).std_error /
                         summarize_series(series_of(longrun, "phi2")).std_error;
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.7);
}

TEST_CASE("thermodynamic integration and relative entropy") {
    const Torus t(2.0, 8);
    const ModelParams p = make_model_params(1.0, 0.0, 2, t);
    const std::vector<double> grid = coupling_grid(p.lambda, 4, 1.0 / 8);
    REQUIRE(grid.size() == 5);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == p.lambda);
    CHECK(grid[1] == doctest::Approx(0.125));

    const ThermoResult th = thermo_integrate_logZ(p, grid, {150, 3000, 1, 0.775}, 17);
    CHECK(th.log_z.front().value == 0.0);
    CHECK(th.nodes.front().mean_F.value == 0.0);
    // Jensen: log E exp(-s F) >= -s E F = 0
    CHECK(th.log_z_total.value > -3 * th.log_z_total.error);
    // E_s F is non-increasing in s
    for (size_t k = 1; k < th.nodes.size(); ++k)
        CHECK(th.nodes[k].mean_F.value <
              th.nodes[k - 1].mean_F.value + 4 * std::hypot(th.nodes[k].mean_F.error, th.nodes[k - 1].mean_F.error));

    // independent route: direct GFF average of exp(-lambda F)
    const SpectralCovariance cov = make_covariance(p.mass, t, Symbol::Lattice);
    std::vector<double> w;
    for (int k = 0; k < 20000; ++k) {
        Stream rng(18, 0, k);
        w.push_back(std::exp(-p.lambda * wick_quartic_action(sample_gff(cov, 2, rng), p)));
    }
    const Estimate z = mean_iid(w);
    const double direct = std::log(z.value), derr = z.error / z.value;
    CHECK(std::abs(th.log_z_total.value - direct) < 4 * std::hypot(th.log_z_total.error, derr) + 0.02 * std::abs(direct));

    const EntropyResult h = relative_entropy_from(th, p);
    CHECK(h.H.value > -3 * h.H.error);
    CHECK(h.H.value == doctest::Approx(-p.lambda * th.nodes.back().mean_F.value - th.log_z_total.value).epsilon(1e-12));
    CHECK(h.H_per_volume.value == doctest::Approx(h.H.value / t.area()));

    const ModelParams free = make_free_params(1.0, 2, t);
    CHECK(estimate_relative_entropy(free, grid, {10, 10, 1, 0.775}, 1).H.value == 0.0);

    CHECK_THROWS_AS(thermo_integrate_logZ(p, {0.5, 1.0}, {}, 1), DomainError);
    CHECK_THROWS_AS(coupling_grid(-1.0, 3), DomainError);
}

TEST_CASE("exact variance of F_m matches its Monte Carlo estimate") {
    const Torus t(2.0, 8);
    const ModelParams p = make_free_params(0.8, 3, t);
    const SpectralCovariance cov = make_covariance(p.mass, t, Symbol::Lattice);
    std::vector<double> f;
    for (int k = 0; k < 40000; ++k) {
        Stream rng(19, 0, k);
        f.push_back(wick_quartic_action(sample_gff(cov, 3, rng), p));
    }
    const SeriesSummary s = summarize_series(f);
    const double v = wick_action_variance(p);
    // relative error of a sample variance is about sqrt((kurtosis - 1) / n); allow a generous band
    CHECK(s.variance == doctest::Approx(v).epsilon(0.08));
    CHECK(std::abs(s.mean) < 4 * s.std_error);
}
