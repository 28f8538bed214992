#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "largen/wick.hpp"

using namespace largen;

namespace {

// :|z|^4: from the Hermite-product definition
double hermite_product_oracle(const Eigen::VectorXd& z, double C) {
    const int N = int(z.size());
    const double sc = std::sqrt(C);
    double acc = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            if (i == j)
                acc += C * C * hermite(4, z(i) / sc);
            else
                acc += C * C * hermite(2, z(i) / sc) * hermite(2, z(j) / sc);
        }
    return acc;
}

Eigen::Array<bool, Eigen::Dynamic, 1> block_region(const Torus& t, int w) {
    Eigen::Array<bool, Eigen::Dynamic, 1> r = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(t.sites(), false);
    for (int j = 0; j < w; ++j)
        for (int i = 0; i < w; ++i) r(i + t.points() * j) = true;
    return r;
}

}  // namespace

TEST_CASE("hermite values and recursion") {
    CHECK(hermite(2, 0.0) == -1.0);
    CHECK(hermite(4, 0.0) == 3.0);
    CHECK(hermite(4, 1.0) == -2.0);
    CHECK(hermite(1, 0.3) == 0.3);
    CHECK_THROWS_AS(hermite(5, 1.0), DomainError);
    CHECK_THROWS_AS(hermite(0, 1.0), DomainError);
    Stream s(12, 0, 0);
    for (int k = 0; k < 1000; ++k) {
        const double z = 3.0 * s.normal();
        for (int n = 2; n <= 3; ++n) {
            const double lhs = hermite(n + 1, z);
            const double rhs = z * hermite(n, z) - n * hermite(n - 1, z);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
        }
        // H2 = z H1 - 1 * H0
        CHECK(hermite(2, z) == doctest::Approx(z * hermite(1, z) - 1.0).epsilon(1e-12));
    }
}

TEST_CASE("wick powers on fixed fields") {
    Torus t(2.0, 4);
    FieldConfig zero(t, 3);
    auto w2 = wick_norm2(zero, {1.0, 3, {}});
    CHECK((w2 == -3.0).all());
    FieldConfig ones(t, 3);
    ones.values.setOnes();
    CHECK((wick_norm2(ones, {0.0, 3, {}}) == 3.0).all());

    FieldConfig z1(t, 1);
    CHECK((wick_norm4(z1, {1.0, 1, {}}) == 3.0).all());
    FieldConfig e(t, 2);
    e.values.col(0).setOnes();
    CHECK((wick_norm4(e, {1.0, 2, {}}) == 1.0).all());
    Stream s(5, 0, 0);
    FieldConfig r(t, 2);
    for (Eigen::Index i = 0; i < r.values.size(); ++i) r.values(i) = s.normal();
    CHECK((wick_norm4(r, {0.0, 2, {}}) - r.norm2().square()).abs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(wick_norm4(r, {1.0, 3, {}}), DimensionError);
}

TEST_CASE("collapsed quartic polynomial equals the Hermite-product definition") {
    for (int k = 0; k < 1000; ++k) {
        Stream s(13, 0, k);
        const int N = 1 + int(s.uniform() * 8);
        const double C = 0.05 + 2.0 * s.uniform();
        Eigen::VectorXd z(N);
        for (int i = 0; i < N; ++i) z(i) = 2.0 * s.normal();
        const double a = wick_quartic(z.squaredNorm(), C, N);
        const double b = hermite_product_oracle(z, C);
        const double scale = std::pow(z.squaredNorm() + C * (N + 2), 2);
        CHECK(std::abs(a - b) <= 1e-12 * scale);
    }
}

TEST_CASE("quartic action and its lower bound") {
    Torus t(2.0, 8);  // eps = 1/4, a 4 x 4 block has unit area
    const auto unit = block_region(t, 4);
    for (int N : {1, 2, 5}) {
        FieldConfig z(t, N);
        CHECK(quartic_action(z, {1.0, N, {}}, unit) == doctest::Approx((N + 2) / 4.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(quartic_action(FieldConfig(t, 1), {1.0, 1, {}},
                                   Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(t.sites(), false)),
                    DomainError);

    CHECK(action_lower_bound({0.0, 3, {}}, 2.0) == 0.0);
    CHECK(action_lower_bound({1.0, 2, {}}, 4.0) == -4.0);

    for (int k = 0; k < 1000; ++k) {
        Stream s(14, 0, k);
        const int N = 1 + int(s.uniform() * 6);
        const WickContext ctx{0.1 + s.uniform(), N, {}};
        FieldConfig f(t, N);
        const double scale = 3.0 * s.uniform();
        for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values(i) = scale * s.normal();
        CHECK(quartic_action(f, ctx) >= action_lower_bound(ctx, t.area()));
        CHECK(quartic_action(f, ctx, unit) >= action_lower_bound(ctx, 1.0));
    }

    for (int N : {1, 3, 8}) {
        const WickContext ctx{0.7, N, {}};
        const FieldConfig eq = action_bound_equality_configuration(t, ctx, 99);
        const double bound = action_lower_bound(ctx, t.area());
        CHECK(std::abs(quartic_action(eq, ctx) - bound) <= 1e-9 * std::abs(bound));
        // the constant printed with the (C^2/4) prefactor lies above this minimum
        CHECK(quartic_action(eq, ctx) < -0.25 * ctx.C * ctx.C * (1.0 + 2.0 / N) * t.area());
    }
}

TEST_CASE("Wick powers are centred under the matched lattice GFF") {
    Torus t(2.0, 8);
    const double m = 0.9;
    const int N = 2;
    auto cov = make_covariance(m, t, Symbol::Lattice);
    const WickContext ctx{counterterm(m, t, Scheme::LatticeTadpole), N, {}};
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0, f1 = 0, f2 = 0;
    const int S = 100000;
    for (int d = 0; d < S; ++d) {
        Stream rng(15, 0, d);
        const FieldConfig f = sample_gff(cov, N, rng);
        const double u = wick_norm2(f, ctx).mean(), v = wick_norm4(f, ctx).mean(), F = quartic_action(f, ctx);
        a1 += u, a2 += u * u, b1 += v, b2 += v * v, f1 += F, f2 += F * F;
    }
    auto check_zero = [&](double s1, double s2) {
        const double mean = s1 / S, se = std::sqrt((s2 / S - mean * mean) / (S - 1));
        CHECK(std::abs(mean) < 3 * se);
    };
    check_zero(a1, a2);
    check_zero(b1, b2);
    check_zero(f1, f2);
}

TEST_CASE("exact quartic covariance") {
    Torus t(4.0, 16);
    const double eps = t.spacing();
    const double C = counterterm(1.0, t, Scheme::CutoffEta);
    CHECK(quartic_covariance_exact(1.0, t, Eigen::Vector2d(0, 0), 4, eps, eps) ==
          doctest::Approx(8.0 * 1.5 * std::pow(C, 4)).epsilon(1e-14));
    CHECK(quartic_covariance_prefactor(1 << 30) == doctest::Approx(8.0).epsilon(1e-8));
}

TEST_CASE("quartic covariance against Monte Carlo") {
    Torus t(4.0, 16);
    const double m = 1.0;
    auto cov = make_covariance(m, t, Symbol::Lattice);
    const Grid G = lattice_propagator(m, t);
    for (int N : {1, 4}) {
        const WickContext ctx{G(0, 0), N, {}};
        // physical displacement (1, 0) is 4 sites
        const int shift = 4;
        double s1 = 0, s2 = 0;
        const int S = 100000;
        for (int d = 0; d < S; ++d) {
            Stream rng(16, N, d);
            const FieldConfig f = sample_gff(cov, N, rng);
            Eigen::ArrayXd w = wick_norm4(f, ctx) / N;
            Eigen::Map<const Grid> W(w.data(), 16, 16);
            double acc = 0;
            for (int j = 0; j < 16; ++j)
                for (int i = 0; i < 16; ++i) acc += W(i, j) * W((i + shift) % 16, j);
            acc /= 256.0;
            s1 += acc;
            s2 += acc * acc;
        }
        const double mean = s1 / S, se = std::sqrt((s2 / S - mean * mean) / (S - 1));
        const double exact = quartic_covariance_lattice(m, t, Eigen::Vector2i(shift, 0), N);
        CHECK(std::abs(mean - exact) < 3 * se);
        if (N == 1) CHECK(exact == doctest::Approx(24.0 * std::pow(G(shift, 0), 4)).epsilon(1e-14));
    }
}

TEST_CASE("quartic second moment") {
    Torus t(4.0, 16);
    auto cov = make_covariance(1.0, t, Symbol::Lattice);
    Grid zero = Grid::Zero(16, 16);
    CHECK(mc_quartic_second_moment(cov, 2, zero, 200, 1).estimate == 0.0);
    CHECK_THROWS_AS(mc_quartic_second_moment(cov, 2, zero, 99, 1), DomainError);

    Grid phi(16, 16);
    for (int j = 0; j < 16; ++j)
        for (int i = 0; i < 16; ++i) {
            const double x = (i - 8) * t.spacing(), y = (j - 8) * t.spacing();
            phi(i, j) = cutoff_eta(std::sqrt(x * x + y * y) / 1.5);
        }
    CHECK(quartic_second_moment_exact(cov, 1, phi) / quartic_second_moment_exact(cov, 8, phi) ==
          doctest::Approx(2.4).epsilon(1e-13));

    // direct double sum over site pairs
    const Grid G = covariance_kernel(cov);
    long double acc = 0;
    for (int a = 0; a < 256; ++a)
        for (int b = 0; b < 256; ++b) {
            const int di = ((a % 16 - b % 16) + 16) % 16, dj = ((a / 16 - b / 16) + 16) % 16;
            acc += (long double)phi(a) * phi(b) * std::pow(G(di, dj), 4);
        }
    const double eps4 = std::pow(t.spacing(), 4);
    const double oracle = double(8.0L * (1.0L + 2.0L / 3) * eps4 * acc);
    CHECK(quartic_second_moment_exact(cov, 3, phi) == doctest::Approx(oracle).epsilon(1e-12));

    const McEstimate mc = mc_quartic_second_moment(cov, 3, phi, 40000, 17);
    CHECK(std::abs(mc.estimate - oracle) < 4 * mc.std_error);
}
