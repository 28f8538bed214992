#include "largen/wick.hpp"

#include <string>

namespace largen {

namespace {

void check_components(const FieldConfig& field, const WickContext& ctx) {
    if (field.components() != ctx.N)
        throw DimensionError("field has " + std::to_string(field.components()) + " components, context expects " +
                             std::to_string(ctx.N));
}

}  // namespace

Eigen::ArrayXd wick_norm2(const FieldConfig& field, const WickContext& ctx) {
    check_components(field, ctx);
    return field.norm2() - ctx.N * ctx.C;
}

Eigen::ArrayXd wick_norm4(const FieldConfig& field, const WickContext& ctx) {
    check_components(field, ctx);
    const Eigen::ArrayXd s = field.norm2();
    return s.unaryExpr([&](double v) { return wick_quartic(v, ctx.C, ctx.N); });
}

double quartic_action(const FieldConfig& field, const WickContext& ctx,
                      const Eigen::Array<bool, Eigen::Dynamic, 1>& region) {
    if (region.size() != field.torus.sites()) throw DimensionError("quartic_action: region mask has wrong size");
    if (!region.any()) throw DomainError("quartic_action: empty region");
    const double eps = field.torus.spacing();
    const Eigen::ArrayXd w = wick_norm4(field, ctx);
    return eps * eps / (4.0 * ctx.N) * region.select(w, 0.0).sum();
}

double quartic_action(const FieldConfig& field, const WickContext& ctx) {
    const double eps = field.torus.spacing();
    return eps * eps / (4.0 * ctx.N) * wick_norm4(field, ctx).sum();
}

double action_lower_bound(const WickContext& ctx, double area) {
    if (!(area > 0.0)) throw DomainError("action_lower_bound: area must be positive");
    return -0.5 * ctx.C * ctx.C * (1.0 + 2.0 / ctx.N) * area;
}

FieldConfig action_bound_equality_configuration(const Torus& torus, const WickContext& ctx, std::uint64_t seed) {
    FieldConfig f(torus, ctx.N);
    const double radius = std::sqrt(ctx.C * (ctx.N + 2));
    for (int x = 0; x < torus.sites(); ++x) {
        Stream rng(seed, 0, std::uint64_t(x));
        Eigen::VectorXd v(ctx.N);
        for (int i = 0; i < ctx.N; ++i) v(i) = rng.normal();
        f.values.row(x) = radius * v.normalized().transpose();
    }
    return f;
}

double quartic_covariance_exact(double m, const Torus& torus, const Eigen::Vector2d& d, int N, double eps1,
                                double eps2) {
    const double G = greens_function(m, torus, eps1, eps2, d);
    return quartic_covariance_prefactor(N) * G * G * G * G;
}

double quartic_covariance_lattice(double m, const Torus& torus, const Eigen::Vector2i& d, int N) {
    const Grid G = lattice_propagator(m, torus);
    const int n = torus.points();
    const double g = G(((d.x() % n) + n) % n, ((d.y() % n) + n) % n);
    return quartic_covariance_prefactor(N) * g * g * g * g;
}

Grid covariance_kernel(const SpectralCovariance& cov) {
    return fft_inverse(ModeGrid(cov.variance.cast<std::complex<double>>()), cov.torus);
}

double quartic_second_moment_exact(const SpectralCovariance& cov, int N, const Grid& phi) {
    const Grid G = covariance_kernel(cov);
    const ModeGrid K = fft_forward(Grid(G.square().square()), cov.torus);
    const ModeGrid P = fft_forward(phi, cov.torus);
    return quartic_covariance_prefactor(N) * (P.abs2() * K.real()).sum() / cov.torus.area();
}

McEstimate mc_quartic_second_moment(const SpectralCovariance& cov, int N, const Grid& phi, int samples,
                                    std::uint64_t experiment) {
    if (samples < 100) throw DomainError("mc_quartic_second_moment: need at least 100 samples");
    const Torus& t = cov.torus;
    if (phi.rows() != t.points() || phi.cols() != t.points())
        throw DimensionError("mc_quartic_second_moment: test function has wrong shape");
    const WickContext ctx{covariance_kernel(cov)(0, 0), N, {}};
    const double eps2 = t.spacing() * t.spacing();
    const Eigen::Map<const Eigen::ArrayXd> w(phi.data(), phi.size());
    double s1 = 0, s2 = 0;
    for (int d = 0; d < samples; ++d) {
        Stream rng(experiment, 0, std::uint64_t(d));
        const FieldConfig f = sample_gff(cov, N, rng);
        const double x = eps2 / N * (wick_norm4(f, ctx) * w).sum();
        s1 += x * x;
        s2 += x * x * x * x;
    }
    const double mean = s1 / samples;
    return {mean, std::sqrt((s2 / samples - mean * mean) / (samples - 1))};
}

}  // namespace largen
