#include "largen/gff.hpp"

#include "largen/errors.hpp"

#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace largen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

SpectralCovariance make_covariance(double m, const Torus& torus, Symbol symbol) {
    if (!(m > 0.0)) throw DomainError("covariance mass must be positive");
    return {m, torus, symbol, 1.0 / (m * m + symbol_grid(torus, symbol))};
}

const ModePairs& mode_pairs(int n) {
    static std::mutex mu;
    static std::map<int, ModePairs> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    ModePairs mp;
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            const int idx = a + n * b;
            const int partner = (n - a) % n + n * ((n - b) % n);
            if (partner == idx)
                mp.self_conjugate.push_back(idx);
            else if (idx < partner)
                mp.pairs.emplace_back(idx, partner);
        }
    return cache.emplace(n, std::move(mp)).first->second;
}

ModeGrid sample_modes(const SpectralCovariance& cov, Stream& rng) {
    const int n = cov.torus.points();
    const double L = cov.torus.side();
    const ModePairs& mp = mode_pairs(n);
    ModeGrid F(n, n);
    for (auto [p, q] : mp.pairs) {
        const double s = L * std::sqrt(cov.variance(p) / 2.0);
        const double re = rng.normal(), im = rng.normal();
        F(p) = {s * re, s * im};
        F(q) = {s * re, -s * im};
    }
    for (int p : mp.self_conjugate) F(p) = {L * std::sqrt(cov.variance(p)) * rng.normal(), 0.0};
    return F;
}

FieldConfig sample_gff(const SpectralCovariance& cov, int N, Stream& rng) {
    if (N < 1) throw DomainError("sample_gff needs N >= 1");
    FieldConfig f(cov.torus, N);
    // two real components per complex inverse transform
    for (int c = 0; c < N; c += 2) {
        ModeGrid F = sample_modes(cov, rng);
        if (c + 1 < N) F += std::complex<double>(0.0, 1.0) * sample_modes(cov, rng);
        const ModeGrid z = fft_inverse_complex(F, cov.torus);
        f.component(c) = z.real();
        if (c + 1 < N) f.component(c + 1) = z.imag();
    }
    f.meta.mass = cov.mass;
    f.meta.scheme = cov.symbol == Symbol::Lattice ? Scheme::LatticeTadpole : Scheme::CutoffEta;
    f.meta.lineage = "gff:exp=" + std::to_string(rng.experiment()) + ",chain=" + std::to_string(rng.chain()) +
                     ",draw=" + std::to_string(rng.draw());
    return f;
}

double log1m_plus(double t) {
    if (std::abs(t) < 0.1) {
        // -sum_{j>=2} t^j / j
        double term = t * t, acc = 0.0;
        for (int j = 2; j < 40; ++j) {
            acc -= term / j;
            term *= t;
        }
        return acc;
    }
    return std::log1p(-t) + t;
}

CertifiedValue relative_entropy_density_certified(double m_star, double m, const Torus& torus) {
    if (!(m_star > 0.0) || !(m > 0.0)) throw DomainError("relative_entropy_density needs positive masses");
    const Grid s = symbol_grid(torus, Symbol::Continuum);
    const double d = m_star * m_star - m * m;
    long double acc = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        // u - 1 - ln u with u - 1 = d / (|xi|^2 + m^2)
        const double x = d / (s(i) + m * m);
        acc += -log1m_plus(-x);
    }
    const double L = torus.side();
    const double value = double(acc / (2.0L * L * L));

    // omitted modes have |k| >= n/2 and there x - ln(1+x) <= x^2 once |x| <= 1/2
    const double K = torus.points() / 2.0;
    const double xi_min = kTwoPi / L * K;
    double tail = INFINITY;
    if (xi_min * xi_min >= 2.0 * std::abs(d)) {
        const double scale = std::pow(L / kTwoPi, 4);
        tail = d * d / (2.0 * L * L) * scale * inverse_quartic_tail(K);
    }
    return {value, tail};
}

double relative_entropy_density(double m_star, double m, const Torus& torus) {
    return relative_entropy_density_certified(m_star, m, torus).value;
}

double gaussian_w2_h1m(double m1, double m2, double cost_mass, const Torus& torus) {
    if (!(m1 > 0.0) || !(m2 > 0.0) || !(cost_mass > 0.0))
        throw DomainError("gaussian_w2_h1m needs positive masses");
    const Grid s = symbol_grid(torus, Symbol::Continuum);
    const Grid diff = (m1 * m1 + s).rsqrt() - (m2 * m2 + s).rsqrt();
    return ((cost_mass * cost_mass + s) * diff.square()).sum() / torus.area();
}

double wick_mass_log_mgf(double A, double m, const Torus& torus, int N, Symbol symbol) {
    if (!(m > 0.0)) throw DomainError("wick_mass_log_mgf needs m > 0");
    if (N < 1) throw DomainError("wick_mass_log_mgf needs N >= 1");
    const FrequencyLattice lat = build_frequency_lattice(torus);
    long double acc = 0;
    for (const Mode& md : lat.modes) {
        const double sym = symbol == Symbol::Lattice ? md.lattice : md.continuum;
        const double t = 2.0 * A / (m * m + sym);
        if (!(1.0 - t > 0.0))
            throw DivergenceError("exponential moment diverges: 1 - 2A/(m^2+symbol) <= 0 at mode k=(" +
                                      std::to_string(md.k1) + "," + std::to_string(md.k2) + ")",
                                  md.k1, md.k2);
        acc += log1m_plus(t);
    }
    return double(-0.5L * N * acc);
}

TalagrandResult talagrand_gaussian_check(const Eigen::VectorXd& a, const Eigen::VectorXd& r) {
    if (a.size() != r.size() || a.size() < 1)
        throw DimensionError("talagrand_gaussian_check: shift and ratio sizes differ or are empty");
    if ((r.array() <= 0.0).any()) throw DomainError("talagrand_gaussian_check: covariance ratios must be positive");
    double w2 = 0.0, h2 = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double shift = a(i) * a(i);
        const double sd = std::sqrt(r(i)) - 1.0;
        w2 += shift + sd * sd;
        // r - 1 - ln r
        h2 += shift - log1m_plus(1.0 - r(i));
    }
    return {w2, h2};
}

}  // namespace largen
