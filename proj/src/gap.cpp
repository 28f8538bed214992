#include "largen/gap.hpp"

#include "largen/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <cfloat>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace largen {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kFourPi = 4.0 * kPi;

double factor(double N) { return std::isinf(N) ? 1.0 : 1.0 + 2.0 / N; }

// Bessel bound K0(z) <= sqrt(pi / 2z) e^-z, summed over j > J of K0(a j)
double k0_image_tail(double a, int J) {
    const double z = a * (J + 1);
    return std::sqrt(kPi / (2.0 * z)) * std::exp(-z) / -std::expm1(-a);
}

// 1 / (x (e^{xL} - 1))
double bose(double x, double L) { return 1.0 / (x * std::expm1(x * L)); }

struct HParts {
    long double value = 0, derivative = 0;
    double tail = 0;
};

// h_L split as S1 + S2 after summing the second momentum component in closed
// form: L^-2 sum_k2 1/(a^2 + xi2^2) = coth(aL/2) / (2aL). S1 collects the
// 1/(2a) parts and is evaluated through its 1-d image sum (or directly for
// small mL); S2 collects the exponentially small coth corrections.
// smallest tolerance h_L can honour in double precision
double h_precision_floor(double m2, double L) {
    return 8.0 * DBL_EPSILON * (1.0 + std::abs(std::log(m2)) / kFourPi + 1.0 / (m2 * L * L));
}

HParts h_parts(double m2, double L, double tol) {
    if (!(m2 > 0.0) || !(L > 0.0)) throw DomainError("lattice_sum_h needs m^2 > 0 and L > 0");
    if (!(tol >= 0.0)) throw DomainError("lattice_sum_h needs tol >= 0");
    const double m = std::sqrt(m2);
    if (tol == 0.0) tol = 2.0 * h_precision_floor(m2, L);
    if (tol < h_precision_floor(m2, L))
        throw PrecisionError("lattice_sum_h: tol " + std::to_string(tol) + " is below double precision for this m^2, L");
    HParts out;
    const double a = m * L;
    if (a >= 0.05) {
        int J = 1;
        while (k0_image_tail(a, J) / kPi > tol / 4.0) {
            if (++J > 2000000) throw PrecisionError("lattice_sum_h: image sum too long");
        }
        long double s = std::log(m2) / kFourPi, d = 1.0 / (kFourPi * m2);
        for (int j = J + 8; j >= 1; --j) {
            const double z1 = j * L, z2 = j * a;
            if (j <= J) s += (std::cyl_bessel_k(0.0, z1) - std::cyl_bessel_k(0.0, z2)) / kPi;
            d += std::cyl_bessel_k(1.0, z2) * z1 / (2.0 * m) / kPi;
        }
        out.value += s;
        out.derivative += d;
        out.tail += k0_image_tail(a, J) / kPi;
    } else {
        // |1/(2a) - 1/(2b)| <= (1 - m^2) / (4 |xi|^3)
        const double c = (1.0 - m2) * L * L / (4.0 * std::pow(kTwoPi, 3));
        const double K = std::ceil(std::sqrt(c / (tol / 4.0)));
        if (K > 2e8) throw PrecisionError("lattice_sum_h: momentum sum too long");
        long double s = 0, d = 0;
        for (long k = long(K); k >= 0; --k) {
            const double xi = kTwoPi / L * double(k);
            const double ra = std::sqrt(1.0 + xi * xi), rb = std::sqrt(m2 + xi * xi);
            const double w = k == 0 ? 1.0 : 2.0;
            s -= w * (1.0 - m2) / (2.0 * ra * rb * (ra + rb)) / L;
            d += w / (4.0 * rb * rb * rb) / L;
        }
        out.value += s;
        out.derivative += d;
        out.tail += c / (K * K);
    }
    int K = 0;
    auto tail2 = [](int K) {
        const double q = K + 1.0;
        return std::exp(-kTwoPi * q) / (kPi * q * std::pow(-std::expm1(-kTwoPi), 2));
    };
    while (tail2(K) > tol / 4.0) ++K;
    long double s = 0, d = 0;
    for (int k = K; k >= 0; --k) {
        const double xi = kTwoPi / L * k;
        const double ra = std::sqrt(1.0 + xi * xi), rb = std::sqrt(m2 + xi * xi);
        const double w = k == 0 ? 1.0 : 2.0;
        s += w * (bose(ra, L) - bose(rb, L)) / L;
        const double e = std::expm1(rb * L);
        d += w * (e + rb * L * (e + 1.0)) / (2.0 * rb * rb * rb * e * e) / L;
    }
    out.value += s;
    out.derivative += d;
    out.tail += tail2(K);
    return out;
}

// finite mode lists for the cutoff and lattice equations:
// C^1 - C^m = L^-2 sum w (m^2 - 1) / ((1 + r2)(m^2 + r2))
struct ModeSum {
    std::vector<double> r2, w;
    double inv_area;

    long double diff(double m2) const {
        long double acc = 0;
        for (size_t i = 0; i < r2.size(); ++i)
            acc += w[i] * (m2 - 1.0) / ((1.0 + r2[i]) * (m2 + r2[i]));
        return acc * inv_area;
    }
    long double diff_derivative(double m2) const {
        long double acc = 0;
        for (size_t i = 0; i < r2.size(); ++i) acc += w[i] / ((m2 + r2[i]) * (m2 + r2[i]));
        return acc * inv_area;
    }
};

ModeSum cutoff_modes(double L, double eps) {
    ModeSum ms;
    ms.inv_area = 1.0 / (L * L);
    const double h = kTwoPi / L, rmax = 1.0 / eps;
    const int K = int(rmax / h) + 1;
    for (int k1 = -K; k1 <= K; ++k1)
        for (int k2 = -K; k2 <= K; ++k2) {
            const double x1 = h * k1, x2 = h * k2;
            const double r = std::sqrt(x1 * x1 + x2 * x2);
            if (r >= rmax) continue;
            const double eta = cutoff_eta(eps * r);
            ms.r2.push_back(r * r);
            ms.w.push_back(eta * eta);
        }
    return ms;
}

ModeSum lattice_modes(const Torus& t) {
    ModeSum ms;
    ms.inv_area = 1.0 / t.area();
    const Grid s = symbol_grid(t, Symbol::Lattice);
    ms.r2.assign(s.data(), s.data() + s.size());
    ms.w.assign(s.size(), 1.0);
    return ms;
}

class Equation {
public:
    explicit Equation(const GapProblem& p) : p_(p), c_(factor(p.N)) {
        if (p.reg == Regularization::CutoffEps) modes_ = cutoff_modes(p.L, p.eps);
        if (p.reg == Regularization::LatticeEps) modes_ = lattice_modes(Torus(p.L, p.n));
    }

    GapResidual at(double m2, double tol) const {
        const double base = m2 / p_.lambda + p_.beta;
        switch (p_.reg) {
            case Regularization::Continuum:
                return {base + std::log(m2) / kFourPi, 1.0 / p_.lambda + 1.0 / (kFourPi * m2), 0.0};
            case Regularization::FiniteVolume: {
                if (std::isinf(p_.L))
                    return {base + c_ * std::log(m2) / kFourPi, 1.0 / p_.lambda + c_ / (kFourPi * m2), 0.0};
                const HParts h = h_parts(m2, p_.L, std::max(tol, 2.0 * h_precision_floor(m2, p_.L)));
                return {double(base + c_ * h.value), double(1.0 / p_.lambda + c_ * h.derivative), c_ * h.tail};
            }
            default:
                return {double(base + c_ * modes_.diff(m2)),
                        double(1.0 / p_.lambda + c_ * modes_.diff_derivative(m2)), 0.0};
        }
    }

    // lower end of the bracket in u = ln m^2
    double lower_guess() const {
        switch (p_.reg) {
            case Regularization::Continuum:
                return continuum_log_mass_bounds(p_.lambda, p_.beta).first * 2.0;
            case Regularization::FiniteVolume:
                // m >= m** >= m*
                return -kFourPi * p_.beta - kFourPi * (1.0 / p_.lambda);
            case Regularization::CutoffEps:
                return 2.0 * std::log(cutoff_mass_lower_bound(p_.lambda, p_.beta, p_.N, p_.eps));
            default:
                return -1.0;
        }
    }

private:
    GapProblem p_;
    double c_;
    ModeSum modes_;
};

GapSolution solve_log(const Equation& eq, const GapProblem& p, double tol) {
    const double htol = tol / 10.0;
    auto F = [&](double u) { return eq.at(std::exp(u), htol); };
    double hi = 0.0;
    if (p.reg == Regularization::Continuum) hi = continuum_log_mass_bounds(p.lambda, p.beta).second * 2.0;
    double lo = eq.lower_guess();
    for (int i = 0; F(lo).value >= 0.0; ++i) {
        if (i > 60) throw NumericalError("gap solver: could not bracket the root from below");
        lo = 2.0 * lo - 1.0;
    }
    if (F(hi).value < 0.0) hi = 0.0;

    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        (F(mid).value < 0.0 ? lo : hi) = mid;
    }
    const std::pair<double, double> bracket{std::exp(lo), std::exp(hi)};

    double u = 0.5 * (lo + hi);
    GapResidual r = F(u);
    for (int it = 0; it < 100 && std::abs(r.value) > tol / 2.0; ++it) {
        const double step = r.value / (std::exp(u) * r.derivative);
        double next = u - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == u) break;
        u = next;
        r = F(u);
        (r.value < 0.0 ? lo : hi) = u;
    }
    if (p.reg == Regularization::Continuum) {
        // u = -4 pi beta - 4 pi m^2 / lambda written so that rounding keeps u
        // inside the bracket returned by continuum_log_mass_bounds
        u = -kFourPi * p.beta - kFourPi * (std::exp(u) / p.lambda);
        r = F(u);
    }
    return {std::exp(u), u, r.value, bracket, r.tail_bound};
}

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

// h^2 sum_{k in Z^2} f(h |k|) for radial, decreasing, non-negative f, enclosed
// in [lo, hi]: |k| <= K summed, the rest compared with shifted integrals
std::pair<double, double> radial_lattice_sum(const std::function<double(double)>& f, double h, int K) {
    long double acc = f(0.0);
    for (int k1 = 1; k1 <= K; ++k1)
        for (int k2 = 0; k1 * k1 + k2 * k2 <= K * K; ++k2)
            acc += 4.0L * f(h * std::sqrt(double(k1) * k1 + double(k2) * k2));
    const double c = std::sqrt(2.0) / 2.0;
    boost::math::quadrature::exp_sinh<double> q;
    double e1 = 0, e2 = 0;
    const double upper = kTwoPi * q.integrate([&](double r) { return f(h * r) * (r + c); }, K - 2.0 * c,
                                              INFINITY, 1e-13, &e1);
    const double lower = kTwoPi * q.integrate([&](double r) { return f(h * r) * (r - c); }, K + 2.0 * c,
                                              INFINITY, 1e-13, &e2);
    const double s = double(acc);
    return {h * h * (s + lower - 10.0 * e2), h * h * (s + upper + 10.0 * e1)};
}

RiemannCheck riemann_check(const std::function<double(double)>& f, double L) {
    const double h = kTwoPi / L;
    RiemannCheck c{};
    std::tie(c.sum_lo, c.sum_hi) = radial_lattice_sum(f, h, 1000);
    boost::math::quadrature::exp_sinh<double> q;
    double e1 = 0, e2 = 0;
    c.integral = kTwoPi * q.integrate([&](double t) { return f(t) * t; }, 0.0, INFINITY, 1e-13, &e1);
    c.axis_integral = q.integrate(f, 0.0, INFINITY, 1e-13, &e2);
    c.f0 = f(0.0);
    c.gap_bound = 3.0 * h * h * c.f0 + 4.0 * h * c.axis_integral;
    const double ierr = 10.0 * kTwoPi * e1 + 1e-12 * c.integral;
    c.lower_holds = c.sum_lo >= (c.integral + ierr) / 4.0;
    const double worst = std::max(std::abs(c.integral - c.sum_lo), std::abs(c.integral - c.sum_hi)) + ierr;
    c.gap_holds = worst <= c.gap_bound - 10.0 * e2;
    return c;
}

}  // namespace

void GapProblem::validate() const {
    require(lambda > 0.0, "gap problem needs lambda > 0");
    require(beta >= 0.0, "gap problem needs beta >= 0");
    require(N >= 1.0 && (std::isinf(N) || N == std::floor(N)), "gap problem needs N a positive integer or infinity");
    require(L > 0.0, "gap problem needs L > 0");
    switch (reg) {
        case Regularization::Continuum:
            require(std::isinf(N) && std::isinf(L), "continuum gap problem needs N = L = infinity");
            break;
        case Regularization::FiniteVolume:
            break;
        case Regularization::CutoffEps:
            require(!std::isinf(L) && !std::isinf(N), "cutoff gap problem needs finite N and L");
            require(eps > 0.0 && eps <= 1.0, "cutoff gap problem needs 0 < eps <= 1");
            break;
        case Regularization::LatticeEps:
            require(!std::isinf(L), "lattice gap problem needs finite L");
            require(n >= 4 && n % 2 == 0, "lattice gap problem needs even n >= 4");
            break;
    }
}

GapResidual gap_residual(const GapProblem& problem, double m_squared, double tol) {
    problem.validate();
    require(m_squared > 0.0, "gap_residual needs m^2 > 0");
    return Equation(problem).at(m_squared, tol);
}

GapSolution solve_gap(const GapProblem& problem, double tol) {
    problem.validate();
    require(tol > 0.0, "gap solver needs tol > 0");
    return solve_log(Equation(problem), problem, tol);
}

std::pair<double, double> continuum_log_mass_bounds(double lambda, double beta) {
    require(lambda > 0.0 && beta >= 0.0, "continuum mass bounds need lambda > 0, beta >= 0");
    return {(-kFourPi * beta - kFourPi * (1.0 / lambda)) / 2.0, (-kFourPi * beta) / 2.0};
}

GapSolution solve_gap_continuum(double lambda, double beta, double tol) {
    return solve_gap({lambda, beta, kInfinity, kInfinity, Regularization::Continuum}, tol);
}

CertifiedValue lattice_sum_h(double m_squared, double L, double tol) {
    if (m_squared == 1.0) return {0.0, 0.0};
    const HParts h = h_parts(m_squared, L, tol);
    return {double(h.value), h.tail};
}

CertifiedValue lattice_sum_h_derivative(double m_squared, double L, double tol) {
    const HParts h = h_parts(m_squared, L, tol);
    return {double(h.derivative), 0.0};
}

CertifiedValue lattice_sum_h_direct(double m_squared, double L, int R) {
    require(m_squared > 0.0 && L > 0.0 && R >= 2, "lattice_sum_h_direct needs m^2 > 0, L > 0, R >= 2");
    const double L2 = L * L, a2 = m_squared * L2;
    long double acc = 0;
    for (int k1 = -R; k1 <= R; ++k1)
        for (int k2 = -R; k2 <= R; ++k2) {
            const long kk = long(k1) * k1 + long(k2) * k2;
            if (kk > long(R) * R) continue;
            const double q2 = kTwoPi * kTwoPi * double(kk);
            acc += (a2 - L2) / ((L2 + q2) * (a2 + q2));
        }
    // |summand| <= (1 - m^2) L^2 / |2 pi k|^4
    const double tail = std::abs(1.0 - m_squared) * L2 / std::pow(kTwoPi, 4) * inverse_quartic_tail(R);
    return {double(acc), tail};
}

GapSolution solve_gap_finite(double lambda, double beta, double N, double L, double tol) {
    const bool cont = std::isinf(N) && std::isinf(L);
    return solve_gap({lambda, beta, N, L, cont ? Regularization::Continuum : Regularization::FiniteVolume}, tol);
}

GapSolution solve_gap_mstarstar(double lambda, double beta, double N, double tol) {
    return solve_gap_finite(lambda, beta, N, kInfinity, tol);
}

GapSolution solve_gap_cutoff(double lambda, double beta, double N, double L, double eps, double tol) {
    GapProblem p{lambda, beta, N, L, Regularization::CutoffEps};
    p.eps = eps;
    return solve_gap(p, tol);
}

GapSolution solve_gap_lattice(double lambda, double beta, double N, const Torus& torus, double tol) {
    GapProblem p{lambda, beta, N, torus.side(), Regularization::LatticeEps};
    p.n = torus.points();
    return solve_gap(p, tol);
}

double cutoff_mass_lower_bound(double lambda, double beta, double N, double eps) {
    require(lambda > 0.0 && beta >= 0.0 && N >= 1.0 && eps > 0.0, "cutoff_mass_lower_bound: bad parameters");
    const double r = std::isinf(N) ? 1.0 : N / (N + 2.0);
    return std::exp(-8.0 * kPi * r * (beta + 1.0 / lambda) - 2.0 * eps * eps);
}

PoissonReport verify_poisson_identity(double m, double L, double quad_tol) {
    require(m > 0.0 && L > 0.0 && quad_tol > 0.0, "verify_poisson_identity needs m, L, quad_tol > 0");
    const double m2 = m * m, a2 = m2 * L * L;
    auto term = [&](double r) {
        const double d = a2 + kTwoPi * kTwoPi * r * r;
        return m2 / (d * d);
    };
    const auto [lo, hi] = radial_lattice_sum(term, 1.0, 800);

    // theta(a)^2 with theta(a) = sum_j exp(-a j^2), dual form for small a
    auto theta = [](double a) {
        long double s = 1;
        if (a >= kPi) {
            for (int j = 1; j < 40; ++j) s += 2.0L * std::exp(-a * j * j);
            return double(s);
        }
        for (int j = 1; j < 40; ++j) s += 2.0L * std::exp(-kPi * kPi * j * j / a);
        return double(std::sqrt(kPi / a) * s);
    };
    auto integrand = [&](double s) {
        if (s == 0.0) return 1.0 / kFourPi;
        const double t = theta(m2 / (4.0 * s));
        return std::exp(-s * L * L) * t * t / kFourPi;
    };
    boost::math::quadrature::exp_sinh<double> q;
    double err = 0, l1 = 0;
    const double rhs = q.integrate(integrand, 0.0, INFINITY, quad_tol, &err, &l1);
    if (!(err <= 1e3 * quad_tol * std::max(1.0, std::abs(rhs))))
        throw NumericalError("verify_poisson_identity: quadrature error estimate " + std::to_string(err) +
                             " exceeds tolerance at m=" + std::to_string(m) + ", L=" + std::to_string(L));
    const double lhs = 0.5 * (lo + hi);
    return {lhs, 0.5 * (hi - lo), rhs, std::abs(lhs - rhs)};
}

RiemannReport verify_riemann_bounds(double m, double L) {
    require(m > 0.0 && m < 1.0 && L > 0.0, "verify_riemann_bounds needs 0 < m < 1 and L > 0");
    const double m2 = m * m;
    auto f1 = [m2](double r) {
        const double r2 = r * r;
        return (1.0 - m2) / ((1.0 + r2) * (m2 + r2));
    };
    auto f2 = [m2](double r) { return std::pow(m2 + r * r, -4.0 / 3.0); };
    return {riemann_check(f1, L), riemann_check(f2, L)};
}

NelsonReport verify_nelson_integral_bound(double lambda) {
    require(lambda >= std::numbers::e, "verify_nelson_integral_bound needs lambda >= e");
    auto f = [lambda](double M) { return lambda * M - std::exp(std::sqrt(M)); };
    // interior maximum at e^s = 2 lambda s, s = sqrt M > 1
    auto g = [lambda](double s) { return s - std::log(2.0 * lambda * s); };
    boost::math::tools::eps_tolerance<double> stop(50);
    std::uintmax_t iters = 200;
    const auto [s0, s1] = boost::math::tools::toms748_solve(g, 1.0, 10.0 + 2.0 * std::log(2.0 * lambda), stop, iters);
    const double Mstar = std::pow(0.5 * (s0 + s1), 2);
    const double fmax = std::max(f(Mstar), f(0.0));
    auto scaled = [&](double M) { return std::exp(f(M) - fmax); };

    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double top = 48.0 * lambda;
    const double body = GK::integrate(scaled, 0.0, Mstar, 20, 1e-13) + GK::integrate(scaled, Mstar, top, 20, 1e-13);
    boost::math::quadrature::exp_sinh<double> es;
    const double tail = es.integrate([&](double M) { return std::exp(f(M)); }, top, INFINITY, 1e-12);
    const double log_lhs = fmax + std::log(body + tail * std::exp(-fmax));
    const double log_rhs = std::log(50.0 * lambda) + 16.0 * lambda * std::pow(std::log(lambda), 2);
    return {log_lhs, log_rhs, tail, 4.0 * std::exp(-12.0 * lambda), log_lhs <= log_rhs};
}

}  // namespace largen
