#include "largen/spectral.hpp"

#include "largen/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <numbers>
#include <string>

namespace largen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> fft = [] {
        Eigen::FFT<double> f;
        f.SetFlag(Eigen::FFT<double>::Unscaled);
        return f;
    }();
    return fft;
}

// in-place 1-d transforms along both axes
void transform2d(ModeGrid& a, bool inverse) {
    auto& fft = fft_engine();
    const Eigen::Index n = a.rows();
    Eigen::VectorXcd in(n), out(n);
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            in = a.col(c).matrix();
            if (inverse)
                fft.inv(out.data(), in.data(), n);
            else
                fft.fwd(out.data(), in.data(), n);
            a.col(c) = out.array();
        }
        a.transposeInPlace();
    }
}

}  // namespace

Torus::Torus(double side_length, int grid_points) : L_(side_length), n_(grid_points) {
    if (!(side_length > 0.0) || !std::isfinite(side_length))
        throw DomainError("torus side length must be positive and finite");
    if (grid_points < 4 || grid_points % 2 != 0)
        throw DomainError("grid points must be even and at least 4, got " + std::to_string(grid_points));
}

double Torus::frequency(int a) const { return kTwoPi / L_ * wavenumber(a); }

FrequencyLattice build_frequency_lattice(const Torus& torus) {
    const int n = torus.points();
    const double eps = torus.spacing();
    FrequencyLattice lat{torus, {}};
    lat.modes.reserve(std::size_t(n) * n);
    for (int k1 = -n / 2 + 1; k1 <= n / 2; ++k1)
        for (int k2 = -n / 2 + 1; k2 <= n / 2; ++k2) {
            Mode m;
            m.k1 = k1;
            m.k2 = k2;
            m.xi1 = kTwoPi / torus.side() * k1;
            m.xi2 = kTwoPi / torus.side() * k2;
            m.continuum = m.xi1 * m.xi1 + m.xi2 * m.xi2;
            m.cutoff_weight = cutoff_eta(eps * std::sqrt(m.continuum));
            m.lattice = lattice_symbol(m.xi1, m.xi2, eps);
            lat.modes.push_back(m);
        }
    return lat;
}

Grid symbol_grid(const Torus& torus, Symbol symbol) {
    const int n = torus.points();
    const double eps = torus.spacing();
    Grid s(n, n);
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            const double x1 = torus.frequency(a), x2 = torus.frequency(b);
            s(a, b) = symbol == Symbol::Continuum ? x1 * x1 + x2 * x2 : lattice_symbol(x1, x2, eps);
        }
    return s;
}

double counterterm(double m, const Torus& torus, Scheme scheme) {
    if (!(m > 0.0)) throw DomainError("counterterm needs m > 0");
    if (scheme == Scheme::LatticeTadpole) {
        const Grid s = symbol_grid(torus, Symbol::Lattice);
        long double acc = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) acc += 1.0L / (m * m + s(i));
        return double(acc / torus.area());
    }
    const Eigen::Vector2d zero = Eigen::Vector2d::Zero();
    return greens_function(m, torus, torus.spacing(), torus.spacing(), zero);
}

double greens_function(double m, const Torus& torus, double eps1, double eps2,
                       const Eigen::Vector2d& d) {
    if (!(m > 0.0)) throw DomainError("greens_function needs m > 0");
    if (!(eps1 > 0.0) || !(eps2 > 0.0)) throw DomainError("greens_function needs positive cutoffs");
    const double L = torus.side();
    const double h = kTwoPi / L;
    // eta(eps|xi|) vanishes for |xi| >= 1/eps
    const double xi_max = 1.0 / std::max(eps1, eps2);
    const int K = int(xi_max / h) + 1;
    long double acc = 0;
    for (int k1 = -K; k1 <= K; ++k1)
        for (int k2 = -K; k2 <= K; ++k2) {
            const double x1 = h * k1, x2 = h * k2;
            const double r = std::sqrt(x1 * x1 + x2 * x2);
            if (r >= xi_max) continue;
            const double w = cutoff_eta(eps1 * r) * cutoff_eta(eps2 * r);
            acc += w * std::cos(x1 * d.x() + x2 * d.y()) / (m * m + r * r);
        }
    return double(acc / (L * L));
}

double inverse_quartic_tail(double K) {
    const double c = std::sqrt(2.0) / 2.0;
    const double a = K - 2.0 * c;
    if (a <= 0.0) return INFINITY;
    return kTwoPi * (1.0 / (2.0 * a * a) + c / (3.0 * a * a * a));
}

Grid lattice_propagator(double m, const Torus& torus) {
    const Grid s = symbol_grid(torus, Symbol::Lattice);
    const ModeGrid F = (1.0 / (m * m + s)).cast<std::complex<double>>();
    return fft_inverse(F, torus);
}

ModeGrid fft_forward(const ModeGrid& f, const Torus& torus) {
    if (f.rows() != torus.points() || f.cols() != torus.points())
        throw DimensionError("fft_forward: grid shape does not match torus");
    ModeGrid a = f;
    transform2d(a, false);
    const double eps = torus.spacing();
    a *= eps * eps;
    return a;
}

ModeGrid fft_forward(const Grid& f, const Torus& torus) {
    return fft_forward(ModeGrid(f.cast<std::complex<double>>()), torus);
}

ModeGrid fft_inverse_complex(const ModeGrid& F, const Torus& torus) {
    if (F.rows() != torus.points() || F.cols() != torus.points())
        throw DimensionError("fft_inverse: grid shape does not match torus");
    ModeGrid a = F;
    transform2d(a, true);
    a /= torus.area();
    return a;
}

Grid fft_inverse(const ModeGrid& F, const Torus& torus) {
    return fft_inverse_complex(F, torus).real();
}

double hminus1_inner(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& psi, double m,
                     const Torus& torus) {
    if (phi.rows() != psi.rows() || phi.cols() != psi.cols())
        throw DimensionError("hminus1_inner: phi and psi have different shapes");
    if (phi.rows() != torus.sites())
        throw DimensionError("hminus1_inner: field does not live on this torus");
    const int n = torus.points();
    const Grid w = 1.0 / (m * m + symbol_grid(torus, Symbol::Continuum));
    double acc = 0;
    for (Eigen::Index c = 0; c < phi.cols(); ++c) {
        const ModeGrid a = fft_forward(Grid(component_grid(phi, int(c), n)), torus);
        const ModeGrid b = fft_forward(Grid(component_grid(psi, int(c), n)), torus);
        acc += ((a * b.conjugate()).real() * w).sum();
    }
    return acc / torus.area();
}

}  // namespace largen
