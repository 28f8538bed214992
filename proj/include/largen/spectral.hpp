#pragma once

// Torus geometry, momentum lattices, the smooth cutoff, FFT convention and
// counterterm / Green's function sums.
//
// Conventions (frozen, checkpoints depend on them):
//   * site (i, j) sits at x = eps * (i, j); grids are n x n Eigen arrays,
//     column-major, so the flat site index is i + n * j.
//   * grid position a along an axis carries wavenumber k = a for a <= n/2 and
//     k = a - n otherwise, i.e. k in {-n/2+1, ..., n/2}; xi = (2 pi / L) k.
//   * fft_forward(f)(xi) = eps^2 sum_x f(x) exp(-i xi.x)        ("hat f")
//     fft_inverse(F)(x)  = L^-2  sum_xi F(xi) exp(+i xi.x)
//     so that eps^2 sum_x |f|^2 = L^-2 sum_xi |hat f|^2.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace largen {

class Torus {
public:
    Torus(double side_length, int grid_points);

    double side() const { return L_; }
    int points() const { return n_; }
    double spacing() const { return L_ / n_; }
    double area() const { return L_ * L_; }
    int sites() const { return n_ * n_; }

    // grid position -> signed wavenumber
    int wavenumber(int a) const { return a <= n_ / 2 ? a : a - n_; }
    double frequency(int a) const;

    bool operator==(const Torus& o) const { return L_ == o.L_ && n_ == o.n_; }

private:
    double L_;
    int n_;
};

using Grid = Eigen::ArrayXXd;
using ModeGrid = Eigen::ArrayXXcd;

enum class Symbol { Continuum, Lattice };

struct Mode {
    int k1, k2;
    double xi1, xi2;
    double continuum;      // |xi|^2
    double cutoff_weight;  // eta(eps |xi|)
    double lattice;        // (4/eps^2) sum sin^2(eps xi_i / 2)
};

struct FrequencyLattice {
    Torus torus;
    std::vector<Mode> modes;  // row-major in (k1, k2), k in {-n/2+1..n/2}
};

FrequencyLattice build_frequency_lattice(const Torus& torus);

template <typename Scalar>
Scalar lattice_symbol(Scalar xi1, Scalar xi2, Scalar eps) {
    using std::sin;
    const Scalar s1 = sin(eps * xi1 / 2), s2 = sin(eps * xi2 / 2);
    return Scalar(4) / (eps * eps) * (s1 * s1 + s2 * s2);
}

// m^2-independent symbol table laid out like an FFT mode grid
Grid symbol_grid(const Torus& torus, Symbol symbol);

template <typename Scalar>
Scalar cutoff_eta(Scalar r) {
    using std::exp;
    if (r <= Scalar(0.5)) return Scalar(1);
    if (r >= Scalar(1)) return Scalar(0);
    const Scalar a = exp(Scalar(-1) / (2 - 2 * r));
    const Scalar b = exp(Scalar(-1) / (2 * r - 1));
    return a / (a + b);
}

enum class Scheme { CutoffEta, LatticeTadpole };

struct CountertermScheme {
    Scheme tag = Scheme::LatticeTadpole;
    double reference_mass = 1.0;
};

double counterterm(double m, const Torus& torus, Scheme scheme);

// L^-2 sum_xi eta(eps1|xi|) eta(eps2|xi|) cos(xi.d) / (m^2 + |xi|^2)
double greens_function(double m, const Torus& torus, double eps1, double eps2,
                       const Eigen::Vector2d& displacement);

// exact lattice propagator L^-2 sum_grid cos(xi.d) / (m^2 + xihat^2) for all
// lattice displacements d, indexed like a site grid
Grid lattice_propagator(double m, const Torus& torus);

// bound on sum_{k in Z^2, |k| >= K} |k|^-4 from comparing each lattice point
// with its unit cell; infinite for K <= sqrt 2
double inverse_quartic_tail(double K);

ModeGrid fft_forward(const Grid& f, const Torus& torus);
ModeGrid fft_forward(const ModeGrid& f, const Torus& torus);
ModeGrid fft_inverse_complex(const ModeGrid& F, const Torus& torus);
Grid fft_inverse(const ModeGrid& F, const Torus& torus);  // real part

// sum over components of L^-2 sum_xi hat phi conj(hat psi) / (m^2 + |xi|^2);
// phi and psi are (n^2 x N) with one component per column
double hminus1_inner(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& psi, double m,
                     const Torus& torus);

inline Eigen::Map<const Grid> component_grid(const Eigen::MatrixXd& values, int c, int n) {
    return Eigen::Map<const Grid>(values.col(c).data(), n, n);
}
inline Eigen::Map<Grid> component_grid(Eigen::MatrixXd& values, int c, int n) {
    return Eigen::Map<Grid>(values.col(c).data(), n, n);
}

}  // namespace largen
