#pragma once

// Gap equations for the mass of the large-N reference Gaussian, in four
// regularisations, plus the elementary-integral certificates behind them.
//
// Every solver works in u = ln m^2 and returns m^2 together with the residual
// of the equation in its natural units (m^2/lambda + ... + beta).

#include "largen/errors.hpp"
#include "largen/gff.hpp"
#include "largen/spectral.hpp"

#include <limits>
#include <utility>

namespace largen {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Regularization { Continuum, FiniteVolume, CutoffEps, LatticeEps };

struct GapProblem {
    double lambda = 1.0;
    double beta = 0.0;
    double N = kInfinity;  // positive integer or infinity
    double L = kInfinity;  // positive or infinity
    Regularization reg = Regularization::Continuum;
    double eps = 0.0;  // CutoffEps
    int n = 0;         // LatticeEps: torus points per side, eps = L / n

    void validate() const;
};

struct GapSolution {
    double m_squared;
    double log_m_squared;  // the solver's variable; m_squared = exp(log_m_squared)
    double residual;
    std::pair<double, double> bracket;  // final bisection bracket in m^2
    double truncation_certificate;      // bound on the omitted part of any infinite sum
};

// residual of the equation at m^2 and its m^2-derivative
struct GapResidual {
    double value;
    double derivative;
    double tail_bound;
};
GapResidual gap_residual(const GapProblem& problem, double m_squared, double tol = 1e-14);

GapSolution solve_gap(const GapProblem& problem, double tol = 1e-13);

// m*^2/lambda + (1/4pi) ln m*^2 = -beta
GapSolution solve_gap_continuum(double lambda, double beta, double tol = 1e-13);

// h_L(m^2) = L^-2 sum_{xi in (2pi/L) Z^2} [1/(1+|xi|^2) - 1/(m^2+|xi|^2)];
// tol = 0 asks for the best tolerance double precision supports, an explicit
// tol below that throws PrecisionError
CertifiedValue lattice_sum_h(double m_squared, double L, double tol = 0.0);
// derivative in m^2, same truncation
CertifiedValue lattice_sum_h_derivative(double m_squared, double L, double tol = 0.0);
// plain paired momentum sum truncated at |k| <= R, used as an oracle
CertifiedValue lattice_sum_h_direct(double m_squared, double L, int R);

// m^2/lambda + (1+2/N) h_L(m^2) = -beta; N and L may be infinite
GapSolution solve_gap_finite(double lambda, double beta, double N, double L, double tol = 1e-13);

// the L = infinity equation at finite N
GapSolution solve_gap_mstarstar(double lambda, double beta, double N, double tol = 1e-13);

// counterterms C_{eps,L} in the smooth-cutoff scheme, exact finite sums
GapSolution solve_gap_cutoff(double lambda, double beta, double N, double L, double eps,
                             double tol = 1e-13);

// counterterms from the lattice symbol over the n x n grid; N may be infinite
GapSolution solve_gap_lattice(double lambda, double beta, double N, const Torus& torus,
                              double tol = 1e-13);

// exp(-8 pi (N/(N+2)) (beta + 1/lambda) - 2 eps^2), a lower bound on m_eps
double cutoff_mass_lower_bound(double lambda, double beta, double N, double eps);

// ln m* is bracketed by [-2 pi (beta + 1/lambda), -2 pi beta]; both ends in the
// same floating-point form the continuum solver uses
std::pair<double, double> continuum_log_mass_bounds(double lambda, double beta);

// sum_k m^2/(m^2 L^2 + |2 pi k|^2)^2 against its heat-kernel integral
struct PoissonReport {
    double lhs;
    double lhs_error;  // half-width of the certified interval for the sum
    double rhs;
    double residual;
};
PoissonReport verify_poisson_identity(double m, double L, double quad_tol = 1e-13);

struct RiemannCheck {
    double sum_lo, sum_hi;  // certified interval for (2pi/L)^2 sum_xi f(xi)
    double integral;        // int_{R^2} f
    double axis_integral;   // int_0^inf f(t, 0) dt
    double f0;
    double gap_bound;       // 3 h^2 f(0) + 4 h axis_integral
    bool lower_holds;       // sum >= integral / 4
    bool gap_holds;         // |integral - sum| <= gap_bound
};
struct RiemannReport {
    RiemannCheck paired;      // (1 - m^2) / ((1+|xi|^2)(m^2+|xi|^2))
    RiemannCheck power_43;    // (m^2 + |xi|^2)^(-4/3)
};
RiemannReport verify_riemann_bounds(double m, double L);

struct NelsonReport {
    double log_lhs;
    double log_rhs;
    double tail_above;      // numerical value of the integral over [48 lambda, inf)
    double tail_certificate;  // 4 exp(-12 lambda)
    bool holds;
};
NelsonReport verify_nelson_integral_bound(double lambda);

}  // namespace largen
