#pragma once

// Exact massive GFF sampling on the torus and closed-form Gaussian information
// geometry. Mode variances are normalised as v(xi) = E|hat Phi(xi)|^2 / L^2
// = 1 / (m^2 + symbol(xi)); every real field has one real degree of freedom per
// grid mode, which is the bookkeeping shared by the sampler, the MGF and the
// entropy sums below.

#include "largen/field.hpp"
#include "largen/rng.hpp"
#include "largen/spectral.hpp"

#include <utility>
#include <vector>

namespace largen {

struct SpectralCovariance {
    double mass;
    Torus torus;
    Symbol symbol;
    Grid variance;  // 1 / (m^2 + symbol), laid out as a mode grid
};

SpectralCovariance make_covariance(double m, const Torus& torus, Symbol symbol);

// Half-spectrum bookkeeping: flat mode indices (a + n b) of each conjugate pair
// (k, -k) with k first in flat order, and the four self-conjugate modes.
struct ModePairs {
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> self_conjugate;
};
const ModePairs& mode_pairs(int n);

// One mode grid hat Phi with E|hat Phi|^2 = L^2 v and conjugate symmetry.
ModeGrid sample_modes(const SpectralCovariance& cov, Stream& rng);

FieldConfig sample_gff(const SpectralCovariance& cov, int N, Stream& rng);

struct CertifiedValue {
    double value;
    double tail_bound;  // rigorous bound on what the grid truncation omits
};

double relative_entropy_density(double m_star, double m, const Torus& torus);
CertifiedValue relative_entropy_density_certified(double m_star, double m, const Torus& torus);

double gaussian_w2_h1m(double m1, double m2, double cost_mass, const Torus& torus);

// log E exp(A int (|Phi|^2 - N C) dx) for the lattice (default) or continuum
// symbol with C the matching tadpole; throws DivergenceError when some mode has
// 1 - 2A/(m^2 + symbol) <= 0.
double wick_mass_log_mgf(double A, double m, const Torus& torus, int N,
                         Symbol symbol = Symbol::Lattice);

struct TalagrandResult {
    double w2_sq;
    double two_h;
};

// Candidate N(a, diag(r) Sigma) against reference N(0, Sigma); the shift a is
// given in Sigma^{1/2} units, so both outputs are Sigma^{-1}-weighted.
TalagrandResult talagrand_gaussian_check(const Eigen::VectorXd& mean_shift,
                                         const Eigen::VectorXd& diag_cov_ratio);

// log(1 - t) + t without cancellation for small t
double log1m_plus(double t);

}  // namespace largen
