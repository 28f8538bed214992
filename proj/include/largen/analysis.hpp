#pragma once

// Estimators over sampled fields: correlators and effective masses, the
// fourth cumulant of a smeared marginal, cylindrical-observable gaps, mode
// variances, and the beta scan of the continuum mass.

#include "largen/field.hpp"
#include "largen/gff.hpp"
#include "largen/mcmc.hpp"
#include "largen/stats.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace largen {

enum class CorrelatorKind {
    Point,   // translation average of Phi_c(x) Phi_c(x + z e)
    Origin,  // Phi_c(0) Phi_c(z e) only, no translation average
    Slice,   // zero transverse momentum: eps sum_y <Phi_c(0, 0) Phi_c(z, y)>
};

struct Correlator {
    std::vector<double> displacement;  // z = 0, eps, ..., L - eps
    Eigen::VectorXd value;
    Eigen::VectorXd error;
    CorrelatorKind kind = CorrelatorKind::Slice;
    bool component_averaged = true;
    std::uint64_t params_hash = 0;
    // per-measurement rows [C(z_0..z_{n-1}), spatial mean of each component],
    // kept so fits can be jackknifed; empty for analytic correlators
    Eigen::MatrixXd rows;
    int blocks = 0;
};

// one row of Correlator::rows; axis 0 or 1, or -1 to average both axes
Eigen::VectorXd correlator_row(const FieldConfig& field, int axis, CorrelatorKind kind);

// connected correlator with blocked-jackknife errors; needs at least 100 rows
Correlator two_point_function(const Eigen::MatrixXd& rows, const Torus& torus, CorrelatorKind kind, int blocks = 50);
Correlator two_point_function(const std::vector<FieldConfig>& samples, int axis,
                              CorrelatorKind kind = CorrelatorKind::Slice, int blocks = 50);

// exact lattice GFF correlator of the requested kind (Origin is the same as Point)
Correlator exact_lattice_correlator(double m, const Torus& torus, CorrelatorKind kind);

// mass E of cosh(E (z - L/2)) for the lattice symbol: sinh(eps E / 2) = eps m / 2
double lattice_pole_mass(double m, double eps);
// inverse of lattice_pole_mass
double lattice_symbol_mass(double E, double eps);

struct FitWindow {
    double z_min = -1.0, z_max = -1.0;  // negative: [L/4, 3L/4]
};

struct MassFit {
    double mass;
    double error;
    double amplitude;
    double chi2;  // uncorrelated, over the window
    int points;
    double z_min, z_max;
};

// least squares fit of A cosh(E (z - L/2)); jackknifed when the correlator
// carries rows. Throws NumericalError if the correlator is not positive on the window.
MassFit effective_mass(const Correlator& corr, const Torus& torus, FitWindow window = {});

// compactly supported bump exp(1 - 1/(1 - r^2/R^2)) on the torus, r the
// periodic distance from the centre
Grid bump(const Torus& torus, double cx, double cy, double radius);
// eps^2 sum_x g(x) Phi_c(x)
double smear(const FieldConfig& field, int component, const Grid& g);

struct SmearedFamily {
    std::vector<Grid> functions;
};
// translates of one bump of radius L/4 on a 4 x 4 grid of centres
SmearedFamily default_smeared_family(const Torus& torus);

// per-configuration moment row: mean over components and family members of X, X^2, X^3, X^4
Eigen::Vector4d moment_row(const FieldConfig& field, const SmearedFamily& family);

// kappa_4 = E X^4 - 3 (E X^2)^2 generalised to non-zero mean, jackknifed over
// moment rows; needs 1000 rows
Estimate connected_four_cumulant(const Eigen::MatrixXd& moment_rows, int blocks = 50);

enum class CylindricalKind { Tanh, Quadratic };

struct CylindricalSpec {
    std::string kind = "quadratic";  // "tanh": tanh(a X); "quadratic": a X^2
    double amplitude = 1.0;
    double radius = -1.0;  // bump radius, negative: L/4
    int translates = 4;    // evaluate() averages over a translates x translates grid of shifts
};

struct CylindricalObservable {
    CylindricalKind kind;
    double amplitude;
    Grid g;                    // centred at (L/2, L/2)
    std::vector<Grid> shifted;  // translates of g, g included
    double operator()(double x) const;
    // mean of G(<Phi_c, g'>) over components c and translates g'; by
    // translation and O(N) invariance it estimates E G(<Phi_1, g>)
    double evaluate(const FieldConfig& field) const;
};

// rejects kinds outside the admissible family, non-finite amplitudes, and
// bumps whose support wraps the torus
CylindricalObservable make_cylindrical(const CylindricalSpec& spec, const Torus& torus);

// E G(X) for X ~ N(0, Var_mu <Phi_1, g>), the variance summed exactly over modes
double gaussian_cylindrical_mean(const CylindricalObservable& obs, double m, const Torus& torus,
                                 Symbol symbol = Symbol::Lattice);

struct GapEstimate {
    double gap;
    double error;
    double nu_mean;
    double mu_mean;
};

// |E_nu G - E_mu G| from a series of evaluate() values under nu
GapEstimate cylindrical_observable_gap(const std::vector<double>& nu_series, const CylindricalObservable& obs,
                                       double m, const Torus& torus);

struct ModeVarianceTable {
    Grid variance;  // E|hat Phi_c(xi)|^2 / L^2 averaged over components
    Grid error;
    Grid n_eff;  // per-sample variance / error^2
    long samples;
};

// keeps block means of block_size consecutive samples
class ModeVarianceAccumulator {
public:
    explicit ModeVarianceAccumulator(const Torus& torus, int block_size = 50);
    void add(const FieldConfig& field);
    // mean over complete blocks, errors from their scatter; needs two blocks
    ModeVarianceTable table() const;

private:
    Torus torus_;
    int block_size_;
    Grid current_, current_sq_, sum_sq_;
    int in_current_ = 0;
    std::vector<Grid> blocks_;
};

struct ProxyEstimate {
    double value;      // bias corrected
    double raw;
    double error;
};

// (1/L^2) sum_xi (m*^2 + symbol) (sqrt v - sqrt v_ref)^2
double h1_variance_proxy(const Grid& v, const Grid& v_ref, double m_star, const Torus& torus, Symbol symbol);
// proxy against the GFF at mass m_ref with the weight at m_star; subtracts the
// noise contribution error^2 / (4 v) per mode
ProxyEstimate mode_variance_proxy(const ModeVarianceTable& t, double m_ref, double m_star, const Torus& torus,
                                  Symbol symbol = Symbol::Lattice);

struct TrendReport {
    std::string abscissa_name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_error;
    bool log_log = false;  // fit ln|y| against ln x
    size_t fit_first = 0, fit_last = 0;  // inclusive window into x
    double slope = 0, slope_error = 0;
    double intercept = 0, intercept_error = 0;
};

// weighted least squares when every error is positive, ordinary otherwise;
// fills slope and intercept from the recorded window
void fit_trend(TrendReport& report);
TrendReport make_trend(std::string name, std::vector<double> x, std::vector<double> y, std::vector<double> err,
                       bool log_log);

struct BetaScan {
    TrendReport trend;              // ln m* against beta
    std::vector<bool> inside_bounds;
    double slope_relative_error;    // |slope + 2 pi| / (2 pi)
    double intercept_offset;        // intercept - 0, compared to the 2 pi / lambda band
};
BetaScan mass_beta_scan(double lambda, const std::vector<double>& beta_grid);

// one point of a large-N scan: a beta-form chain at p with kappa_4 of the
// default smeared family, the cylindrical gap against the GFF at p.mass and
// the mode-variance proxy against the same GFF
struct LargeNPoint {
    int N;
    double mass;
    Estimate kappa4;
    GapEstimate gap;
    ProxyEstimate proxy;
    double acceptance;
    Estimate exp_minus_delta_h;
    double gap_tau_int;
};
LargeNPoint measure_large_n(const ModelParams& p, const Schedule& schedule, std::uint64_t seed,
                            const CylindricalSpec& observable = {});

}  // namespace largen
