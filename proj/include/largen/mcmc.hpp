#pragma once

// Hybrid Monte Carlo for the lattice O(N) model and thermodynamic integration.
//
// Every action here has the form
//   S(Phi) = (1/2) sum_x sum_mu |Phi(x + mu) - Phi(x)|^2
//          + eps^2 sum_x [q0 + q2 |Phi(x)|^2 + q4 |Phi(x)|^4],
// i.e. (eps^2/2) sum |grad_eps Phi|^2 plus a site-local polynomial. The model
// measure uses the beta form; the m-Wick form exp(-s F_m) d mu_m is the family
// that thermodynamic integration walks along.

#include "largen/field.hpp"
#include "largen/stats.hpp"
#include "largen/wick.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace largen {

struct ModelParams {
    double lambda = 1.0;
    double beta = 0.0;
    int N = 1;
    Torus torus{8.0, 32};
    CountertermScheme scheme{};
    double mass = 1.0;  // lattice gap mass, or the free mass when lambda = 0
    double C = 0.0;     // counterterm at scheme.reference_mass
};

// fills C and solves the lattice gap equation for the mass (lambda > 0)
ModelParams make_model_params(double lambda, double beta, int N, const Torus& torus);
// lambda = 0 model around a given free mass
ModelParams make_free_params(double mass, int N, const Torus& torus);

struct Potential {
    double q0 = 0.0, q2 = 0.0, q4 = 0.0;
};

struct LatticeModel {
    Torus torus;
    int N;
    Potential pot;
    double trajectory_mass;  // sets the default HMC trajectory length
};

LatticeModel beta_form(const ModelParams& p);
// S_GFF,m + s F_m with F_m the m-Wick quartic action and m = p.mass
LatticeModel wick_form(const ModelParams& p, double coupling);

double lattice_action(const FieldConfig& field, const LatticeModel& model);
double lattice_action(const FieldConfig& field, const ModelParams& p);  // beta form
FieldConfig action_gradient(const FieldConfig& field, const LatticeModel& model);
FieldConfig action_gradient(const FieldConfig& field, const ModelParams& p);

// counterterm C_m of the m-Wick form
double wick_counterterm(const ModelParams& p);
// F_m(Phi), the m-Wick quartic action over the whole torus
double wick_quartic_action(const FieldConfig& field, const ModelParams& p);
// S_beta - S_wick(lambda) = (q2_beta - q2_wick) eps^2 sum |Phi|^2 - q0_wick L^2;
// the quadratic coefficient vanishes when p.mass solves the lattice gap equation
double form_difference(const FieldConfig& field, const ModelParams& p);
// exact Var_{mu_m}(F_m) from Wick contractions
double wick_action_variance(const ModelParams& p);

struct AcceptanceStats {
    std::uint64_t proposed = 0, accepted = 0;
    std::uint64_t window_proposed = 0, window_accepted = 0;
    std::uint64_t nonfinite = 0;
    double rate() const { return proposed ? double(accepted) / proposed : 0.0; }
};

struct ChainState {
    FieldConfig field;
    double step_size;
    int trajectory_steps;
    AcceptanceStats acceptance;
    std::uint64_t seed;
    std::uint64_t chain;
    std::uint64_t sweep = 0;  // completed trajectories; trajectory k draws from Stream(seed, chain, k)
};

// GFF start at the model's trajectory mass, step size from the stability limit
ChainState init_chain(const LatticeModel& model, std::uint64_t seed, std::uint64_t chain);

struct HmcResult {
    double delta_h;
    bool accepted;
    bool finite;
};
// one leapfrog trajectory with a Metropolis test on the total Hamiltonian; the
// step count is drawn uniformly from [1/2, 3/2] of trajectory_steps
HmcResult hmc_step(ChainState& state, const LatticeModel& model);

struct Schedule {
    std::uint64_t thermalization = 200;
    std::uint64_t measurements = 1000;  // trajectories after thermalization
    std::uint64_t stride = 1;
    double target_acceptance = 0.775;
};

struct Observable {
    std::string name;
    std::function<double(const FieldConfig&)> fn;
};

struct MeasurementRecord {
    std::string observable;
    std::uint64_t sweep;
    double value;
};
using RecordSink = std::function<void(const MeasurementRecord&)>;

// Advances state until sweep == thermalization + measurements or stop_after
// trajectories in this call. Emits "thermalization_action" during
// thermalization, "delta_h" for every measurement trajectory, and each
// observable every stride trajectories. The step size is tuned towards the
// target acceptance in windows of 25 during thermalization, then frozen.
void run_chain(ChainState& state, const LatticeModel& model, const Schedule& schedule,
               const std::vector<Observable>& observables, const RecordSink& sink,
               std::uint64_t stop_after = std::numeric_limits<std::uint64_t>::max());

std::vector<MeasurementRecord> run_chain(const LatticeModel& model, const Schedule& schedule,
                                         const std::vector<Observable>& observables, std::uint64_t seed,
                                         std::uint64_t chain = 0);

std::vector<double> series_of(const std::vector<MeasurementRecord>& records, const std::string& name);

// false when the last quarter of the thermalization actions still drifts
// against the third quarter by more than 4 combined standard errors
bool thermalized(const std::vector<MeasurementRecord>& records);

// mean of exp(-delta_h) over the measurement phase with its error
Estimate exp_minus_delta_h(const std::vector<MeasurementRecord>& records);

struct ThermoNode {
    double coupling;
    Estimate mean_F;  // E_{nu_s}[F_m]
    double tau_int;
};

struct ThermoResult {
    std::vector<ThermoNode> nodes;
    std::vector<Estimate> log_z;  // log Z(s_k), cumulative trapezoid
    Estimate log_z_total;
    Estimate log_z_per_volume;
    bool needs_refinement;  // every-other-node rule disagrees by more than 3 sigma
};

// geometric grid 0, s_min, ..., lambda with `points` positive nodes
std::vector<double> coupling_grid(double lambda, int points, double s_min_fraction = 1.0 / 64);

ThermoResult thermo_integrate_logZ(const ModelParams& p, const std::vector<double>& grid, const Schedule& schedule,
                                   std::uint64_t seed);

struct EntropyResult {
    Estimate H;
    Estimate H_per_volume;
    ThermoResult thermo;
};
// H(nu | mu_m^N) = -lambda E_nu[F_m] - log Z, i.e. int_0^lambda (E_s F - E_lambda F) ds
EntropyResult estimate_relative_entropy(const ModelParams& p, const std::vector<double>& grid,
                                        const Schedule& schedule, std::uint64_t seed);
EntropyResult relative_entropy_from(const ThermoResult& thermo, const ModelParams& p);

}  // namespace largen
