#pragma once

// Hermite polynomials, Wick powers of the N-component field and the exact
// Gaussian covariance identities they obey.

#include "largen/errors.hpp"
#include "largen/field.hpp"
#include "largen/gff.hpp"

#include <cstdint>

namespace largen {

struct WickContext {
    double C = 0.0;  // counterterm (tadpole)
    int N = 1;
    CountertermScheme scheme{};
};

// probabilists' Hermite polynomials, positive leading coefficient
template <typename Scalar>
Scalar hermite(int order, Scalar z) {
    switch (order) {
        case 1: return z;
        case 2: return z * z - 1;
        case 3: return z * z * z - 3 * z;
        case 4: return z * z * z * z - 6 * z * z + 3;
        default: throw DomainError("hermite: order must be in {1,2,3,4}");
    }
}

// :|Phi|^4: as a polynomial in s = |Phi|^2
template <typename Scalar>
Scalar wick_quartic(Scalar s, Scalar C, int N) {
    return s * s - C * Scalar(2 * N + 4) * s + C * C * Scalar(N) * Scalar(N + 2);
}

Eigen::ArrayXd wick_norm2(const FieldConfig& field, const WickContext& ctx);
Eigen::ArrayXd wick_norm4(const FieldConfig& field, const WickContext& ctx);

// (1/4N) eps^2 sum_{x in region} :|Phi(x)|^4:, region a flat site mask
double quartic_action(const FieldConfig& field, const WickContext& ctx,
                      const Eigen::Array<bool, Eigen::Dynamic, 1>& region);
double quartic_action(const FieldConfig& field, const WickContext& ctx);

// minimum of quartic_action over all fields on a region of the given area:
// -(C^2/2)(1 + 2/N) area, attained iff |Phi(x)|^2 = C(N + 2) everywhere
double action_lower_bound(const WickContext& ctx, double area);

// a configuration with |Phi(x)|^2 = C(N + 2) at every site, random directions
FieldConfig action_bound_equality_configuration(const Torus& torus, const WickContext& ctx,
                                                std::uint64_t seed);

// E[(1/N):|Z(x)|^4: (1/N):|Z(y)|^4:] = 8 (1 + 2/N) G(x - y)^4
inline double quartic_covariance_prefactor(int N) { return 8.0 * (1.0 + 2.0 / N); }

double quartic_covariance_exact(double m, const Torus& torus, const Eigen::Vector2d& displacement, int N,
                                double eps1, double eps2);
// same identity for the lattice GFF, G the exact lattice propagator
double quartic_covariance_lattice(double m, const Torus& torus, const Eigen::Vector2i& displacement, int N);

struct McEstimate {
    double estimate;
    double std_error;
};

// E[(int (1/N):|Z|^4: phi)^2] with C = G(0) of the given covariance
McEstimate mc_quartic_second_moment(const SpectralCovariance& cov, int N, const Grid& phi, int samples,
                                    std::uint64_t experiment);
double quartic_second_moment_exact(const SpectralCovariance& cov, int N, const Grid& phi);

// real-space covariance G(d) of the grid GFF described by cov
Grid covariance_kernel(const SpectralCovariance& cov);

}  // namespace largen
