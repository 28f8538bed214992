#pragma once

#include "largen/spectral.hpp"

#include <string>

namespace largen {

struct FieldMeta {
    Scheme scheme = Scheme::LatticeTadpole;
    double reference_mass = 1.0;
    double mass = 1.0;       // mass of the Gaussian the field was drawn from / measured against
    std::string lineage;     // RNG provenance, e.g. "gff:exp=3,chain=0,draw=17"
};

// N real components on the n x n grid; column c holds component c with flat
// site index i + n * j.
struct FieldConfig {
    FieldConfig(const Torus& t, int N) : torus(t), values(Eigen::MatrixXd::Zero(t.sites(), N)) {}

    int components() const { return int(values.cols()); }
    Eigen::Map<const Grid> component(int c) const { return component_grid(values, c, torus.points()); }
    Eigen::Map<Grid> component(int c) { return component_grid(values, c, torus.points()); }
    // per-site |Phi(x)|^2 as a flat column
    Eigen::ArrayXd norm2() const { return values.rowwise().squaredNorm().array(); }

    Torus torus;
    Eigen::MatrixXd values;
    FieldMeta meta;
};

}  // namespace largen
