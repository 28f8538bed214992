#pragma once

// Error analysis for correlated Monte Carlo series.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace largen {

struct Estimate {
    double value;
    double error;
};

struct SeriesSummary {
    double mean;
    double variance;
    double tau_int;    // integrated autocorrelation time, 1/2 for iid data
    double std_error;  // sqrt(2 tau_int variance / n)
    double n_eff;      // n / (2 tau_int)
    int window;
    long n;
};

// Sokal's automatic window: the smallest W with W >= c tau_int(W).
SeriesSummary summarize_series(const std::vector<double>& x, double c = 6.0);

// Blocked jackknife of f(column means); rows are time, columns observables.
// Blocks should be longer than the autocorrelation time.
Estimate jackknife(const Eigen::MatrixXd& series, int blocks,
                   const std::function<double(const Eigen::VectorXd&)>& f);

// mean and error of x assuming independent samples
Estimate mean_iid(const std::vector<double>& x);

}  // namespace largen
