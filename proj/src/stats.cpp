#include "largen/stats.hpp"

#include "largen/errors.hpp"

#include <cmath>

namespace largen {

SeriesSummary summarize_series(const std::vector<double>& x, double c) {
    const long n = long(x.size());
    if (n < 2) throw DomainError("summarize_series needs at least two samples");
    const Eigen::Map<const Eigen::ArrayXd> a(x.data(), n);
    const double mean = a.mean();
    const Eigen::ArrayXd d = a - mean;
    const double c0 = d.square().sum() / n;
    SeriesSummary s{mean, c0 * n / (n - 1), 0.5, 0.0, double(n), 0, n};
    if (c0 == 0.0) return s;
    double tau = 0.5;
    int W = 0;
    for (int t = 1; t < n / 2; ++t) {
        const double ct = (d.head(n - t) * d.tail(n - t)).sum() / n;
        tau += ct / c0;
        W = t;
        if (W >= c * tau) break;
    }
    tau = std::max(tau, 0.5);
    s.tau_int = tau;
    s.window = W;
    s.std_error = std::sqrt(2.0 * tau * s.variance / n);
    s.n_eff = n / (2.0 * tau);
    return s;
}

Estimate jackknife(const Eigen::MatrixXd& series, int blocks,
                   const std::function<double(const Eigen::VectorXd&)>& f) {
    const Eigen::Index n = series.rows();
    if (blocks < 2 || n < blocks) throw DomainError("jackknife needs at least two blocks and one row per block");
    const Eigen::Index b = n / blocks;
    const Eigen::Index used = b * blocks;
    const Eigen::VectorXd total = series.topRows(used).colwise().sum().transpose();
    const double full = f(total / double(used));
    Eigen::VectorXd loo(blocks);
    for (int k = 0; k < blocks; ++k) {
        const Eigen::VectorXd part = series.middleRows(k * b, b).colwise().sum().transpose();
        loo(k) = f((total - part) / double(used - b));
    }
    const double mean = loo.mean();
    const double var = (loo.array() - mean).square().sum() * (blocks - 1) / blocks;
    return {full, std::sqrt(var)};
}

Estimate mean_iid(const std::vector<double>& x) {
    if (x.size() < 2) throw DomainError("mean_iid needs at least two samples");
    const Eigen::Map<const Eigen::ArrayXd> a(x.data(), Eigen::Index(x.size()));
    const double m = a.mean();
    const double v = (a - m).square().sum() / (a.size() - 1);
    return {m, std::sqrt(v / a.size())};
}

}  // namespace largen
