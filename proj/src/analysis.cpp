#include "largen/analysis.hpp"

#include "largen/errors.hpp"
#include "largen/gap.hpp"

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace largen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct VectorJackknife {
    Eigen::VectorXd value, error;
};

// blocked jackknife of a vector-valued function of column means
VectorJackknife jackknife_vector(const Eigen::MatrixXd& rows, int blocks,
                                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
    const Eigen::Index n = rows.rows();
    if (blocks < 2 || n < blocks) throw DomainError("jackknife needs at least two blocks and one row per block");
    const Eigen::Index b = n / blocks, used = b * blocks;
    const Eigen::VectorXd total = rows.topRows(used).colwise().sum().transpose();
    VectorJackknife out{f(total / double(used)), {}};
    Eigen::MatrixXd loo(out.value.size(), blocks);
    for (int k = 0; k < blocks; ++k)
        loo.col(k) = f((total - rows.middleRows(k * b, b).colwise().sum().transpose()) / double(used - b));
    const Eigen::VectorXd mean = loo.rowwise().mean();
    out.error = ((loo.colwise() - mean).array().square().rowwise().sum() * (blocks - 1.0) / blocks).sqrt();
    return out;
}

Grid autocorrelation(const Grid& X, const Torus& t) {
    const ModeGrid F = fft_forward(X, t);
    return fft_inverse(ModeGrid(F.abs2().cast<std::complex<double>>()), t) / t.area();
}

double periodic_distance(double a, double b, double L) {
    const double d = std::abs(a - b);
    return std::min(d, L - d);
}

int correlator_length(const Torus& t) { return t.points(); }

}  // namespace

Eigen::VectorXd correlator_row(const FieldConfig& f, int axis, CorrelatorKind kind) {
    if (axis < -1 || axis > 1) throw DomainError("correlator axis must be 0, 1 or -1");
    const Torus& t = f.torus;
    const int n = t.points(), N = f.components();
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n + N);
    for (int c = 0; c < N; ++c) {
        const Grid X = f.component(c);
        row(n + c) = X.mean();
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
        switch (kind) {
        case CorrelatorKind::Point: {
            const Grid P = autocorrelation(X, t);
            a = P.col(0).matrix();
            b = P.row(0).transpose().matrix();
            break;
        }
        case CorrelatorKind::Origin:
            a = X(0, 0) * X.col(0).matrix();
            b = X(0, 0) * X.row(0).transpose().matrix();
            break;
        case CorrelatorKind::Slice: {
            const Eigen::ArrayXd s0 = X.rowwise().mean(), s1 = X.colwise().mean().transpose();
            for (int z = 0; z < n; ++z)
                for (int u = 0; u < n; ++u) {
                    a(z) += s0(u) * s0((u + z) % n);
                    b(z) += s1(u) * s1((u + z) % n);
                }
            a *= t.side() / n;
            b *= t.side() / n;
            break;
        }
        }
        row.head(n) += axis == 0 ? a : axis == 1 ? b : Eigen::VectorXd(0.5 * (a + b));
    }
    row.head(n) /= N;
    return row;
}

Correlator two_point_function(const Eigen::MatrixXd& rows, const Torus& t, CorrelatorKind kind, int blocks) {
    const int n = correlator_length(t);
    if (rows.cols() <= n) throw DimensionError("correlator rows need n values plus one mean per component");
    if (rows.rows() < 100) throw DomainError("two_point_function needs at least 100 samples, got " + std::to_string(rows.rows()));
    const int N = int(rows.cols()) - n;
    const double disc = kind == CorrelatorKind::Slice ? t.side() : 1.0;
    const auto f = [=](const Eigen::VectorXd& m) -> Eigen::VectorXd {
        return m.head(n).array() - disc * m.tail(N).squaredNorm() / N;
    };
    const VectorJackknife j = jackknife_vector(rows, std::min<int>(blocks, int(rows.rows())), f);
    Correlator c;
    for (int z = 0; z < n; ++z) c.displacement.push_back(z * t.spacing());
    c.value = j.value;
    c.error = j.error;
    c.kind = kind;
    c.rows = rows;
    c.blocks = std::min<int>(blocks, int(rows.rows()));
    return c;
}

Correlator two_point_function(const std::vector<FieldConfig>& samples, int axis, CorrelatorKind kind, int blocks) {
    if (samples.empty()) throw DomainError("two_point_function needs samples");
    Eigen::MatrixXd rows(samples.size(), samples[0].torus.points() + samples[0].components());
    for (size_t k = 0; k < samples.size(); ++k) rows.row(k) = correlator_row(samples[k], axis, kind).transpose();
    return two_point_function(rows, samples[0].torus, kind, blocks);
}

Correlator exact_lattice_correlator(double m, const Torus& t, CorrelatorKind kind) {
    if (!(m > 0.0)) throw DomainError("exact_lattice_correlator needs m > 0");
    const int n = t.points();
    const double eps = t.spacing();
    Correlator c;
    c.kind = kind;
    c.value.resize(n);
    c.error = Eigen::VectorXd::Zero(n);
    if (kind == CorrelatorKind::Slice) {
        for (int z = 0; z < n; ++z) {
            long double acc = 0;
            for (int a = 0; a < n; ++a) {
                const double xi = kTwoPi * t.wavenumber(a) / t.side();
                const double s = std::sin(0.5 * xi * eps);
                acc += std::cos(xi * z * eps) / (m * m + 4.0 * s * s / (eps * eps));
            }
            c.value(z) = double(acc) / t.side();
        }
    } else {
        const Grid G = lattice_propagator(m, t);
        c.value = G.col(0).matrix();
    }
    for (int z = 0; z < n; ++z) c.displacement.push_back(z * eps);
    return c;
}

double lattice_pole_mass(double m, double eps) { return 2.0 / eps * std::asinh(0.5 * eps * m); }
double lattice_symbol_mass(double E, double eps) { return 2.0 / eps * std::sinh(0.5 * eps * E); }

namespace {

struct CoshFit {
    double E, A, chi2;
};

CoshFit fit_cosh(const std::vector<double>& z, const std::vector<double>& c, const std::vector<double>& w, double half,
                 double e_max) {
    const auto solve = [&](double E) {
        double sbb = 0, sbc = 0;
        for (size_t i = 0; i < z.size(); ++i) {
            const double b = std::cosh(E * (z[i] - half));
            sbb += w[i] * b * b;
            sbc += w[i] * b * c[i];
        }
        const double A = sbc / sbb;
        double chi = 0;
        for (size_t i = 0; i < z.size(); ++i) chi += w[i] * std::pow(c[i] - A * std::cosh(E * (z[i] - half)), 2);
        return CoshFit{E, A, chi};
    };
    // coarse log scan, then Brent between the neighbours of the best point
    const int K = 200;
    const double lo = 1e-4 * e_max;
    int best = 0;
    double best_chi = INFINITY;
    std::vector<double> grid(K);
    for (int k = 0; k < K; ++k) {
        grid[k] = lo * std::pow(e_max / lo, double(k) / (K - 1));
        const double chi = solve(grid[k]).chi2;
        if (chi < best_chi) best_chi = chi, best = k;
    }
    const double a = best > 0 ? grid[best - 1] : 0.0, b = best + 1 < K ? grid[best + 1] : e_max;
    const auto r = boost::math::tools::brent_find_minima([&](double E) { return solve(E).chi2; }, a, b, 52);
    return solve(r.first);
}

}  // namespace

MassFit effective_mass(const Correlator& corr, const Torus& t, FitWindow window) {
    const double L = t.side(), eps = t.spacing();
    const double zmin = window.z_min < 0 ? 0.25 * L : window.z_min;
    const double zmax = window.z_max < 0 ? 0.75 * L : window.z_max;
    if (!(zmax > zmin)) throw DomainError("effective_mass: empty fit window");
    std::vector<int> idx;
    for (size_t i = 0; i < corr.displacement.size(); ++i)
        if (corr.displacement[i] >= zmin - 1e-9 * eps && corr.displacement[i] <= zmax + 1e-9 * eps) idx.push_back(int(i));
    if (idx.size() < 3) throw DomainError("effective_mass: fewer than three points in the fit window");

    std::vector<double> z, c, w;
    bool weighted = true;
    for (int i : idx) weighted = weighted && corr.error(i) > 0.0;
    for (int i : idx) {
        if (!(corr.value(i) > 0.0)) {
            std::ostringstream msg;
            msg << "effective_mass: correlator not positive in the fit window, C(" << corr.displacement[i]
                << ") = " << corr.value(i) << " +- " << corr.error(i);
            throw NumericalError(msg.str());
        }
        z.push_back(corr.displacement[i]);
        c.push_back(corr.value(i));
        w.push_back(weighted ? 1.0 / (corr.error(i) * corr.error(i)) : 1.0);
    }
    const double e_max = 8.0 / eps;
    const CoshFit f = fit_cosh(z, c, w, 0.5 * L, e_max);
    MassFit out{f.E, 0.0, f.A, weighted ? f.chi2 : 0.0, int(idx.size()), zmin, zmax};

    if (corr.rows.size() > 0 && corr.blocks >= 2) {
        const int n = int(corr.displacement.size());
        const int N = int(corr.rows.cols()) - n;
        const double disc = corr.kind == CorrelatorKind::Slice ? L : 1.0;
        const auto refit = [&](const Eigen::VectorXd& m) -> Eigen::VectorXd {
            std::vector<double> cc;
            for (int i : idx) cc.push_back(m(i) - disc * m.tail(N).squaredNorm() / N);
            Eigen::VectorXd r(1);
            r(0) = fit_cosh(z, cc, w, 0.5 * L, e_max).E;
            return r;
        };
        out.error = jackknife_vector(corr.rows, corr.blocks, refit).error(0);
    }
    return out;
}

Grid bump(const Torus& t, double cx, double cy, double radius) {
    const int n = t.points();
    Grid g = Grid::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double dx = periodic_distance(i * t.spacing(), cx, t.side());
            const double dy = periodic_distance(j * t.spacing(), cy, t.side());
            const double r2 = (dx * dx + dy * dy) / (radius * radius);
            if (r2 < 1.0) g(i, j) = std::exp(1.0 - 1.0 / (1.0 - r2));
        }
    return g;
}

double smear(const FieldConfig& f, int c, const Grid& g) {
    const double eps = f.torus.spacing();
    return eps * eps * (f.component(c) * g).sum();
}

SmearedFamily default_smeared_family(const Torus& t) {
    SmearedFamily fam;
    const double L = t.side();
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) fam.functions.push_back(bump(t, i * L / 4, j * L / 4, L / 4));
    return fam;
}

Eigen::Vector4d moment_row(const FieldConfig& f, const SmearedFamily& fam) {
    Eigen::Vector4d m = Eigen::Vector4d::Zero();
    for (int c = 0; c < f.components(); ++c)
        for (const Grid& g : fam.functions) {
            const double x = smear(f, c, g), x2 = x * x;
            m += Eigen::Vector4d(x, x2, x2 * x, x2 * x2);
        }
    return m / double(f.components() * fam.functions.size());
}

Estimate connected_four_cumulant(const Eigen::MatrixXd& rows, int blocks) {
    if (rows.cols() != 4) throw DimensionError("connected_four_cumulant expects moment rows of width 4");
    if (rows.rows() < 1000)
        throw DomainError("connected_four_cumulant needs at least 1000 samples, got " + std::to_string(rows.rows()));
    return jackknife(rows, blocks, [](const Eigen::VectorXd& m) {
        const double m1 = m(0), m2 = m(1), m3 = m(2), m4 = m(3);
        return m4 - 4 * m3 * m1 - 3 * m2 * m2 + 12 * m2 * m1 * m1 - 6 * std::pow(m1, 4);
    });
}

double CylindricalObservable::operator()(double x) const {
    return kind == CylindricalKind::Tanh ? std::tanh(amplitude * x) : amplitude * x * x;
}

double CylindricalObservable::evaluate(const FieldConfig& f) const {
    double s = 0;
    for (const Grid& h : shifted)
        for (int c = 0; c < f.components(); ++c) s += (*this)(smear(f, c, h));
    return s / (f.components() * double(shifted.size()));
}

CylindricalObservable make_cylindrical(const CylindricalSpec& spec, const Torus& t) {
    CylindricalKind kind;
    if (spec.kind == "tanh")
        kind = CylindricalKind::Tanh;
    else if (spec.kind == "quadratic")
        kind = CylindricalKind::Quadratic;
    else
        throw DomainError("observable kind '" + spec.kind +
                          "' is not admissible; the shipped family is tanh (bounded derivatives) and quadratic "
                          "(bounded Hessian)");
    if (!std::isfinite(spec.amplitude) || spec.amplitude == 0.0)
        throw DomainError("cylindrical observable amplitude must be finite and non-zero");
    const double R = spec.radius < 0 ? 0.25 * t.side() : spec.radius;
    if (!(R > t.spacing()) || !(R < 0.5 * t.side()))
        throw DomainError("cylindrical test function radius must lie in (eps, L/2)");
    if (spec.translates < 1) throw DomainError("cylindrical observable needs at least one translate");
    CylindricalObservable o{kind, spec.amplitude, bump(t, 0.5 * t.side(), 0.5 * t.side(), R), {}};
    const double step = t.side() / spec.translates;
    for (int j = 0; j < spec.translates; ++j)
        for (int i = 0; i < spec.translates; ++i)
            o.shifted.push_back(bump(t, 0.5 * t.side() + i * step, 0.5 * t.side() + j * step, R));
    return o;
}

double gaussian_cylindrical_mean(const CylindricalObservable& obs, double m, const Torus& t, Symbol symbol) {
    const SpectralCovariance cov = make_covariance(m, t, symbol);
    const ModeGrid G = fft_forward(obs.g, t);
    const double sigma = std::sqrt((G.abs2() * cov.variance).sum() / t.area());
    boost::math::quadrature::sinh_sinh<double> q;
    const double norm = 1.0 / std::sqrt(kTwoPi);
    return q.integrate([&](double z) { return obs(sigma * z) * norm * std::exp(-0.5 * z * z); });
}

GapEstimate cylindrical_observable_gap(const std::vector<double>& nu, const CylindricalObservable& obs, double m,
                                       const Torus& t) {
    const SeriesSummary s = summarize_series(nu);
    const double mu = gaussian_cylindrical_mean(obs, m, t);
    return {std::abs(s.mean - mu), s.std_error, s.mean, mu};
}

ModeVarianceAccumulator::ModeVarianceAccumulator(const Torus& t, int block_size)
    : torus_(t), block_size_(block_size), current_(Grid::Zero(t.points(), t.points())),
      current_sq_(Grid::Zero(t.points(), t.points())), sum_sq_(Grid::Zero(t.points(), t.points())) {
    if (block_size < 1) throw DomainError("mode variance block size must be positive");
}

void ModeVarianceAccumulator::add(const FieldConfig& f) {
    if (!(f.torus == torus_)) throw DimensionError("mode variance accumulator: torus mismatch");
    const int n = torus_.points(), N = f.components();
    Grid v = Grid::Zero(n, n);
    // two real components per complex transform: |X^|^2 + |Y^|^2 = (|F(xi)|^2 + |F(-xi)|^2) / 2
    for (int c = 0; c + 1 < N; c += 2) {
        const ModeGrid F = fft_forward(ModeGrid(f.component(c).cast<std::complex<double>>() +
                                                std::complex<double>(0, 1) * f.component(c + 1).cast<std::complex<double>>()),
                                       torus_);
        const Grid P = F.abs2();
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) v(a, b) += 0.5 * (P(a, b) + P((n - a) % n, (n - b) % n));
    }
    if (N % 2) v += fft_forward(Grid(f.component(N - 1)), torus_).abs2();
    v /= N * torus_.area();
    current_ += v;
    current_sq_ += v.square();
    if (++in_current_ == block_size_) {
        blocks_.push_back(current_ / block_size_);
        sum_sq_ += current_sq_;
        current_.setZero();
        current_sq_.setZero();
        in_current_ = 0;
    }
}

ModeVarianceTable ModeVarianceAccumulator::table() const {
    const int B = int(blocks_.size());
    if (B < 2) throw DomainError("mode variance table needs at least two complete blocks");
    const int n = torus_.points();
    Grid mean = Grid::Zero(n, n), sq = Grid::Zero(n, n);
    for (const Grid& bm : blocks_) {
        mean += bm;
        sq += bm.square();
    }
    mean /= B;
    const Grid var = (sq / B - mean.square()).max(0.0) * B / (B - 1.0);
    const double S = double(B) * block_size_;
    const Grid sample_var = (sum_sq_ / S - mean.square()).max(0.0) * S / (S - 1.0);
    const Grid err2 = var / B;
    return {mean, err2.sqrt(), (err2 > 0.0).select(sample_var / err2, S), long(S)};
}

double h1_variance_proxy(const Grid& v, const Grid& v_ref, double m_star, const Torus& t, Symbol symbol) {
    const Grid s = symbol_grid(t, symbol);
    return ((m_star * m_star + s) * (v.sqrt() - v_ref.sqrt()).square()).sum() / t.area();
}

ProxyEstimate mode_variance_proxy(const ModeVarianceTable& tab, double m_ref, double m_star, const Torus& t,
                                  Symbol symbol) {
    const Grid s = symbol_grid(t, symbol);
    const Grid vref = make_covariance(m_ref, t, symbol).variance;
    const Grid w = (m_star * m_star + s) / t.area();
    const Grid v = tab.variance.max(1e-300);
    const Grid d = v.sqrt() - vref.sqrt();
    const Grid noise = tab.error.square() / (4.0 * v);
    const double raw = (w * d.square()).sum();
    const double corrected = raw - (w * noise).sum();
    const double var = (w.square() * ((d / v.sqrt() * tab.error).square() + 2.0 * noise.square())).sum();
    return {corrected, raw, std::sqrt(var)};
}

void fit_trend(TrendReport& r) {
    if (r.x.size() != r.y.size() || r.y_error.size() != r.y.size()) throw DimensionError("trend columns differ in length");
    if (r.fit_last >= r.x.size() || r.fit_last < r.fit_first + 1) throw DomainError("trend fit window needs two points");
    std::vector<double> X, Y, S;
    for (size_t i = r.fit_first; i <= r.fit_last; ++i) {
        if (r.log_log) {
            if (!(r.x[i] > 0.0) || r.y[i] == 0.0) throw DomainError("log-log trend needs positive x and non-zero y");
            X.push_back(std::log(r.x[i]));
            Y.push_back(std::log(std::abs(r.y[i])));
            S.push_back(r.y_error[i] / std::abs(r.y[i]));
        } else {
            X.push_back(r.x[i]);
            Y.push_back(r.y[i]);
            S.push_back(r.y_error[i]);
        }
    }
    bool weighted = true;
    for (double s : S) weighted = weighted && s > 0.0;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < X.size(); ++i) {
        const double w = weighted ? 1.0 / (S[i] * S[i]) : 1.0;
        sw += w, sx += w * X[i], sy += w * Y[i], sxx += w * X[i] * X[i], sxy += w * X[i] * Y[i];
    }
    const double det = sw * sxx - sx * sx;
    r.slope = (sw * sxy - sx * sy) / det;
    r.intercept = (sxx * sy - sx * sxy) / det;
    double scale = 1.0;
    if (!weighted) {
        double rss = 0;
        for (size_t i = 0; i < X.size(); ++i) rss += std::pow(Y[i] - r.intercept - r.slope * X[i], 2);
        scale = X.size() > 2 ? rss / (X.size() - 2) : 0.0;
    }
    r.slope_error = std::sqrt(scale * sw / det);
    r.intercept_error = std::sqrt(scale * sxx / det);
}

TrendReport make_trend(std::string name, std::vector<double> x, std::vector<double> y, std::vector<double> err,
                       bool log_log) {
    TrendReport r;
    r.abscissa_name = std::move(name);
    r.x = std::move(x);
    r.y = std::move(y);
    r.y_error = std::move(err);
    r.log_log = log_log;
    r.fit_first = 0;
    r.fit_last = r.x.empty() ? 0 : r.x.size() - 1;
    fit_trend(r);
    return r;
}

BetaScan mass_beta_scan(double lambda, const std::vector<double>& betas) {
    if (betas.empty()) throw DomainError("mass_beta_scan needs a non-empty beta grid");
    std::vector<double> y;
    BetaScan out;
    for (double b : betas) {
        const double ln_m = 0.5 * solve_gap_continuum(lambda, b).log_m_squared;
        const auto [lo, hi] = continuum_log_mass_bounds(lambda, b);
        out.inside_bounds.push_back(lo <= ln_m && ln_m <= hi);
        y.push_back(ln_m);
    }
    if (betas.size() >= 2) {
        out.trend = make_trend("beta", betas, y, std::vector<double>(y.size(), 0.0), false);
    } else {
        out.trend.abscissa_name = "beta";
        out.trend.x = betas;
        out.trend.y = y;
        out.trend.y_error = {0.0};
        out.trend.slope = NAN;
        out.trend.intercept = y[0] + kTwoPi * betas[0];
    }
    out.slope_relative_error = std::abs(out.trend.slope + kTwoPi) / kTwoPi;
    out.intercept_offset = out.trend.intercept;
    return out;
}

LargeNPoint measure_large_n(const ModelParams& p, const Schedule& sch, std::uint64_t seed,
                            const CylindricalSpec& spec) {
    const SmearedFamily fam = default_smeared_family(p.torus);
    const CylindricalObservable cyl = make_cylindrical(spec, p.torus);
    ModeVarianceAccumulator modes(p.torus);
    std::vector<Eigen::Vector4d> moments;
    std::vector<double> cyl_series;
    const std::vector<Observable> obs{{"measure", [&](const FieldConfig& f) {
                                           moments.push_back(moment_row(f, fam));
                                           modes.add(f);
                                           const double v = cyl.evaluate(f);
                                           cyl_series.push_back(v);
                                           return v;
                                       }}};
    const LatticeModel model = p.lambda > 0 ? beta_form(p) : wick_form(p, 0.0);
    ChainState st = init_chain(model, seed, std::uint64_t(p.N));
    std::vector<MeasurementRecord> rec;
    run_chain(st, model, sch, obs, [&](const MeasurementRecord& r) {
        if (r.observable == "delta_h") rec.push_back(r);
    });
    Eigen::MatrixXd rows(moments.size(), 4);
    for (size_t k = 0; k < moments.size(); ++k) rows.row(k) = moments[k].transpose();
    LargeNPoint out;
    out.N = p.N;
    out.mass = p.mass;
    out.kappa4 = connected_four_cumulant(rows);
    out.gap = cylindrical_observable_gap(cyl_series, cyl, p.mass, p.torus);
    out.gap_tau_int = summarize_series(cyl_series).tau_int;
    out.proxy = mode_variance_proxy(modes.table(), p.mass, p.mass, p.torus);
    out.acceptance = st.acceptance.rate();
    out.exp_minus_delta_h = exp_minus_delta_h(rec);
    return out;
}

}  // namespace largen
