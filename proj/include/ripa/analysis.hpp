// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ripa/config.hpp"
#include "ripa/detail/least_squares.hpp"
#include "ripa/detail/parallel.hpp"
#include "ripa/errors.hpp"
#include "ripa/focal_solver.hpp"

namespace ripa {

// ---------------------------------------------------------------- crosstalk

struct CrosstalkOptions {
    int quadrature = 61;               // samples across the weight disk diameter
    double truncation = 3.0;           // weight radius in spot waists
    bool hard_disk = false;            // unit weight inside one waist instead of the Gaussian
    double start_angle = 0;            // azimuth of the first sample
    std::optional<double> axis;        // single direction instead of the azimuthal mean
};

struct CrosstalkCurve {
    std::vector<double> separation;  // d / w0'
    std::vector<double> value;
    int n_cols = 0;
    int n_rows = 0;
    double stage1_loss = 0;
    double stage2_loss = 0;
};

namespace detail {

struct CrosstalkKernel {
    std::vector<double> u, v, w;  // weight quadrature relative to a site
    double spot_waist = 0;

    CrosstalkKernel(double ws, const CrosstalkOptions& opt) : spot_waist(ws) {
        const double r = opt.truncation * ws;
        const int n = opt.quadrature;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double x = ((a + 0.5) / n * 2 - 1) * r, y = ((b + 0.5) / n * 2 - 1) * r;
                const double rr = x * x + y * y;
                if (rr > r * r) continue;
                const double wt = opt.hard_disk ? (rr <= ws * ws ? 1.0 : 0.0) : std::exp(-2 * rr / (ws * ws));
                if (wt == 0) continue;
                u.push_back(x), v.push_back(y), w.push_back(wt);
            }
    }
};

/// Addressed-spot intensity at the zone center with per-axis decay.
struct SpotIntensity {
    int nx, ny;
    cplx qx, qy;
    double bz, we;

    SpotIntensity(const RipaGeometry& g, const LossModel& l)
        : nx(g.n_cols), ny(g.n_rows), qx(std::sqrt(1 - l.stage2_total())), qy(std::sqrt(1 - l.stage1_total())),
          bz(bz_extent(g)), we(envelope_waist(g)) {}

    double operator()(double x, double y) const {
        return std::exp(-2 * (x * x + y * y) / (we * we)) * axis_factor(nx, qx, 2 * pi * x / bz) *
               axis_factor(ny, qy, 2 * pi * y / bz);
    }
};

inline double weighted_power(const SpotIntensity& I, const CrosstalkKernel& k, double cx, double cy) {
    double s = 0;
    for (std::size_t q = 0; q < k.w.size(); ++q) s += k.w[q] * I(cx + k.u[q], cy + k.v[q]);
    return s;
}

inline double crosstalk_value(const SpotIntensity& I, const CrosstalkKernel& k, double base, double separation,
                              int n_azimuth, const CrosstalkOptions& opt) {
    const double d = separation * k.spot_waist;
    if (opt.axis) return weighted_power(I, k, d * std::cos(*opt.axis), d * std::sin(*opt.axis)) / base;
    double acc = 0;
    for (int a = 0; a < n_azimuth; ++a) {
        const double t = opt.start_angle + 2 * pi * a / n_azimuth;
        acc += weighted_power(I, k, d * std::cos(t), d * std::sin(t));
    }
    return acc / n_azimuth / base;
}

}  // namespace detail

/// Gaussian-weighted power at distance d (in spot waists) relative to the addressed site.
inline double crosstalk_at(const RipaGeometry& g, const LossModel& l, double separation, int n_azimuth = 64,
                           const CrosstalkOptions& opt = {}) {
    if (!(separation > 0)) throw ArgumentError("crosstalk_at: separation must be positive");
    if (n_azimuth < 8) throw ArgumentError("crosstalk_at: n_azimuth must be >= 8");
    require_valid(g, l);
    const double ws = derive_quantities(g).spot_waist;
    const detail::CrosstalkKernel k(ws, opt);
    const detail::SpotIntensity I(g, l);
    const double base = detail::weighted_power(I, k, 0, 0);
    return detail::crosstalk_value(I, k, base, separation, n_azimuth, opt);
}

inline CrosstalkCurve crosstalk_curve(const RipaGeometry& g, const LossModel& l, const std::vector<double>& separations,
                                      int n_azimuth = 64, const CrosstalkOptions& opt = {}) {
    if (n_azimuth < 8) throw ArgumentError("crosstalk_curve: n_azimuth must be >= 8");
    for (std::size_t k = 0; k < separations.size(); ++k) {
        if (!(separations[k] > 0)) throw ArgumentError("crosstalk_curve: separations must be positive");
        if (k && !(separations[k] > separations[k - 1]))
            throw ArgumentError("crosstalk_curve: separations must increase strictly");
    }
    require_valid(g, l);
    const double ws = derive_quantities(g).spot_waist;
    const detail::CrosstalkKernel kernel(ws, opt);
    const detail::SpotIntensity I(g, l);
    const double base = detail::weighted_power(I, kernel, 0, 0);
    CrosstalkCurve c;
    c.separation = separations;
    c.value.resize(separations.size());
    c.n_cols = g.n_cols, c.n_rows = g.n_rows;
    c.stage1_loss = l.stage1_total(), c.stage2_loss = l.stage2_total();
    detail::parallel_for(separations.size(), [&](std::size_t k) {
        c.value[k] = detail::crosstalk_value(I, kernel, base, separations[k], n_azimuth, opt);
    });
    return c;
}

// ---------------------------------------------------------------- power law

struct PowerLawFit {
    double exponent = 0;
    double prefactor = 0;
    double rms_log_residual = 0;
    bool model_mismatch = false;
    std::size_t points = 0;
};

/// Least-squares line in log-log space over lo <= d <= hi.
inline PowerLawFit powerlaw_fit(const std::vector<double>& d, const std::vector<double>& c, double lo, double hi,
                                double mismatch_threshold = 0.05) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < d.size() && k < c.size(); ++k) {
        if (d[k] < lo || d[k] > hi) continue;
        if (!(d[k] > 0) || !(c[k] > 0)) throw DomainError("powerlaw_fit: nonpositive value in the tail range");
        lx.push_back(std::log(d[k]));
        ly.push_back(std::log(c[k]));
    }
    if (lx.size() < 5) throw ArgumentError("powerlaw_fit: fewer than 5 points in the tail range");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(lx.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(lx.size()));
    for (std::size_t k = 0; k < lx.size(); ++k) {
        A(static_cast<Eigen::Index>(k), 0) = lx[k];
        A(static_cast<Eigen::Index>(k), 1) = 1;
        b(static_cast<Eigen::Index>(k)) = ly[k];
    }
    const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(b);
    PowerLawFit f;
    f.exponent = sol[0];
    f.prefactor = std::exp(sol[1]);
    f.rms_log_residual = std::sqrt((A * sol - b).squaredNorm() / static_cast<double>(lx.size()));
    f.model_mismatch = f.rms_log_residual > mismatch_threshold;
    f.points = lx.size();
    return f;
}

inline PowerLawFit powerlaw_fit(const CrosstalkCurve& curve, double lo, double hi) {
    return powerlaw_fit(curve.separation, curve.value, lo, hi);
}

// ---------------------------------------------------------------- uniformity

struct UniformityStats {
    double sigma_i = 0;
    double sigma_wx = 0;
    double sigma_wy = 0;
};

inline UniformityStats uniformity_stats(const std::vector<SpotFit>& fits) {
    if (fits.size() < 2) throw ArgumentError("uniformity_stats: need at least 2 fits");
    auto rel_std = [&](auto get) {
        double m = 0;
        for (const auto& f : fits) m += get(f);
        m /= static_cast<double>(fits.size());
        double v = 0;
        for (const auto& f : fits) v += (get(f) - m) * (get(f) - m);
        return std::sqrt(v / static_cast<double>(fits.size())) / m;
    };
    return {rel_std([](const SpotFit& f) { return f.peak; }), rel_std([](const SpotFit& f) { return f.w_x; }),
            rel_std([](const SpotFit& f) { return f.w_y; })};
}

// ---------------------------------------------------------------- efficiency

struct EfficiencyBudget {
    double stage1_loss = 0;  // A_1
    double stage2_loss = 0;  // A_2
    double eta_1 = 0;
    double eta_rel = 0;
    double eta_2 = 0;
    double eta_im = 0;
    double eta_total = 0;
};

/// kappa * sum_{k<n} (1 - A)^k
inline double outcoupled_fraction(double kappa, double total_loss, int n) {
    double s = 0, p = 1;
    for (int k = 0; k < n; ++k, p *= 1 - total_loss) s += p;
    return kappa * s;
}

inline EfficiencyBudget efficiency_budget(const LossModel& l, const RipaGeometry& g) {
    require_valid(g, l);
    EfficiencyBudget b;
    b.stage1_loss = l.stage1_total();
    b.stage2_loss = l.stage2_total();
    b.eta_1 = outcoupled_fraction(l.kappa_1, b.stage1_loss, g.n_rows);
    b.eta_2 = outcoupled_fraction(l.kappa_2, b.stage2_loss, g.n_cols);
    b.eta_rel = l.relay_eff;
    b.eta_im = l.imaging_eff;
    b.eta_total = b.eta_1 * b.eta_rel * b.eta_2 * b.eta_im;
    return b;
}

inline nlohmann::json to_json(const EfficiencyBudget& b, const LossModel& l) {
    return {{"1st RIPA", {{"kappa_1", l.kappa_1}, {"l_1", l.loss_1}, {"A_1", b.stage1_loss}, {"eta_1", b.eta_1}}},
            {"Relay", {{"eta_rel", b.eta_rel}}},
            {"2nd RIPA",
             {{"kappa_2", l.kappa_2},
              {"l_2", l.loss_2},
              {"kappa_2_lock", l.kappa_lock},
              {"A_2", b.stage2_loss},
              {"eta_2", b.eta_2}}},
            {"Imaging", {{"eta_im", b.eta_im}}},
            {"Total system efficiency", {{"eta", b.eta_total}}}};
}

// ---------------------------------------------------------------- tradeoff

struct TradeoffPoint {
    double kappa = 0;
    double efficiency = 0;
    double broadening = 1;
};

struct TradeoffCurve {
    int n = 0;
    double internal_loss = 0;
    std::vector<TradeoffPoint> points;
};

struct TradeoffOptions {
    int samples = 2001;  // across the main lobe search window
};

/// Fitted 1/e^2 half-width (in zone units) of the central lobe of an n-beam array with loss a per beam.
inline double interference_peak_waist(int n, double total_loss, const TradeoffOptions& opt = {}) {
    const cplx q(std::sqrt(1 - total_loss), 0);
    const double span = 2.0 / n;
    std::vector<double> u, v;
    const double peak = axis_factor(n, q, 0);
    const int m = opt.samples;
    for (int k = 0; k < m; ++k) {
        const double x = (static_cast<double>(k) / (m - 1) * 2 - 1) * span;
        const double val = axis_factor(n, q, 2 * pi * x);
        u.push_back(x), v.push_back(val / peak);
    }
    // contiguous central region above 1/e^2
    const int c = m / 2;
    int a = c, b = c;
    while (a > 0 && v[static_cast<std::size_t>(a - 1)] >= std::exp(-2.0)) --a;
    while (b < m - 1 && v[static_cast<std::size_t>(b + 1)] >= std::exp(-2.0)) ++b;
    const int cnt = b - a + 1;
    Eigen::VectorXd p(2);
    p << 1.0, 0.5 * (u[static_cast<std::size_t>(b)] - u[static_cast<std::size_t>(a)]);
    auto res_fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        for (int k = 0; k < cnt; ++k) {
            const double s = u[static_cast<std::size_t>(a + k)] / x[1];
            r[k] = x[0] * std::exp(-2 * s * s) - v[static_cast<std::size_t>(a + k)];
        }
    };
    auto jac_fn = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        for (int k = 0; k < cnt; ++k) {
            const double s = u[static_cast<std::size_t>(a + k)] / x[1];
            const double e = std::exp(-2 * s * s);
            J(k, 0) = e;
            J(k, 1) = x[0] * e * 4 * s * s / x[1];
        }
    };
    const auto r = detail::levenberg_marquardt(p, cnt, res_fn, jac_fn);
    if (!r.converged) throw FitError("interference peak fit did not converge", r.rms);
    return std::abs(r.x[1]);
}

inline TradeoffCurve tradeoff_curve(int n, double internal_loss, const std::vector<double>& kappas,
                                    const TradeoffOptions& opt = {}) {
    if (n < 2) throw ArgumentError("tradeoff_curve: n must be >= 2");
    if (!(internal_loss >= 0)) throw DomainError("tradeoff_curve: internal loss must be >= 0");
    TradeoffCurve c;
    c.n = n;
    c.internal_loss = internal_loss;
    const double w_ref = interference_peak_waist(n, 0.0, opt);
    for (double k : kappas) {
        if (!(k >= 0)) throw DomainError("tradeoff_curve: kappa must be >= 0");
        if (k + internal_loss >= 1) throw DomainError("tradeoff_curve: kappa + l must be < 1");
        c.points.push_back({k, outcoupled_fraction(k, k + internal_loss, n),
                            interference_peak_waist(n, k + internal_loss, opt) / w_ref});
    }
    return c;
}

}  // namespace ripa
