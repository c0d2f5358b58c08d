// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ripa/array_synthesis.hpp"
#include "ripa/config.hpp"
#include "ripa/detail/least_squares.hpp"
#include "ripa/detail/parallel.hpp"
#include "ripa/errors.hpp"
#include "ripa/grid.hpp"

namespace ripa {

struct BeamIndex {
    int i = 0;
    int j = 0;
    bool operator==(const BeamIndex&) const = default;
};

enum class AberrationKind { random_uniform, smooth_low_order };

struct AberrationModel {
    AberrationKind kind = AberrationKind::random_uniform;
    double amplitude = pi;  // rad; uniform half-range or surface peak
};

struct AberrationField {
    Eigen::MatrixXd per_beam_phase;  // (N_x, N_y), wrapped
    std::uint64_t seed = 0;
    AberrationModel model;
};

struct PhaseMask {
    Eigen::MatrixXd per_beam_correction;
    BeamIndex reference;
};

struct AffineMap {
    Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
    Eigen::Vector2d offset = Eigen::Vector2d::Zero();
    double residual = 0;

    Eigen::Vector2d operator()(double i, double j) const { return linear * Eigen::Vector2d(i, j) + offset; }
};

inline AberrationField inject_aberrations(const RipaGeometry& g, const AberrationModel& model, std::uint64_t seed) {
    require_valid(g);
    AberrationField f;
    f.seed = seed;
    f.model = model;
    f.per_beam_phase = Eigen::MatrixXd::Zero(g.n_cols, g.n_rows);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    if (model.kind == AberrationKind::random_uniform) {
        for (int i = 0; i < g.n_cols; ++i)
            for (int j = 0; j < g.n_rows; ++j) f.per_beam_phase(i, j) = wrap_phase(model.amplitude * unit(rng));
        return f;
    }
    // tilt plus quadratic surface over normalized beam coordinates
    double c[5];
    for (double& v : c) v = unit(rng);
    const double hx = std::max(1.0, 0.5 * (g.n_cols - 1)), hy = std::max(1.0, 0.5 * (g.n_rows - 1));
    Eigen::MatrixXd s(g.n_cols, g.n_rows);
    for (int i = 0; i < g.n_cols; ++i)
        for (int j = 0; j < g.n_rows; ++j) {
            const double x = (i - 0.5 * (g.n_cols - 1)) / hx, y = (j - 0.5 * (g.n_rows - 1)) / hy;
            s(i, j) = c[0] * x + c[1] * y + c[2] * x * x + c[3] * x * y + c[4] * y * y;
        }
    const double peak = s.cwiseAbs().maxCoeff();
    if (peak > 0) s *= model.amplitude / peak;
    for (int i = 0; i < g.n_cols; ++i)
        for (int j = 0; j < g.n_rows; ++j) f.per_beam_phase(i, j) = wrap_phase(s(i, j));
    return f;
}

namespace detail {

inline Eigen::Vector2d beam_position(const RipaGeometry& g, BeamIndex b) {
    return {(b.i - 0.5 * (g.n_cols - 1)) * g.mla_pitch, (b.j - 0.5 * (g.n_rows - 1)) * g.mla_pitch};
}

inline void check_pair(const RipaGeometry& g, BeamIndex t, BeamIndex r) {
    auto inside = [&](BeamIndex b) { return b.i >= 0 && b.j >= 0 && b.i < g.n_cols && b.j < g.n_rows; };
    if (!inside(t) || !inside(r)) throw ArgumentError("beam index outside the array");
    if (t == r) throw ArgumentError("fringe pair needs two distinct beams");
}

inline cplx two_beam_field(const RipaGeometry& g, const AberrationField& ab, BeamIndex t, BeamIndex r, double x,
                           double y) {
    const double lf = g.wavelength * g.focus_focal, we = envelope_waist(g);
    const Eigen::Vector2d pt = beam_position(g, t), pr = beam_position(g, r);
    const double env = std::exp(-(x * x + y * y) / (we * we));
    return env * (std::polar(1.0, ab.per_beam_phase(t.i, t.j) - 2 * pi * (x * pt.x() + y * pt.y()) / lf) +
                  std::polar(1.0, ab.per_beam_phase(r.i, r.j) - 2 * pi * (x * pr.x() + y * pr.y()) / lf));
}

}  // namespace detail

/// Focal field of the target and reference beams alone.
inline FieldGrid fringe_pattern(const RipaGeometry& g, const AberrationField& ab, BeamIndex target, BeamIndex ref,
                                const GridSpec& grid) {
    detail::check_pair(g, target, ref);
    auto out = grid.make<cplx>();
    for (std::size_t iy = 0; iy < out.ny; ++iy)
        for (std::size_t ix = 0; ix < out.nx; ++ix)
            out(ix, iy) = detail::two_beam_field(g, ab, target, ref, out.x(ix), out.y(iy));
    return out;
}

struct LineCut {
    std::vector<double> s;
    std::vector<double> values;
};

/// Envelope-normalized intensity along u = (r_ref - r_target)/|.| through the origin.
inline LineCut fringe_line_cut(const RipaGeometry& g, const AberrationField& ab, BeamIndex target, BeamIndex ref,
                               int samples, double half_length) {
    detail::check_pair(g, target, ref);
    if (samples < 8 || !(half_length > 0)) throw ArgumentError("fringe_line_cut: bad sampling");
    const Eigen::Vector2d d = detail::beam_position(g, ref) - detail::beam_position(g, target);
    const Eigen::Vector2d u = d / d.norm();
    const double we = envelope_waist(g);
    LineCut cut;
    for (int k = 0; k < samples; ++k) {
        const double s = (static_cast<double>(k) / (samples - 1) * 2 - 1) * half_length;
        const double x = s * u.x(), y = s * u.y();
        const double env = std::exp(-2 * (x * x + y * y) / (we * we));
        cut.s.push_back(s);
        cut.values.push_back(std::norm(detail::two_beam_field(g, ab, target, ref, x, y)) / env);
    }
    return cut;
}

struct FringeFit {
    double i0 = 0;
    double gamma = 0;
    double frequency = 0;
    double phase = 0;
    double residual = 0;
};

struct FringeFitOptions {
    double contrast_floor = 0.05;
    int max_evaluations = 400;
};

/// I(s) = I0 (1 + gamma cos(2 pi f s + phi)), initialized from the dominant spectral bin.
inline FringeFit fit_fringe(const LineCut& cut, const FringeFitOptions& opt = {}) {
    const auto n = cut.s.size();
    if (n < 8 || cut.values.size() != n) throw ArgumentError("fit_fringe: line cut too short");
    const double span = cut.s.back() - cut.s.front();
    if (!(span > 0)) throw ArgumentError("fit_fringe: line cut positions must increase");
    double mean = 0;
    for (double v : cut.values) mean += v;
    mean /= static_cast<double>(n);
    auto spectrum = [&](double f) {
        cplx acc = 0;
        for (std::size_t k = 0; k < n; ++k) acc += (cut.values[k] - mean) * std::polar(1.0, -2 * pi * f * cut.s[k]);
        return acc;
    };
    const double f_step = 0.25 / span, f_max = 0.5 * static_cast<double>(n - 1) / span;
    double f_best = f_step, a_best = -1;
    for (double f = f_step; f <= f_max; f += f_step) {
        const double a = std::abs(spectrum(f));
        if (a > a_best) a_best = a, f_best = f;
    }
    double lo = std::max(f_best - f_step, 0.5 * f_step), hi = f_best + f_step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = std::abs(spectrum(c)), fd = std::abs(spectrum(d));
    for (int it = 0; it < 80; ++it) {
        if (fc > fd) {
            hi = d, d = c, fd = fc;
            c = hi - gr * (hi - lo), fc = std::abs(spectrum(c));
        } else {
            lo = c, c = d, fc = fd;
            d = lo + gr * (hi - lo), fd = std::abs(spectrum(d));
        }
    }
    const double f0 = 0.5 * (lo + hi);
    if (f0 * span < 2) throw ArgumentError("fit_fringe: fewer than 2 fringe periods in the cut");
    const cplx s0 = spectrum(f0);
    Eigen::VectorXd p(4);
    p << mean, std::min(1.0, 2 * std::abs(s0) / (static_cast<double>(n) * std::abs(mean))), f0, std::arg(s0);
    const int m = static_cast<int>(n);
    auto res_fn = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (int k = 0; k < m; ++k) {
            const double ph = 2 * pi * q[2] * cut.s[static_cast<std::size_t>(k)] + q[3];
            r[k] = q[0] * (1 + q[1] * std::cos(ph)) - cut.values[static_cast<std::size_t>(k)];
        }
    };
    auto jac_fn = [&](const Eigen::VectorXd& q, Eigen::MatrixXd& J) {
        for (int k = 0; k < m; ++k) {
            const double s = cut.s[static_cast<std::size_t>(k)];
            const double ph = 2 * pi * q[2] * s + q[3];
            const double cs = std::cos(ph), sn = std::sin(ph);
            J(k, 0) = 1 + q[1] * cs;
            J(k, 1) = q[0] * cs;
            J(k, 2) = -q[0] * q[1] * sn * 2 * pi * s;
            J(k, 3) = -q[0] * q[1] * sn;
        }
    };
    const auto res = detail::levenberg_marquardt(p, m, res_fn, jac_fn, opt.max_evaluations);
    FringeFit f;
    f.i0 = res.x[0];
    f.gamma = res.x[1];
    f.frequency = res.x[2];
    f.phase = res.x[3];
    if (f.gamma < 0) f.gamma = -f.gamma, f.phase += pi;
    f.phase = wrap_phase(f.phase);
    f.residual = res.rms / std::max(std::abs(f.i0), 1e-300);
    if (!res.converged || !std::isfinite(f.residual)) throw FitError("fringe fit did not converge", f.residual);
    if (f.gamma < opt.contrast_floor) throw LowContrastError("fringe contrast below the floor", f.residual);
    return f;
}

struct AffinePair {
    BeamIndex beam;
    Eigen::Vector2d pixel;
};

/// Least-squares pixel = A (i, j) + b.
inline AffineMap solve_affine(const std::vector<AffinePair>& pairs) {
    if (pairs.size() < 3) throw ArgumentError("solve_affine: need at least 3 beams");
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd D(n, 3), P(n, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& pr = pairs[static_cast<std::size_t>(k)];
        D.row(k) << pr.beam.i, pr.beam.j, 1;
        P.row(k) = pr.pixel.transpose();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) throw RankError("solve_affine: beam indices are collinear");
    const Eigen::MatrixXd X = qr.solve(P);
    AffineMap m;
    m.linear = X.topRows(2).transpose();
    m.offset = X.row(2).transpose();
    const double ssr = (D * X - P).squaredNorm();
    // per-coordinate residual with the fit's degrees of freedom removed
    m.residual = n > 3 ? std::sqrt(ssr / (2.0 * static_cast<double>(n - 3))) : std::sqrt(ssr / 2.0);
    return m;
}

struct CalibrationOptions {
    BeamIndex reference{0, 0};
    int cut_samples = 801;
    double cut_half_length = 0;  // 0: three zones
    FringeFitOptions fit{};
};

struct CalibrationResult {
    PhaseMask mask;
    Eigen::MatrixXd fitted_phase;  // phi(i, j) - phi(ref)
    double strehl_before = 0;
    double strehl_after = 0;
};

/// Peak of the envelope-free array intensity over the first zone divided by the ideal (N_x N_y)^2.
inline double phase_strehl(const RipaGeometry& g, const Eigen::MatrixXd& phase) {
    const int nx = g.n_cols, ny = g.n_rows;
    Eigen::MatrixXcd a(nx, ny);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) a(i, j) = std::polar(1.0, phase(i, j));
    auto value = [&](double u, double v) {  // zone coordinates in [-1/2, 1/2)
        cplx acc = 0;
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) acc += a(i, j) * std::polar(1.0, -2 * pi * (u * i + v * j));
        return std::norm(acc);
    };
    const int n = 96;
    double best = -1, bu = 0, bv = 0;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            const double u = (p + 0.5) / n - 0.5, v = (q + 0.5) / n - 0.5;
            const double val = value(u, v);
            if (val > best) best = val, bu = u, bv = v;
        }
    // coordinate-wise golden refinement
    double h = 1.0 / n;
    const double gr = 0.5 * (std::sqrt(5.0) - 1);
    for (int round = 0; round < 4; ++round, h *= 0.5) {
        for (int axis = 0; axis < 2; ++axis) {
            double lo = (axis ? bv : bu) - h, hi = (axis ? bv : bu) + h;
            auto f = [&](double t) { return axis ? value(bu, t) : value(t, bv); };
            double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo), fc = f(c), fd = f(d);
            for (int it = 0; it < 40; ++it) {
                if (fc > fd) {
                    hi = d, d = c, fd = fc;
                    c = hi - gr * (hi - lo), fc = f(c);
                } else {
                    lo = c, c = d, fc = fd;
                    d = lo + gr * (hi - lo), fd = f(d);
                }
            }
            const double t = 0.5 * (lo + hi);
            if (f(t) > best) {
                best = f(t);
                (axis ? bv : bu) = t;
            }
        }
    }
    const double ideal = static_cast<double>(nx) * ny;
    return best / (ideal * ideal);
}

/// Pairwise fringe fits against the reference, mask = -fitted phases, closed-loop Strehl.
inline CalibrationResult calibrate_and_verify(const RipaGeometry& g, const AberrationField& ab,
                                              const CalibrationOptions& opt = {}) {
    require_valid(g);
    if (ab.per_beam_phase.rows() != g.n_cols || ab.per_beam_phase.cols() != g.n_rows)
        throw ArgumentError("aberration field does not match the geometry");
    const double half = opt.cut_half_length > 0 ? opt.cut_half_length : 3 * bz_extent(g);
    CalibrationResult res;
    res.fitted_phase = Eigen::MatrixXd::Zero(g.n_cols, g.n_rows);
    const auto count = static_cast<std::size_t>(g.n_cols) * static_cast<std::size_t>(g.n_rows);
    std::vector<int> failed(count, 0);
    detail::parallel_for(count, [&](std::size_t k) {
        const BeamIndex b{static_cast<int>(k) / g.n_rows, static_cast<int>(k) % g.n_rows};
        if (b == opt.reference) return;
        try {
            const auto cut = fringe_line_cut(g, ab, b, opt.reference, opt.cut_samples, half);
            res.fitted_phase(b.i, b.j) = fit_fringe(cut, opt.fit).phase;
        } catch (const Error&) {
            failed[k] = 1;
        }
    });
    std::vector<std::pair<int, int>> bad;
    for (std::size_t k = 0; k < count; ++k)
        if (failed[k]) bad.emplace_back(static_cast<int>(k) / g.n_rows, static_cast<int>(k) % g.n_rows);
    if (!bad.empty()) throw CalibrationError("fringe fits failed for " + std::to_string(bad.size()) + " beams", bad);
    res.mask.reference = opt.reference;
    res.mask.per_beam_correction = res.fitted_phase.unaryExpr([](double v) { return wrap_phase(-v); });
    res.mask.per_beam_correction(opt.reference.i, opt.reference.j) = 0;
    res.strehl_before = phase_strehl(g, ab.per_beam_phase);
    res.strehl_after = phase_strehl(g, ab.per_beam_phase + res.mask.per_beam_correction);
    return res;
}

}  // namespace ripa
