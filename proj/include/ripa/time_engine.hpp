// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ripa/array_synthesis.hpp"
#include "ripa/config.hpp"
#include "ripa/detail/parallel.hpp"
#include "ripa/errors.hpp"
#include "ripa/grid.hpp"

namespace ripa {

// ---------------------------------------------------------------- drive programs

enum class SegmentKind { hold, amplitude_step, linear_ramp };

struct Segment {
    double start = 0;
    double duration = 0;
    SegmentKind kind = SegmentKind::hold;
    double amplitude = 1;
    double detuning_start = 0;  // hold and ramp
    double detuning_end = 0;    // ramp only

    static Segment hold(double start, double duration, double amplitude, double detuning) {
        return {start, duration, SegmentKind::hold, amplitude, detuning, detuning};
    }
    /// New amplitude, frequency carried over from the previous segment.
    static Segment step(double start, double duration, double amplitude) {
        return {start, duration, SegmentKind::amplitude_step, amplitude, 0, 0};
    }
    static Segment ramp(double start, double duration, double amplitude, double from, double to) {
        return {start, duration, SegmentKind::linear_ramp, amplitude, from, to};
    }
};

struct Channel {
    double phase = 0;
    double initial_detuning = 0;  // used by a leading amplitude step
    std::vector<Segment> segments;
};

struct DriveProgram {
    std::vector<Channel> channels;
};

inline void validate_program(const DriveProgram& prog, const RipaGeometry& g) {
    const double half_fsr1 = 0.5 * speed_of_light / g.roundtrip_1;
    for (std::size_t c = 0; c < prog.channels.size(); ++c) {
        const auto& segs = prog.channels[c].segments;
        const std::string where = "channel " + std::to_string(c) + ": ";
        for (std::size_t k = 0; k < segs.size(); ++k) {
            const auto& s = segs[k];
            if (!(s.duration > 0)) throw ValidationError(where + "segment duration must be positive");
            if (s.amplitude < 0) throw ValidationError(where + "segment amplitude must be >= 0");
            if (std::abs(s.detuning_start) > half_fsr1 || std::abs(s.detuning_end) > half_fsr1 ||
                std::abs(prog.channels[c].initial_detuning) > half_fsr1)
                throw ValidationError(where + "frequency leaves +-FSR1/2");
            if (k > 0 && s.start < segs[k - 1].start + segs[k - 1].duration - 1e-15)
                throw ValidationError(where + "segments overlap or are out of order");
        }
    }
}

/// Phase-continuous complex envelope A exp(i(phi - Phi(t))) of one channel.
class ChannelEnvelope {
public:
    explicit ChannelEnvelope(const Channel& ch) : phase_(ch.phase) {
        double nu = ch.initial_detuning, acc = 0, t_prev = 0;
        bool first = true;
        for (const auto& s : ch.segments) {
            Piece p;
            p.t0 = s.start;
            p.t1 = s.start + s.duration;
            p.amplitude = s.amplitude;
            if (s.kind == SegmentKind::hold) p.nu0 = s.detuning_start, p.rho = 0;
            if (s.kind == SegmentKind::amplitude_step) p.nu0 = nu, p.rho = 0;
            if (s.kind == SegmentKind::linear_ramp)
                p.nu0 = s.detuning_start, p.rho = (s.detuning_end - s.detuning_start) / s.duration;
            // gaps accumulate phase at the last frequency
            if (!first) acc += 2 * pi * nu * (s.start - t_prev);
            p.phi0 = acc;
            acc += 2 * pi * (p.nu0 * s.duration + 0.5 * p.rho * s.duration * s.duration);
            nu = p.nu0 + p.rho * s.duration;
            t_prev = p.t1;
            first = false;
            pieces_.push_back(p);
        }
    }

    cplx operator()(double t) const {
        if (pieces_.empty() || t < pieces_.front().t0) return 0;
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t, [](double v, const Piece& p) { return v < p.t0; });
        const Piece& p = *(it - 1);
        if (t >= p.t1) return 0;
        const double tau = t - p.t0;
        const double big_phi = p.phi0 + 2 * pi * (p.nu0 * tau + 0.5 * p.rho * tau * tau);
        return std::polar(p.amplitude, phase_ - big_phi);
    }

    double first_start() const { return pieces_.empty() ? 0 : pieces_.front().t0; }

private:
    struct Piece {
        double t0, t1, amplitude, nu0, rho, phi0;
    };
    double phase_;
    std::vector<Piece> pieces_;
};

// ---------------------------------------------------------------- traces

struct TimeTrace {
    double t0 = 0;
    double dt = 0;
    std::vector<double> values;

    double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

struct TraceResult {
    TimeTrace trace;
    std::vector<std::string> diagnostics;
};

namespace detail {

/// Beam weights, delays and the per-point spatial factors shared by all evaluators.
class BeamModel {
public:
    BeamModel(const DriveProgram& prog, const RipaGeometry& g, const LossModel& l)
        : nx_(g.n_cols), ny_(g.n_rows), bz_(bz_extent(g)), we_(envelope_waist(g)) {
        require_valid(g, l);
        validate_program(prog, g);
        for (const auto& c : prog.channels) channels_.emplace_back(c);
        weight_.resize(nx_, ny_);
        delay_.resize(nx_, ny_);
        for (int i = 0; i < nx_; ++i)
            for (int j = 0; j < ny_; ++j) {
                weight_(i, j) = beam_weight(i, j, l);
                delay_(i, j) = i * tau_2(g) + j * tau_1(g);
            }
    }

    /// c(i, j) = w(i, j) sum_k s_k(t - T(i, j))
    void coefficients(double t, Eigen::MatrixXcd& c) const {
        c.resize(nx_, ny_);
        for (int i = 0; i < nx_; ++i)
            for (int j = 0; j < ny_; ++j) {
                cplx acc = 0;
                for (const auto& ch : channels_) acc += ch(t - delay_(i, j));
                c(i, j) = weight_(i, j) * acc;
            }
    }

    /// Intensity on a separable set of points from the coefficient matrix.
    Eigen::MatrixXd intensity(const Eigen::MatrixXcd& c, const std::vector<double>& xs,
                              const std::vector<double>& ys) const {
        const Eigen::MatrixXcd ex = phase_matrix(xs, nx_), ey = phase_matrix(ys, ny_);
        const Eigen::MatrixXcd f = ex * c * ey.transpose();
        Eigen::MatrixXd out(f.rows(), f.cols());
        for (Eigen::Index a = 0; a < f.rows(); ++a)
            for (Eigen::Index b = 0; b < f.cols(); ++b)
                out(a, b) = std::norm(f(a, b)) * envelope(xs[static_cast<std::size_t>(a)], ys[static_cast<std::size_t>(b)]);
        return out;
    }

    double envelope(double x, double y) const { return std::exp(-2 * (x * x + y * y) / (we_ * we_)); }
    double bz() const { return bz_; }
    double first_start() const {
        double t = 1e300;
        for (const auto& c : channels_) t = std::min(t, c.first_start());
        return t;
    }

private:
    Eigen::MatrixXcd phase_matrix(const std::vector<double>& pts, int n) const {
        Eigen::MatrixXcd m(static_cast<Eigen::Index>(pts.size()), n);
        for (std::size_t a = 0; a < pts.size(); ++a)
            for (int i = 0; i < n; ++i) m(static_cast<Eigen::Index>(a), i) = std::polar(1.0, -2 * pi * pts[a] * i / bz_);
        return m;
    }

    int nx_, ny_;
    double bz_, we_;
    std::vector<ChannelEnvelope> channels_;
    Eigen::MatrixXd weight_, delay_;
};

inline void check_trace_args(double dt, double t_span) {
    if (!(dt > 0) || dt > 2e-9) throw ArgumentError("trace sampling dt must lie in (0, 2 ns]");
    if (!(t_span > 0)) throw ArgumentError("trace span must be positive");
}

}  // namespace detail

/// Raw (pre-detector) intensity at one focal point.
inline TraceResult point_trace(const DriveProgram& prog, const RipaGeometry& g, const LossModel& l, double x, double y,
                               double dt, double t0, double t_span) {
    detail::check_trace_args(dt, t_span);
    const double bz = bz_extent(g);
    if (std::abs(x) > 0.5 * bz || std::abs(y) > 0.5 * bz) throw ArgumentError("point_trace: point outside the first zone");
    detail::BeamModel model(prog, g, l);
    TraceResult res;
    res.trace.t0 = t0;
    res.trace.dt = dt;
    const auto n = static_cast<std::size_t>(std::floor(t_span / dt)) + 1;
    res.trace.values.resize(n);
    Eigen::MatrixXcd c;
    const std::vector<double> xs{x}, ys{y};
    for (std::size_t k = 0; k < n; ++k) {
        model.coefficients(res.trace.time(k), c);
        res.trace.values[k] = model.intensity(c, xs, ys)(0, 0);
    }
    if (t_span < g.n_cols * tau_2(g))
        res.diagnostics.push_back("warning: span shorter than the buildup time N_x L_rt,2 / c");
    return res;
}

/// Intensity integrated over an n x n sampled square of side `width` (detector area).
inline TraceResult region_trace(const DriveProgram& prog, const RipaGeometry& g, const LossModel& l, double cx,
                                double cy, double width, int n, double dt, double t0, double t_span) {
    detail::check_trace_args(dt, t_span);
    if (n < 1 || !(width > 0)) throw ArgumentError("region_trace: bad region");
    detail::BeamModel model(prog, g, l);
    std::vector<double> xs(static_cast<std::size_t>(n)), ys(xs.size());
    for (int k = 0; k < n; ++k) {
        xs[static_cast<std::size_t>(k)] = cx + ((k + 0.5) / n - 0.5) * width;
        ys[static_cast<std::size_t>(k)] = cy + ((k + 0.5) / n - 0.5) * width;
    }
    TraceResult res;
    res.trace.t0 = t0;
    res.trace.dt = dt;
    const auto m = static_cast<std::size_t>(std::floor(t_span / dt)) + 1;
    res.trace.values.resize(m);
    const double cell = width * width / (static_cast<double>(n) * n);
    detail::parallel_for(m, [&](std::size_t k) {
        Eigen::MatrixXcd c;
        model.coefficients(res.trace.time(k), c);
        res.trace.values[k] = model.intensity(c, xs, ys).sum() * cell;
    });
    if (t_span < g.n_cols * tau_2(g))
        res.diagnostics.push_back("warning: span shorter than the buildup time N_x L_rt,2 / c");
    return res;
}

/// Cascaded single-pole low-pass, exact for input held between samples; unit DC gain.
inline TimeTrace pd_filter(const TimeTrace& in, double f3db, int order = 1) {
    if (!(f3db > 0)) throw ArgumentError("pd_filter: f3db must be positive");
    if (order < 1) throw ArgumentError("pd_filter: order must be >= 1");
    TimeTrace out = in;
    const double a = std::exp(-in.dt * 2 * pi * f3db);
    for (int o = 0; o < order; ++o) {
        if (out.values.empty()) break;
        double y = out.values.front(), prev = out.values.front();
        for (auto& v : out.values) {
            y = a * y + (1 - a) * prev;
            prev = v;
            v = y;
        }
    }
    return out;
}

struct RiseFall {
    double rise = 0;
    double fall = 0;
    double plateau = 0;
    double base = 0;
};

/// 10-90 style edge times of one on/off cycle.
inline RiseFall rise_fall(const TimeTrace& tr, double lo = 0.1, double hi = 0.9) {
    const auto& v = tr.values;
    if (v.size() < 4) throw ShapeError("rise_fall: trace too short");
    const double vmax = *std::max_element(v.begin(), v.end());
    const double vmin = *std::min_element(v.begin(), v.end());
    std::size_t on0 = v.size(), on1 = 0;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (v[k] >= vmin + 0.5 * (vmax - vmin)) on0 = std::min(on0, k), on1 = k;
    if (on0 >= on1) throw ShapeError("rise_fall: no on-plateau found");
    // settled region: the central half of the on interval
    const std::size_t q = (on1 - on0) / 4;
    std::vector<double> mid(v.begin() + static_cast<std::ptrdiff_t>(on0 + q),
                            v.begin() + static_cast<std::ptrdiff_t>(on1 - q + 1));
    std::nth_element(mid.begin(), mid.begin() + static_cast<std::ptrdiff_t>(mid.size() / 2), mid.end());
    RiseFall rf;
    rf.plateau = mid[mid.size() / 2];
    rf.base = vmin;
    const double l_lo = rf.base + lo * (rf.plateau - rf.base), l_hi = rf.base + hi * (rf.plateau - rf.base);
    auto crossing = [&](double level, std::size_t from, bool up) -> double {
        for (std::size_t k = std::max<std::size_t>(from, 1); k < v.size(); ++k) {
            const bool hit = up ? (v[k - 1] < level && v[k] >= level) : (v[k - 1] > level && v[k] <= level);
            if (hit) return tr.time(k - 1) + (level - v[k - 1]) / (v[k] - v[k - 1]) * tr.dt;
        }
        throw ShapeError("rise_fall: threshold never crossed");
    };
    auto index_after = [&](double t) { return static_cast<std::size_t>(std::max(0.0, std::floor((t - tr.t0) / tr.dt))); };
    const double r_lo = crossing(l_lo, 0, true);
    const double r_hi = crossing(l_hi, index_after(r_lo), true);
    const double f_hi = crossing(l_hi, on1 - q, false);
    const double f_lo = crossing(l_lo, index_after(f_hi), false);
    rf.rise = r_hi - r_lo;
    rf.fall = f_lo - f_hi;
    return rf;
}

// ---------------------------------------------------------------- movies

struct Frame {
    double time = 0;
    IntensityGrid image;
};

struct Movie {
    std::vector<Frame> frames;
    double spatial_resolution = 0;
};

struct MovieSpec {
    GridSpec grid{0, 0, 0, 0, 0, 0};  // dx == 0: first zone at the minimum spacing
    std::vector<double> frame_times;
    double min_spacing = 5e-6;
    std::size_t max_samples = 50'000'000;
};

/// Per-frame intensity images; each pixel equals point_trace at that pixel and time.
inline Movie simulate_movie(const DriveProgram& prog, const RipaGeometry& g, const LossModel& l, MovieSpec spec) {
    const double bz = bz_extent(g);
    if (spec.grid.dx <= 0) {
        const auto n = static_cast<std::size_t>(std::floor(bz / spec.min_spacing));
        spec.grid = GridSpec::centered(n, bz);
    }
    if (spec.grid.dx < spec.min_spacing * (1 - 1e-12) || spec.grid.dy < spec.min_spacing * (1 - 1e-12))
        throw ArgumentError("simulate_movie: grid finer than the configured scan spacing");
    if (spec.frame_times.empty()) throw ArgumentError("simulate_movie: no frame times");
    for (std::size_t k = 1; k < spec.frame_times.size(); ++k)
        if (!(spec.frame_times[k] > spec.frame_times[k - 1]))
            throw ArgumentError("simulate_movie: frame times must increase strictly");
    if (spec.frame_times.size() * spec.grid.nx * spec.grid.ny > spec.max_samples)
        throw ResourceError("simulate_movie: frames x pixels exceeds the configured cap");
    detail::BeamModel model(prog, g, l);
    const auto proto = spec.grid.make<double>();
    std::vector<double> xs(proto.nx), ys(proto.ny);
    for (std::size_t k = 0; k < proto.nx; ++k) xs[k] = proto.x(k);
    for (std::size_t k = 0; k < proto.ny; ++k) ys[k] = proto.y(k);
    Movie movie;
    movie.spatial_resolution = std::max(spec.grid.dx, spec.grid.dy);
    movie.frames.resize(spec.frame_times.size(), Frame{0, proto});
    detail::parallel_for(spec.frame_times.size(), [&](std::size_t f) {
        Eigen::MatrixXcd c;
        model.coefficients(spec.frame_times[f], c);
        const Eigen::MatrixXd img = model.intensity(c, xs, ys);
        auto& fr = movie.frames[f];
        fr.time = spec.frame_times[f];
        for (std::size_t iy = 0; iy < proto.ny; ++iy)
            for (std::size_t ix = 0; ix < proto.nx; ++ix)
                fr.image(ix, iy) = img(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(iy));
    });
    return movie;
}

// ---------------------------------------------------------------- trajectories

struct TrajectoryPoint {
    double t = 0;
    double x = 0;
    double y = 0;
    double confidence = 0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    bool ambiguous = false;
};

struct TrajectoryOptions {
    double rel_threshold = 0.3;     // peaks below this fraction of the frame maximum are ignored
    double min_separation = 20e-6;  // non-maximum suppression radius
    double max_jump = 30e-6;        // largest frame-to-frame displacement
    double ambiguity_margin = 0.5;  // fraction of min_separation separating best from runner-up
    double period = 0;              // wrap period of positions (0: none)
};

namespace detail {

inline double wrapped_delta(double d, double period) {
    return period > 0 ? d - period * std::floor(d / period + 0.5) : d;
}

inline std::vector<TrajectoryPoint> frame_peaks(const Frame& fr, const TrajectoryOptions& opt) {
    const auto& g = fr.image;
    const double vmax = *std::max_element(g.samples.begin(), g.samples.end());
    std::vector<TrajectoryPoint> peaks;
    if (!(vmax > 0)) return peaks;
    auto at = [&](long ix, long iy) {
        if (ix < 0 || iy < 0 || ix >= static_cast<long>(g.nx) || iy >= static_cast<long>(g.ny)) return -1.0;
        return g(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy));
    };
    for (long iy = 0; iy < static_cast<long>(g.ny); ++iy)
        for (long ix = 0; ix < static_cast<long>(g.nx); ++ix) {
            const double v = at(ix, iy);
            if (v < opt.rel_threshold * vmax) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dx && !dy) continue;
                    const double u = at(ix + dx, iy + dy);
                    if (u > v || (u == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            // sub-sample vertex of a parabola through log intensities
            auto refine = [&](double m1, double c0, double p1) {
                if (m1 <= 0 || p1 <= 0) return 0.0;
                const double a = std::log(m1), b = std::log(c0), c = std::log(p1);
                const double den = a - 2 * b + c;
                return den < 0 ? std::clamp(0.5 * (a - c) / den, -0.5, 0.5) : 0.0;
            };
            const double ox = refine(at(ix - 1, iy), v, at(ix + 1, iy));
            const double oy = refine(at(ix, iy - 1), v, at(ix, iy + 1));
            peaks.push_back({fr.time, g.x0 + (static_cast<double>(ix) + ox) * g.dx,
                             g.y0 + (static_cast<double>(iy) + oy) * g.dy, v / vmax});
        }
    std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
    std::vector<TrajectoryPoint> kept;
    for (const auto& p : peaks) {
        bool close = false;
        for (const auto& k : kept)
            close |= std::hypot(wrapped_delta(p.x - k.x, opt.period), wrapped_delta(p.y - k.y, opt.period)) <
                     opt.min_separation;
        if (!close) kept.push_back(p);
    }
    return kept;
}

}  // namespace detail

/// Peak detection per frame and greedy nearest-neighbour linking across frames.
inline std::vector<Trajectory> extract_trajectories(const Movie& movie, const TrajectoryOptions& opt = {}) {
    std::vector<Trajectory> paths;
    std::vector<std::size_t> active;
    for (const auto& fr : movie.frames) {
        const auto peaks = detail::frame_peaks(fr, opt);
        struct Link {
            double d;
            std::size_t path, peak;
        };
        std::vector<Link> links;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const auto& last = paths[active[a]].points.back();
            for (std::size_t p = 0; p < peaks.size(); ++p) {
                const double d = std::hypot(detail::wrapped_delta(peaks[p].x - last.x, opt.period),
                                            detail::wrapped_delta(peaks[p].y - last.y, opt.period));
                if (d <= opt.max_jump) links.push_back({d, a, p});
            }
        }
        std::sort(links.begin(), links.end(), [](const Link& u, const Link& v) {
            return u.d < v.d || (u.d == v.d && (u.path < v.path || (u.path == v.path && u.peak < v.peak)));
        });
        std::vector<bool> path_used(active.size(), false), peak_used(peaks.size(), false);
        const double margin = opt.ambiguity_margin * opt.min_separation;
        for (const auto& lk : links) {
            if (path_used[lk.path] || peak_used[lk.peak]) continue;
            // a competing link almost as short means the identity is not resolvable
            for (const auto& other : links) {
                if (&other == &lk) continue;
                const bool rival = (other.path == lk.path) != (other.peak == lk.peak);
                if (rival && other.d - lk.d < margin) {
                    paths[active[lk.path]].ambiguous = true;
                    if (other.path != lk.path) paths[active[other.path]].ambiguous = true;
                }
            }
            path_used[lk.path] = peak_used[lk.peak] = true;
            paths[active[lk.path]].points.push_back(peaks[lk.peak]);
        }
        std::vector<std::size_t> next;
        for (std::size_t a = 0; a < active.size(); ++a)
            if (path_used[a]) next.push_back(active[a]);
        for (std::size_t p = 0; p < peaks.size(); ++p)
            if (!peak_used[p]) {
                paths.push_back(Trajectory{{peaks[p]}, false});
                next.push_back(paths.size() - 1);
            }
        active = std::move(next);
    }
    return paths;
}

}  // namespace ripa
