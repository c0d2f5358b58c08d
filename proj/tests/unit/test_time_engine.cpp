// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#include <catch_amalgamated.hpp>

#include "ripa/analysis.hpp"
#include "ripa/array_synthesis.hpp"
#include "ripa/drive_compiler.hpp"
#include "ripa/focal_solver.hpp"
#include "ripa/time_engine.hpp"

using namespace ripa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const RipaGeometry geom;
const double fsr2 = speed_of_light / geom.roundtrip_2;
const double L = bz_extent(geom);
const double buildup = geom.n_cols * tau_2(geom) + geom.n_rows * tau_1(geom);

DriveProgram single_hold(double nu, double amplitude, double start, double duration) {
    DriveProgram p;
    Channel c;
    c.segments.push_back(Segment::hold(start, duration, amplitude, nu));
    p.channels.push_back(c);
    return p;
}

}  // namespace

TEST_CASE("steady state equals the static solver") {
    const LossModel l;
    for (double nu : {0.0, 0.31e9, -1.1e9}) {
        const auto [x0, y0] = spot_position(nu, geom);
        const double px = std::clamp(x0 + 7e-6, -L / 2, L / 2), py = std::clamp(y0 - 4e-6, -L / 2, L / 2);
        const auto tr = point_trace(single_hold(nu, 1.3, 0, 1e-6), geom, l, px, py, 1e-9, 200e-9, 500e-9).trace;
        const auto arr = synthesize_array(Tone{nu, 1.3, 0}, geom, l);
        const double expect = focal_intensity_analytic(arr, geom, px, py);
        for (double v : tr.values) CHECK_THAT(v, WithinRel(expect, 1e-6));
    }
}

TEST_CASE("incoherent average of two static tones") {
    const LossModel l;
    DriveProgram p;
    Channel a, b;
    a.segments.push_back(Segment::hold(0, 2e-6, 1, 0));
    b.segments.push_back(Segment::hold(0, 2e-6, 0.8, 100e6));
    p.channels = {a, b};
    const double px = 20e-6, py = 5e-6;
    // 10 beat periods of 10 ns at 0.1 ns
    const auto tr = point_trace(p, geom, l, px, py, 0.1e-9, 300e-9, 100e-9 - 0.05e-9).trace;
    REQUIRE(tr.values.size() == 1000);
    double mean = 0;
    for (double v : tr.values) mean += v;
    mean /= static_cast<double>(tr.values.size());
    const double ia = focal_intensity_analytic(synthesize_array(Tone{0, 1, 0}, geom, l), geom, px, py);
    const double ib = focal_intensity_analytic(synthesize_array(Tone{100e6, 0.8, 0}, geom, l), geom, px, py);
    CHECK_THAT(mean, WithinRel(ia + ib, 1e-6));
}

TEST_CASE("lossless step turn-on builds a quadratic staircase") {
    const auto tr =
        point_trace(single_hold(0, 1, 0, 1e-6), geom, LossModel::lossless(), 0, 0, 0.05e-9, -5e-9, 80e-9).trace;
    const double t1 = tau_1(geom), t2 = tau_2(geom);
    for (std::size_t k = 0; k < tr.values.size(); ++k) {
        const double t = tr.time(k);
        int n = 0;
        bool edge = false;
        for (int i = 0; i < geom.n_cols; ++i)
            for (int j = 0; j < geom.n_rows; ++j) {
                const double d = i * t2 + j * t1;
                if (std::abs(t - d) < 1e-13) edge = true;
                if (d <= t) ++n;
            }
        if (!edge) CHECK_THAT(tr.values[k], WithinAbs(double(n) * n, 1e-9));
    }
    // the slow-axis partial sums: after i complete columns the field is 9 i
    const auto at = [&](double t) { return tr.values[static_cast<std::size_t>(std::lround((t - tr.t0) / tr.dt))]; };
    for (int i = 1; i <= geom.n_cols; ++i) CHECK_THAT(at((i - 1) * t2 + 9 * t1), WithinAbs(81.0 * i * i, 1e-9));
}

TEST_CASE("two tones beat at their difference frequency") {
    DriveProgram p;
    Channel a, b;
    a.segments.push_back(Segment::hold(0, 2e-6, 1, -39e6));
    b.segments.push_back(Segment::hold(0, 2e-6, 1, 39e6));
    p.channels = {a, b};
    const auto tr = point_trace(p, geom, LossModel{}, 0, 0, 0.2e-9, 200e-9, 1e-6).trace;
    double best_f = 0, best = 0;
    for (double f = 10e6; f <= 200e6; f += 1e6) {
        std::complex<double> s = 0;
        for (std::size_t k = 0; k < tr.values.size(); ++k) s += tr.values[k] * std::polar(1.0, -2 * pi * f * tr.time(k));
        if (std::abs(s) > best) best = std::abs(s), best_f = f;
    }
    CHECK(best_f == 78e6);
}

TEST_CASE("trace guards and diagnostics") {
    const auto p = single_hold(0, 1, 0, 1e-6);
    CHECK_THROWS_AS(point_trace(p, geom, LossModel{}, 0, 0, 3e-9, 0, 1e-6), ArgumentError);
    CHECK_THROWS_AS(point_trace(p, geom, LossModel{}, L, 0, 1e-9, 0, 1e-6), ArgumentError);
    const auto r = point_trace(p, geom, LossModel{}, 0, 0, 1e-9, 0, 20e-9);
    CHECK(r.diagnostics.size() == 1);
    DriveProgram bad = p;
    bad.channels[0].segments.push_back(Segment::hold(0.5e-6, 1e-6, 1, 0));
    CHECK_THROWS_AS(point_trace(bad, geom, LossModel{}, 0, 0, 1e-9, 0, 1e-6), ValidationError);
    CHECK_THROWS_AS(point_trace(single_hold(2e9, 1, 0, 1e-6), geom, LossModel{}, 0, 0, 1e-9, 0, 1e-6),
                    ValidationError);
}

TEST_CASE("causality and linearity in drive power") {
    const LossModel l;
    const auto a = point_trace(single_hold(0.2e9, 1, 50e-9, 300e-9), geom, l, 3e-6, 2e-6, 0.5e-9, 0, 500e-9).trace;
    const auto b = point_trace(single_hold(0.2e9, 2, 50e-9, 300e-9), geom, l, 3e-6, 2e-6, 0.5e-9, 0, 500e-9).trace;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        if (a.time(k) < 50e-9) CHECK(a.values[k] == 0);
        CHECK_THAT(b.values[k], WithinAbs(4 * a.values[k], 1e-12 * (1 + a.values[k])));
    }
}

TEST_CASE("phase-continuous frequency ramps") {
    Channel c;
    c.phase = 0.3;
    c.segments = {Segment::hold(0, 10e-9, 1, 5e6), Segment::ramp(10e-9, 20e-9, 1, 5e6, 25e6),
                  Segment::hold(30e-9, 10e-9, 1, 25e6)};
    const ChannelEnvelope env(c);
    for (double t : {10e-9, 30e-9}) {
        const auto before = env(t - 1e-15), after = env(t + 1e-15);
        CHECK(std::abs(before - after) < 1e-6);
    }
    // integrated phase at the end: 5 MHz * 10 ns + 15 MHz mean * 20 ns + 25 MHz * 10 ns cycles
    const double cycles = 5e6 * 10e-9 + 15e6 * 20e-9 + 25e6 * 10e-9;
    const auto end = env(40e-9 - 1e-15);
    CHECK_THAT(std::arg(end * std::polar(1.0, 2 * pi * cycles - 0.3)), WithinAbs(0, 1e-6));
    CHECK(env(-1e-9) == std::complex<double>(0, 0));
    CHECK(env(41e-9) == std::complex<double>(0, 0));
}

TEST_CASE("photodetector filter") {
    TimeTrace c{0, 0.1e-9, std::vector<double>(500, 2.5)};
    const auto fc = pd_filter(c, 50e6);
    for (double v : fc.values) CHECK_THAT(v, WithinRel(2.5, 1e-14));

    TimeTrace step{0, 0.01e-9, std::vector<double>(20000, 0)};
    for (std::size_t k = 1000; k < step.values.size(); ++k) step.values[k] = 1;
    const auto fs = pd_filter(step, 50e6);
    CHECK_THAT(fs.values.back(), WithinRel(1.0, 1e-9));
    // 10-90 rise of a first-order response
    double t10 = 0, t90 = 0;
    for (std::size_t k = 1; k < fs.values.size(); ++k) {
        if (!t10 && fs.values[k] >= 0.1) t10 = fs.time(k);
        if (!t90 && fs.values[k] >= 0.9) t90 = fs.time(k);
    }
    CHECK_THAT(t90 - t10, WithinAbs(std::log(9.0) / (2 * pi * 50e6), 0.02e-9));
    CHECK_THAT(std::log(9.0) / (2 * pi * 50e6), WithinRel(7.0e-9, 0.01));
    CHECK_THROWS_AS(pd_filter(c, 0), ArgumentError);
}

TEST_CASE("edge timing") {
    SECTION("instantaneous step is sub-sample") {
        TimeTrace t{0, 1e-9, std::vector<double>(100, 0)};
        for (std::size_t k = 20; k < 70; ++k) t.values[k] = 1;
        const auto rf = rise_fall(t);
        CHECK(rf.rise < t.dt);
        CHECK(rf.fall < t.dt);
        CHECK(rf.plateau == 1);
    }
    SECTION("no off edge") {
        TimeTrace t{0, 1e-9, std::vector<double>(100, 0)};
        for (std::size_t k = 0; k < 100; ++k) t.values[k] = static_cast<double>(k);
        CHECK_THROWS_AS(rise_fall(t), ShapeError);
    }
    SECTION("pulse of the cascaded device") {
        const LossModel l;
        const auto raw = region_trace(single_hold(0, 1, 0, 1e-6), geom, l, 0, 0, 75e-6, 31, 0.1e-9, -100e-9, 1.5e-6);
        const auto filtered = pd_filter(raw.trace, 50e6);
        const auto rf = rise_fall(filtered);
        CHECK_THAT(rf.rise, WithinAbs(44e-9, 10e-9));
        CHECK_THAT(rf.fall, WithinAbs(44e-9, 10e-9));
        CHECK(std::abs(rf.rise - rf.fall) < 5e-9);
        const double peak = *std::max_element(filtered.values.begin(), filtered.values.end());
        CHECK((peak - rf.plateau) / peak < 0.01);
        // buildup bound: first nonzero sample to 99% of the plateau
        double first = -1, settled = -1;
        for (std::size_t k = 0; k < filtered.values.size(); ++k) {
            if (first < 0 && filtered.values[k] > 0) first = filtered.time(k);
            if (settled < 0 && filtered.values[k] >= 0.99 * rf.plateau) settled = filtered.time(k);
        }
        CHECK(settled - first <= buildup + 5 / (2 * pi * 50e6));
    }
}

TEST_CASE("movies") {
    const LossModel l;
    SECTION("static program gives identical frames that match point traces") {
        MovieSpec s;
        s.frame_times = {300e-9, 400e-9, 500e-9};
        const auto p = single_hold(0.4e9, 1, 0, 1e-6);
        const auto m = simulate_movie(p, geom, l, s);
        REQUIRE(m.frames.size() == 3);
        for (const auto& f : m.frames)
            for (std::size_t k = 0; k < f.image.samples.size(); ++k)
                CHECK_THAT(f.image.samples[k], WithinAbs(m.frames[0].image.samples[k], 1e-9 * (1 + f.image.samples[k])));
        const auto& img = m.frames[1].image;
        for (std::size_t ix : {0UL, 7UL, 19UL})
            for (std::size_t iy : {3UL, 30UL}) {
                const auto tr = point_trace(p, geom, l, img.x(ix), img.y(iy), 1e-9, 400e-9, 1e-9).trace;
                CHECK_THAT(img(ix, iy), WithinRel(tr.values[0], 1e-12));
            }
    }
    SECTION("guards") {
        MovieSpec s;
        s.frame_times = {0, 1e-9};
        s.max_samples = 10;
        CHECK_THROWS_AS(simulate_movie(single_hold(0, 1, 0, 1e-6), geom, l, s), ResourceError);
        MovieSpec f;
        f.frame_times = {0};
        f.grid = GridSpec::centered(100, L);
        CHECK_THROWS_AS(simulate_movie(single_hold(0, 1, 0, 1e-6), geom, l, f), ArgumentError);
        MovieSpec o;
        o.frame_times = {1e-9, 0};
        CHECK_THROWS_AS(simulate_movie(single_hold(0, 1, 0, 1e-6), geom, l, o), ArgumentError);
    }
}

namespace {

// two spots in opposite half-planes, both sweeping +x by 0.35 L in 200 ns
constexpr double ramp_from = 0.05, ramp_span = 0.35;

double ramp_start(int sign) { return sign > 0 ? -ramp_from - ramp_span : ramp_from; }

DriveProgram two_ramps() {
    const double m = std::round(0.25 * geom.roundtrip_2 / geom.roundtrip_1);
    DriveProgram p;
    for (int sign : {1, -1}) {
        const double f0 = fsr2 * (sign * m + ramp_start(sign)), f1 = f0 + fsr2 * ramp_span;
        Channel c;
        c.segments = {Segment::hold(0, 100e-9, 1, f0), Segment::ramp(100e-9, 200e-9, 1, f0, f1),
                      Segment::hold(300e-9, 100e-9, 1, f1)};
        p.channels.push_back(c);
    }
    return p;
}

std::vector<double> times(double t0, double t1, double dt) {
    std::vector<double> v;
    for (double t = t0; t <= t1 + 1e-15; t += dt) v.push_back(t);
    return v;
}

TrajectoryOptions spot_tracking() {
    TrajectoryOptions o;
    const double ws = derive_quantities(geom).spot_waist;
    o.min_separation = 2 * ws;
    o.max_jump = 3 * ws;
    o.period = L;
    return o;
}

}  // namespace

TEST_CASE("two independent ramps keep their shape") {
    MovieSpec s;
    s.min_spacing = 1.5e-6;
    s.frame_times = times(100e-9, 300e-9, 20e-9);
    const auto m = simulate_movie(two_ramps(), geom, LossModel{}, s);
    const double ws = derive_quantities(geom).spot_waist;
    const double rate = ramp_span * fsr2 / 200e-9;
    const double mm = std::round(0.25 * geom.roundtrip_2 / geom.roundtrip_1);
    for (int sign : {1, -1}) {
        std::vector<double> wx, wy;
        for (const auto& f : m.frames) {
            // instantaneous frequency reaching the spot lags by about half the buildup
            const double t_eff = f.time - 0.5 * geom.n_cols * tau_2(geom) - 100e-9;
            const double nu = fsr2 * (sign * mm + ramp_start(sign)) + rate * std::clamp(t_eff, 0.0, 200e-9);
            const auto [x, y] = spot_position(nu, geom);
            const auto fit = fit_spot(f.image, x, y, ws);
            wx.push_back(fit.w_x);
            wy.push_back(fit.w_y);
        }
        const auto spread = [](const std::vector<double>& v) {
            return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end()) - 1;
        };
        CHECK(spread(wx) < 0.10);
        CHECK(spread(wy) < 0.10);
    }
}

TEST_CASE("four-site random access") {
    const LossModel l;
    const std::vector<std::pair<double, double>> sites{
        {-0.25 * L, -0.25 * L}, {0.25 * L, -0.25 * L}, {0.25 * L, 0.25 * L}, {-0.25 * L, 0.25 * L}};
    const auto comp = tones_for_spots(sites, geom);
    DriveProgram p;
    for (std::size_t k = 0; k < 4; ++k) {
        Channel c;
        c.segments.push_back(Segment::hold(200e-9 * static_cast<double>(k), 200e-9, 1, comp.tones[k].detuning));
        p.channels.push_back(c);
    }
    const double ws = derive_quantities(geom).spot_waist;
    // Gaussian-weighted site power, same weight as the crosstalk metric
    CrosstalkOptions weight_options;
    weight_options.quadrature = 21;
    weight_options.truncation = 2.5;
    const detail::CrosstalkKernel kernel(ws, weight_options);
    const auto site_power = [&](double x, double y, double t) {
        double acc = 0;
        for (std::size_t q = 0; q < kernel.w.size(); ++q)
            acc += kernel.w[q] * point_trace(p, geom, l, x + kernel.u[q], y + kernel.v[q], 1e-9, t, 1e-9).trace.values[0];
        return acc;
    };
    for (std::size_t k = 0; k < 4; ++k) {
        const double t = 200e-9 * static_cast<double>(k) + 150e-9;
        std::vector<double> power;
        for (const auto& [x, y] : comp.placed) power.push_back(site_power(x, y, t));
        const auto on = static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
        CHECK(on == k);
        for (std::size_t s = 0; s < 4; ++s) {
            if (s == k) continue;
            const double dx = comp.placed[s].first - comp.placed[k].first;
            const double dy = comp.placed[s].second - comp.placed[k].second;
            CrosstalkOptions dir = weight_options;
            dir.axis = std::atan2(dy, dx);
            const double bound = crosstalk_at(geom, l, std::hypot(dx, dy) / ws, 64, dir);
            // the bound is the crosstalk along the site-to-site direction; envelope shifts it slightly
            CHECK_THAT(power[s] / power[k], WithinRel(bound, 0.25));
        }
    }
}

TEST_CASE("trajectories") {
    const LossModel l;
    SECTION("static spot") {
        MovieSpec s;
        s.frame_times = times(100e-9, 300e-9, 20e-9);
        const auto m = simulate_movie(single_hold(0.37e9, 1, 0, 1e-6), geom, l, s);
        const auto paths = extract_trajectories(m, spot_tracking());
        REQUIRE(paths.size() == 1);
        for (const auto& p : paths[0].points) {
            CHECK_THAT(p.x, WithinAbs(paths[0].points[0].x, 1e-12));
            CHECK_THAT(p.y, WithinAbs(paths[0].points[0].y, 1e-12));
        }
        CHECK_FALSE(paths[0].ambiguous);
    }
    SECTION("linear ramp") {
        DriveProgram p;
        Channel c;
        const double f0 = -0.35 * fsr2, f1 = 0.35 * fsr2, T = 400e-9;
        c.segments = {Segment::hold(0, 100e-9, 1, f0), Segment::ramp(100e-9, T, 1, f0, f1),
                      Segment::hold(100e-9 + T, 200e-9, 1, f1)};
        p.channels = {c};
        MovieSpec s;
        s.min_spacing = 2e-6;
        s.frame_times = times(200e-9, 100e-9 + T, 10e-9);
        const auto m = simulate_movie(p, geom, l, s);
        const auto paths = extract_trajectories(m, spot_tracking());
        REQUIRE(paths.size() == 1);
        const auto& pts = paths[0].points;
        double st = 0, sx = 0, stt = 0, stx = 0;
        for (const auto& q : pts) st += q.t, sx += q.x, stt += q.t * q.t, stx += q.t * q.x;
        const double n = static_cast<double>(pts.size());
        const double slope = (n * stx - st * sx) / (n * stt - st * st);
        CHECK_THAT(slope, WithinRel(L / fsr2 * (f1 - f0) / T, 0.05));
    }
    SECTION("split and merge") {
        const double d = 0.3 * fsr2;
        DriveProgram p;
        Channel a, b;
        a.segments = {Segment::hold(0, 150e-9, 0.5, 0), Segment::ramp(150e-9, 200e-9, 0.5, 0, d),
                      Segment::hold(350e-9, 200e-9, 0.5, d), Segment::ramp(550e-9, 200e-9, 0.5, d, 0),
                      Segment::hold(750e-9, 150e-9, 0.5, 0)};
        b.segments = {Segment::hold(0, 150e-9, 0.5, 0), Segment::ramp(150e-9, 200e-9, 0.5, 0, -d),
                      Segment::hold(350e-9, 200e-9, 0.5, -d), Segment::ramp(550e-9, 200e-9, 0.5, -d, 0),
                      Segment::hold(750e-9, 150e-9, 0.5, 0)};
        p.channels = {a, b};
        MovieSpec s;
        s.frame_times = times(100e-9, 900e-9, 10e-9);
        const auto m = simulate_movie(p, geom, l, s);
        const auto paths = extract_trajectories(m, spot_tracking());
        REQUIRE(paths.size() == 2);
        const auto& trunk = paths[0].points;
        const auto& branch = paths[1].points;
        CHECK(trunk.size() == m.frames.size());
        // the branch appears after the split starts and disappears before the end
        CHECK(branch.front().t > 150e-9);
        CHECK(branch.back().t < 900e-9);
        double max_sep = 0;
        for (const auto& q : branch)
            for (const auto& r : trunk)
                if (std::abs(r.t - q.t) < 1e-12) max_sep = std::max(max_sep, std::abs(q.x - r.x));
        CHECK_THAT(max_sep, WithinRel(0.6 * L, 0.1));
        // before the split and after the merge there is a single spot at the origin
        CHECK_THAT(trunk.front().x, WithinAbs(0, 2e-6));
        CHECK_THAT(trunk.back().x, WithinAbs(0, 2e-6));
    }
    SECTION("crossing spots are flagged") {
        DriveProgram p;
        Channel a, b;
        a.segments = {Segment::ramp(0, 600e-9, 1, -0.3 * fsr2, 0.3 * fsr2)};
        b.segments = {Segment::ramp(0, 600e-9, 1, 0.3 * fsr2, -0.3 * fsr2)};
        p.channels = {a, b};
        MovieSpec s;
        s.frame_times = times(100e-9, 600e-9, 10e-9);
        const auto m = simulate_movie(p, geom, l, s);
        const auto paths = extract_trajectories(m, spot_tracking());
        bool flagged = false;
        for (const auto& t : paths) flagged |= t.ambiguous;
        CHECK(flagged);
    }
}
