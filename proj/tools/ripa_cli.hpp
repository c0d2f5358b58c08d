// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ripa/ripa.hpp"

namespace ripa::cli {

namespace fs = std::filesystem;

inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { ok = 0, validation_failure = 1, numerical_failure = 2, usage_error = 64 };

struct Options {
    // focal
    double detuning = 0;
    std::size_t focal_samples = 1024;
    // sweep
    int sweep_points = 201;
    // grid
    int grid_n = 11;
    // crosstalk
    double d_min = 1, d_max = 20, d_step = 0.5, tail_lo = 3, tail_hi = 10;
    int n_azimuth = 64;
    // pulse
    double pulse_width = 1e-6, dt = 0.1e-9, region = 75e-6;
    int region_samples = 31;
    // move
    std::string program = "two-ramp";
    double frame_dt = 10e-9, spacing = 5e-6;
    // tradeoff
    int kappa_points = 60;
    // calibrate
    std::string aberration = "random";
    double aberration_amplitude = pi;
    // stability
    double pupil = 500e-6;
};

struct RunContext {
    Config config;
    json config_json;
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    fs::path out;
    std::string subcommand;
    std::vector<std::string> arguments;
    Options opt;
};

// ---------------------------------------------------------------- subcommands

namespace detail {

inline IntensityGrid analytic_patch(const ArrayField& arr, const RipaGeometry& g, double cx, double cy,
                                    double half, std::size_t n) {
    auto img = GridSpec{n, n, 2 * half / static_cast<double>(n - 1), 2 * half / static_cast<double>(n - 1), cx, cy}
                   .make<double>();
    for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) img(ix, iy) = focal_intensity_analytic(arr, g, img.x(ix), img.y(iy));
    return img;
}

inline json fit_json(const SpotFit& f) {
    return {{"x", f.x}, {"y", f.y}, {"w_x", f.w_x}, {"w_y", f.w_y}, {"peak", f.peak}, {"residual", f.residual}};
}

inline void cmd_derive(const RunContext& c) {
    const auto q = derive_quantities(c.config.geometry);
    io::write_json(c.out / "derived.json", to_json(q));
}

inline void cmd_focal(const RunContext& c) {
    const auto& g = c.config.geometry;
    const auto q = derive_quantities(g);
    const ArrayField arr = synthesize_array(Tone{c.opt.detuning, 1, 0}, g, c.config.loss);
    NumericFocalSpec spec;
    spec.out = GridSpec::centered(c.opt.focal_samples, 3 * q.bz_extent);
    const auto img = intensity(focal_field_numeric(arr, g, spec));
    io::export_grid(c.out / "focal", img);
    const auto [x0, y0] = spot_position(c.opt.detuning, g);
    const auto fit = fit_spot(img, x0, y0, q.spot_waist);
    json j = fit_json(fit);
    j["expected_x"] = x0;
    j["expected_y"] = y0;
    j["detuning_hz"] = c.opt.detuning;
    io::write_json(c.out / "fit.json", j);
}

inline void cmd_sweep(const RunContext& c) {
    const auto& g = c.config.geometry;
    const auto q = derive_quantities(g);
    if (c.opt.sweep_points < 2) throw ArgumentError("sweep needs at least 2 points");
    io::CsvWriter csv(c.out / "sweep.csv", {"detuning_hz", "phi_x", "phi_y", "x_m", "y_m", "x_fit_m", "y_fit_m"});
    for (int k = 0; k < c.opt.sweep_points; ++k) {
        const double nu = q.fsr_1 * (static_cast<double>(k) / (c.opt.sweep_points - 1) - 0.5);
        const auto ph = phase_pair(nu, g);
        const auto [x, y] = spot_position(nu, g);
        const ArrayField arr = synthesize_array(Tone{nu, 1, 0}, g, c.config.loss);
        const auto patch = analytic_patch(arr, g, x, y, 1.5 * q.spot_waist, 41);
        const auto fit = fit_spot(patch, x, y, q.spot_waist);
        csv.row(nu, ph.x, ph.y, x, y, fit.x, fit.y);
    }
}

struct GridMeasurement {
    std::vector<SpotFit> fits;
    GridLattice measured;
    GridLattice expected;
    UniformityStats uniformity;
};

/// One single-tone image per compensated grid tone, fitted, then a least-squares lattice.
inline GridMeasurement measure_grid(const Config& cfg, int n) {
    const auto& g = cfg.geometry;
    const auto q = derive_quantities(g);
    const ToneSet tones = compensate_envelope(tones_for_grid(n, g), g);
    GridMeasurement m;
    m.expected = quasi_square_lattice(n, g);
    m.fits.resize(tones.size());
    ripa::detail::parallel_for(tones.size(), [&](std::size_t k) {
        const auto [x, y] = spot_position(tones[k].detuning, g);
        const ArrayField arr = synthesize_array(tones[k], g, cfg.loss);
        const auto patch = analytic_patch(arr, g, x, y, 1.5 * q.spot_waist, 61);
        m.fits[k] = fit_spot(patch, x, y, q.spot_waist);
    });
    m.uniformity = uniformity_stats(m.fits);
    // unwrap fitted centers against the ideal unwrapped lattice, then fit p = c + i a + j b
    const double L = q.bz_extent, R = q.length_ratio;
    Eigen::MatrixXd D(static_cast<Eigen::Index>(tones.size()), 3), P(static_cast<Eigen::Index>(tones.size()), 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto k = static_cast<std::size_t>(i * n + j);
            const double px = L * (2.0 * i + static_cast<double>(j) / n);
            const double py = px / R;
            const auto& f = m.fits[k];
            const double ux = px + ripa::detail::wrap_position(f.x - px, L);
            const double uy = py + ripa::detail::wrap_position(f.y - py, L);
            D.row(static_cast<Eigen::Index>(k)) << i, j, 1;
            P.row(static_cast<Eigen::Index>(k)) << ux, uy;
        }
    const Eigen::MatrixXd X = D.colPivHouseholderQr().solve(P);
    const Eigen::Vector2d a = X.row(0).transpose(), b = X.row(1).transpose();
    // along i only y moves (mod L); along j the step is L/N in x
    const Eigen::Vector2d a_wrapped(ripa::detail::wrap_position(a.x(), L), a.y());
    m.measured.d_y = a_wrapped.norm();
    m.measured.d_x = b.norm();
    m.measured.angle = std::acos(std::abs(a_wrapped.dot(b)) / (a_wrapped.norm() * b.norm()));
    return m;
}

inline void cmd_grid(const RunContext& c) {
    const auto& g = c.config.geometry;
    const ToneSet tones = compensate_envelope(tones_for_grid(c.opt.grid_n, g), g);
    const auto m = measure_grid(c.config, c.opt.grid_n);
    io::CsvWriter csv(c.out / "grid.csv", {"i", "j", "detuning_hz", "amplitude", "x_m", "y_m", "w_x_m", "w_y_m", "peak"});
    for (std::size_t k = 0; k < tones.size(); ++k) {
        const auto& f = m.fits[k];
        csv.row(static_cast<int>(k) / c.opt.grid_n, static_cast<int>(k) % c.opt.grid_n, tones[k].detuning,
                tones[k].amplitude, f.x, f.y, f.w_x, f.w_y, f.peak);
    }
    io::write_json(c.out / "uniformity.json",
                   {{"sigma_i", m.uniformity.sigma_i}, {"sigma_wx", m.uniformity.sigma_wx},
                    {"sigma_wy", m.uniformity.sigma_wy}, {"spots", tones.size()}});
    io::write_json(c.out / "lattice.json",
                   {{"measured", {{"d_x", m.measured.d_x}, {"d_y", m.measured.d_y}, {"angle_rad", m.measured.angle}}},
                    {"expected", {{"d_x", m.expected.d_x}, {"d_y", m.expected.d_y}, {"angle_rad", m.expected.angle}}}});
}

inline std::vector<double> crosstalk_separations(const Options& o) {
    std::vector<double> d;
    for (double v = o.d_min; v <= o.d_max + 1e-9; v += o.d_step) d.push_back(v);
    d.push_back(6.1);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), d.end());
    return d;
}

inline void cmd_crosstalk(const RunContext& c) {
    const auto curve = crosstalk_curve(c.config.geometry, c.config.loss, crosstalk_separations(c.opt), c.opt.n_azimuth);
    io::CsvWriter csv(c.out / "crosstalk.csv", {"separation", "value"});
    for (std::size_t k = 0; k < curve.value.size(); ++k) csv.row(curve.separation[k], curve.value[k]);
    const auto fit = powerlaw_fit(curve, c.opt.tail_lo, c.opt.tail_hi);
    io::write_json(c.out / "powerlaw.json", {{"exponent", fit.exponent},
                                             {"prefactor", fit.prefactor},
                                             {"rms_log_residual", fit.rms_log_residual},
                                             {"model_mismatch", fit.model_mismatch},
                                             {"tail_range", {c.opt.tail_lo, c.opt.tail_hi}}});
}

struct PulseMeasurement {
    TimeTrace raw;
    TimeTrace filtered;
    RiseFall edges;
    RiseFall raw_edges;
};

/// Square pulse on the zone-center spot, integrated over the detector area, then filtered.
inline PulseMeasurement measure_pulse(const Config& cfg, const Options& o) {
    DriveProgram prog;
    Channel ch;
    ch.segments.push_back(Segment::hold(0, o.pulse_width, 1, 0));
    prog.channels.push_back(ch);
    const double t0 = -100e-9, span = o.pulse_width + 500e-9;
    PulseMeasurement m;
    m.raw = region_trace(prog, cfg.geometry, cfg.loss, 0, 0, o.region, o.region_samples, o.dt, t0, span).trace;
    m.filtered = pd_filter(m.raw, cfg.drive.pd_bandwidth_hz, cfg.drive.pd_order);
    m.edges = rise_fall(m.filtered);
    m.raw_edges = rise_fall(m.raw);
    return m;
}

inline void cmd_pulse(const RunContext& c) {
    const auto m = measure_pulse(c.config, c.opt);
    io::CsvWriter csv(c.out / "trace.csv", {"t_s", "intensity"});
    for (std::size_t k = 0; k < m.filtered.values.size(); ++k) csv.row(m.filtered.time(k), m.filtered.values[k]);
    io::CsvWriter raw(c.out / "raw_trace.csv", {"t_s", "intensity"});
    for (std::size_t k = 0; k < m.raw.values.size(); ++k) raw.row(m.raw.time(k), m.raw.values[k]);
    io::write_json(c.out / "pulse.json", {{"rise_ns", m.edges.rise * 1e9},
                                          {"fall_ns", m.edges.fall * 1e9},
                                          {"plateau", m.edges.plateau},
                                          {"raw_rise_ns", m.raw_edges.rise * 1e9},
                                          {"raw_fall_ns", m.raw_edges.fall * 1e9},
                                          {"pd_bandwidth_hz", c.config.drive.pd_bandwidth_hz}});
}

/// Named demonstration programs; returns the program and its end time.
inline std::pair<DriveProgram, double> demo_program(const std::string& name, const RipaGeometry& g) {
    const double fsr2 = speed_of_light / g.roundtrip_2;
    DriveProgram p;
    if (name == "two-ramp") {
        // spots in opposite half-planes, both sweeping +x by 0.35 L in 200 ns
        const double m_off = std::round(0.25 * g.roundtrip_2 / g.roundtrip_1);
        for (double start : {m_off - 0.4, -m_off + 0.05}) {
            const double f0 = fsr2 * start, f1 = fsr2 * (start + 0.35);
            Channel ch;
            ch.segments = {Segment::hold(0, 100e-9, 1, f0), Segment::ramp(100e-9, 200e-9, 1, f0, f1),
                           Segment::hold(300e-9, 100e-9, 1, f1)};
            p.channels.push_back(ch);
        }
        return {p, 400e-9};
    }
    if (name == "split-merge") {
        const double d = 0.3 * fsr2;
        Channel a, b;
        a.segments = {Segment::hold(0, 150e-9, 0.5, 0), Segment::ramp(150e-9, 200e-9, 0.5, 0, d),
                      Segment::hold(350e-9, 200e-9, 0.5, d), Segment::ramp(550e-9, 200e-9, 0.5, d, 0),
                      Segment::hold(750e-9, 150e-9, 0.5, 0)};
        b.segments = {Segment::hold(0, 150e-9, 0.5, 0), Segment::ramp(150e-9, 200e-9, 0.5, 0, -d),
                      Segment::hold(350e-9, 200e-9, 0.5, -d), Segment::ramp(550e-9, 200e-9, 0.5, -d, 0),
                      Segment::hold(750e-9, 150e-9, 0.5, 0)};
        p.channels = {a, b};
        return {p, 900e-9};
    }
    if (name == "random-access") {
        const double L = bz_extent(g);
        const auto sites = tones_for_spots({{-0.25 * L, -0.25 * L}, {0.25 * L, -0.25 * L}, {0.25 * L, 0.25 * L},
                                            {-0.25 * L, 0.25 * L}},
                                           g);
        for (std::size_t k = 0; k < sites.tones.size(); ++k) {
            Channel ch;
            ch.segments = {Segment::hold(200e-9 * static_cast<double>(k), 200e-9, 1, sites.tones[k].detuning)};
            p.channels.push_back(ch);
        }
        return {p, 800e-9};
    }
    throw ValidationError("unknown program '" + name + "' (two-ramp, split-merge, random-access)");
}

inline void cmd_move(const RunContext& c) {
    const auto& g = c.config.geometry;
    const auto [prog, t_end] = demo_program(c.opt.program, g);
    MovieSpec spec;
    spec.min_spacing = c.opt.spacing;
    for (double t = 0; t <= t_end + 1e-15; t += c.opt.frame_dt) spec.frame_times.push_back(t);
    const Movie movie = simulate_movie(prog, g, c.config.loss, spec);
    fs::create_directories(c.out / "frames");
    json times = json::array();
    for (std::size_t k = 0; k < movie.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04zu.pgm", k);
        io::write_pgm16(c.out / "frames" / name, movie.frames[k].image);
        times.push_back(movie.frames[k].time);
    }
    const auto& f0 = movie.frames.front().image;
    io::write_json(c.out / "movie.json", {{"dt", c.opt.frame_dt},
                                          {"dx", f0.dx},
                                          {"dy", f0.dy},
                                          {"origin", {f0.x0, f0.y0}},
                                          {"frame_times", times},
                                          {"program", c.opt.program}});
    TrajectoryOptions topt;
    const double ws = derive_quantities(g).spot_waist;
    topt.min_separation = 2 * ws;
    topt.max_jump = 3 * ws;
    topt.period = bz_extent(g);
    const auto paths = extract_trajectories(movie, topt);
    io::CsvWriter csv(c.out / "trajectories.csv", {"path", "t_s", "x_m", "y_m", "confidence", "ambiguous"});
    for (std::size_t p = 0; p < paths.size(); ++p)
        for (const auto& pt : paths[p].points) csv.row(p, pt.t, pt.x, pt.y, pt.confidence, paths[p].ambiguous);
}

inline void cmd_tradeoff(const RunContext& c) {
    const auto& g = c.config.geometry;
    const auto& l = c.config.loss;
    struct Panel {
        std::string name;
        int n;
        double loss;
        std::optional<double> marker;
    };
    const std::vector<Panel> panels{{"first", g.n_rows, l.loss_1, l.kappa_1},
                                    {"second", g.n_cols, l.loss_2 + l.kappa_lock, l.kappa_2},
                                    {"n100_l1pct", 100, 0.01, std::nullopt}};
    json markers = json::object();
    for (const auto& p : panels) {
        std::vector<double> kappas;
        for (int k = 0; k < c.opt.kappa_points; ++k) {
            const double kappa = 0.2 * (k + 1) / c.opt.kappa_points;
            if (kappa + p.loss < 1) kappas.push_back(kappa);
        }
        if (p.marker) kappas.push_back(*p.marker);
        std::sort(kappas.begin(), kappas.end());
        kappas.erase(std::unique(kappas.begin(), kappas.end()), kappas.end());
        const auto curve = tradeoff_curve(p.n, p.loss, kappas);
        io::CsvWriter csv(c.out / ("tradeoff_" + p.name + ".csv"), {"kappa", "eta", "rw"});
        for (const auto& pt : curve.points) csv.row(pt.kappa, pt.efficiency, pt.broadening);
        json m = {{"n", p.n}, {"internal_loss", p.loss}};
        if (p.marker) {
            const auto one = tradeoff_curve(p.n, p.loss, {*p.marker}).points.front();
            m["operating_point"] = {{"kappa", one.kappa}, {"eta", one.efficiency}, {"rw", one.broadening}};
        }
        json best = nullptr;
        for (const auto& pt : curve.points)
            if (pt.broadening < 1.1 && (best.is_null() || pt.efficiency > best["eta"].get<double>()))
                best = {{"kappa", pt.kappa}, {"eta", pt.efficiency}, {"rw", pt.broadening}};
        m["best_eta_with_rw_below_1.1"] = best;
        markers[p.name] = m;
    }
    io::write_json(c.out / "markers.json", markers);
}

inline void cmd_budget(const RunContext& c) {
    const auto b = efficiency_budget(c.config.loss, c.config.geometry);
    io::write_json(c.out / "budget.json", to_json(b, c.config.loss));
}

inline void cmd_calibrate(const RunContext& c) {
    const auto& g = c.config.geometry;
    AberrationModel model;
    if (c.opt.aberration == "random")
        model.kind = AberrationKind::random_uniform;
    else if (c.opt.aberration == "smooth")
        model.kind = AberrationKind::smooth_low_order;
    else
        throw ValidationError("unknown aberration model '" + c.opt.aberration + "' (random, smooth)");
    model.amplitude = c.opt.aberration_amplitude;
    const auto ab = inject_aberrations(g, model, c.seed);
    const auto res = calibrate_and_verify(g, ab);
    std::ofstream mask(c.out / "mask.csv", std::ios::binary);
    for (Eigen::Index i = 0; i < res.mask.per_beam_correction.rows(); ++i) {
        for (Eigen::Index j = 0; j < res.mask.per_beam_correction.cols(); ++j)
            mask << (j ? "," : "") << io::format_double(res.mask.per_beam_correction(i, j));
        mask << '\n';
    }
    io::write_json(c.out / "mask.json",
                   {{"reference_index", {res.mask.reference.i, res.mask.reference.j}},
                    {"geometry_hash", io::hex64(io::fnv1a(to_json(g).dump()))},
                    {"rows", "beam index i (x)"},
                    {"columns", "beam index j (y)"},
                    {"strehl_before", res.strehl_before},
                    {"strehl_after", res.strehl_after},
                    {"aberration", c.opt.aberration},
                    {"seed", c.seed}});
}

inline void cmd_stability(const RunContext& c) {
    const auto& g = c.config.geometry;
    const RayMatrix m = lens_guide_roundtrip(g.roundtrip_1, g.mla_focal);
    json j = {{"matrix", {m.a, m.b, m.c, m.d}}, {"determinant", m.det()}, {"half_trace", m.half_trace()}};
    try {
        const auto q = eigen_q(m, g.wavelength);
        const double gouy = gouy_roundtrip(q, g.roundtrip_1);
        j["stable"] = true;
        j["q_imag"] = q.q.imag();
        j["q_real"] = q.q.real();
        j["waist"] = q.waist();
        j["rayleigh_range"] = q.rayleigh_range();
        j["gouy_roundtrip"] = gouy;
        j["gouy_per_pass"] = 0.5 * gouy;
        j["clipping_loss"] = clipping_loss(q.waist(), c.opt.pupil);
        j["pupil"] = c.opt.pupil;
    } catch (const StabilityError&) {
        j["stable"] = false;
    }
    io::write_json(c.out / "stability.json", j);
}

}  // namespace detail

// ---------------------------------------------------------------- driver

inline const std::map<std::string, std::function<void(const RunContext&)>>& commands() {
    static const std::map<std::string, std::function<void(const RunContext&)>> table{
        {"derive", detail::cmd_derive},       {"focal", detail::cmd_focal},
        {"sweep", detail::cmd_sweep},         {"grid", detail::cmd_grid},
        {"crosstalk", detail::cmd_crosstalk}, {"pulse", detail::cmd_pulse},
        {"move", detail::cmd_move},           {"tradeoff", detail::cmd_tradeoff},
        {"budget", detail::cmd_budget},       {"calibrate", detail::cmd_calibrate},
        {"stability", detail::cmd_stability}};
    return table;
}

inline json manifest_json(const RunContext& c) {
    return {{"tool", "ripa_sim"},
            {"version", tool_version},
            {"subcommand", c.subcommand},
            {"config_path", c.config_path},
            {"config", c.config_json},
            {"config_hash", io::hex64(io::fnv1a(c.config_json.dump()))},
            {"overrides", c.overrides},
            {"seed", c.seed},
            {"output_directory", c.out.string()},
            {"arguments", c.arguments}};
}

namespace detail {

inline int run_impl(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                    const std::optional<json>& embedded_config) {
    CLI::App app{"RIPA spatial light modulator simulator", "ripa_sim"};
    app.set_version_flag("--version", tool_version);
    RunContext ctx;
    std::string out_dir, manifest_path;
    app.add_option("--config", ctx.config_path, "configuration JSON (defaults to the built-in geometry)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", ctx.seed, "random seed");
    app.add_option("--set", ctx.overrides, "dotted-path override key=value")->take_all();
    app.add_option("--manifest", manifest_path, "re-run from a recorded manifest");
    app.require_subcommand(0, 1);
    app.fallthrough();
    auto& o = ctx.opt;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, fn] : commands()) subs[name] = app.add_subcommand(name);
    subs["focal"]->add_option("--detuning", o.detuning, "tone detuning (Hz)");
    subs["focal"]->add_option("--samples", o.focal_samples, "samples per axis");
    subs["sweep"]->add_option("--points", o.sweep_points, "detuning samples over one FSR1");
    subs["grid"]->add_option("--n", o.grid_n, "spots per grid side");
    subs["crosstalk"]->add_option("--d-min", o.d_min);
    subs["crosstalk"]->add_option("--d-max", o.d_max);
    subs["crosstalk"]->add_option("--d-step", o.d_step);
    subs["crosstalk"]->add_option("--tail-lo", o.tail_lo);
    subs["crosstalk"]->add_option("--tail-hi", o.tail_hi);
    subs["crosstalk"]->add_option("--azimuths", o.n_azimuth);
    subs["pulse"]->add_option("--width", o.pulse_width, "pulse length (s)");
    subs["pulse"]->add_option("--dt", o.dt, "trace sampling (s)");
    subs["pulse"]->add_option("--region", o.region, "detector side length (m)");
    subs["pulse"]->add_option("--region-samples", o.region_samples);
    subs["move"]->add_option("--program", o.program, "two-ramp, split-merge or random-access");
    subs["move"]->add_option("--frame-dt", o.frame_dt, "frame interval (s)");
    subs["move"]->add_option("--spacing", o.spacing, "scan pixel spacing (m)");
    subs["tradeoff"]->add_option("--points", o.kappa_points, "kappa samples per panel");
    subs["calibrate"]->add_option("--aberration", o.aberration, "random or smooth");
    subs["calibrate"]->add_option("--amplitude", o.aberration_amplitude, "aberration amplitude (rad)");
    subs["stability"]->add_option("--pupil", o.pupil, "microlens pupil diameter (m)");

    std::vector<std::string> argv_store{"ripa_sim"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return usage_error;
    }

    if (!manifest_path.empty()) {
        json man;
        try {
            man = read_json_file(manifest_path);
            auto rerun = man.at("arguments").get<std::vector<std::string>>();
            const std::string dest = out_dir.empty() ? man.at("output_directory").get<std::string>() : out_dir;
            rerun.insert(rerun.begin(), {"--out", dest});
            return run_impl(rerun, out, err, man.at("config"));
        } catch (const json::exception& e) {
            err << "error: malformed manifest: " << e.what() << "\n";
            return validation_failure;
        } catch (const ValidationError& e) {
            err << "error: " << e.what() << "\n";
            return validation_failure;
        }
    }

    const CLI::App* chosen = nullptr;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) chosen = sub, ctx.subcommand = name;
    if (!chosen) {
        err << app.help();
        return usage_error;
    }
    if (out_dir.empty()) {
        err << "error: --out is required\n";
        return usage_error;
    }
    ctx.out = out_dir;
    // everything except --out is replayed from the manifest
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--out") {
            ++k;
            continue;
        }
        if (args[k].rfind("--out=", 0) == 0) continue;
        ctx.arguments.push_back(args[k]);
    }
    try {
        json doc = embedded_config ? *embedded_config
                                   : (ctx.config_path.empty() ? to_json(Config{}) : read_json_file(ctx.config_path));
        doc = to_json(config_from_json(doc));
        for (const auto& s : ctx.overrides) apply_override(doc, s);
        ctx.config = config_from_json(doc);
        ctx.config_json = to_json(ctx.config);
        require_valid(ctx.config.geometry, ctx.config.loss);
        fs::create_directories(ctx.out);
        commands().at(ctx.subcommand)(ctx);
        io::write_json(ctx.out / "manifest.json", manifest_json(ctx));
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return validation_failure;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return numerical_failure;
    }
    out << "wrote " << ctx.out.string() << "\n";
    return ok;
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::run_impl(args, out, err, std::nullopt);
}

}  // namespace ripa::cli
