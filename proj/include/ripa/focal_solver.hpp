// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "ripa/array_synthesis.hpp"
#include "ripa/config.hpp"
#include "ripa/detail/least_squares.hpp"
#include "ripa/errors.hpp"
#include "ripa/grid.hpp"

namespace ripa {

// ---------------------------------------------------------------- analytic

/// a(i, j) = a00 * qx^i * qy^j
struct GeometricArray {
    cplx a00;
    cplx qx{1, 0};
    cplx qy{1, 0};
};

/// Recovers the per-axis geometric structure of an array or throws.
inline GeometricArray detect_geometric(const ArrayField& arr, double rel_tol = 1e-9) {
    const auto& A = arr.amplitudes;
    if (A.size() == 0) throw ArgumentError("empty array");
    GeometricArray g;
    g.a00 = A(0, 0);
    if (std::abs(g.a00) == 0) throw ArgumentError("analytic solver needs a nonzero a(0,0)");
    if (A.rows() > 1) g.qx = A(1, 0) / g.a00;
    if (A.cols() > 1) g.qy = A(0, 1) / g.a00;
    const double scale = A.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            const cplx model = g.a00 * std::pow(g.qx, static_cast<int>(i)) * std::pow(g.qy, static_cast<int>(j));
            if (std::abs(model - A(i, j)) > rel_tol * scale)
                throw ArgumentError("array is not separable with per-axis geometric decay");
        }
    return g;
}

/// |sum_{k<n} (q e^{-i theta})^k|^2
inline double axis_factor(int n, cplx q, double theta) {
    const double r = std::abs(q);
    if (std::abs(r - 1.0) < 1e-15) {
        const double u = 0.5 * (std::arg(q) - theta);
        const double s = std::sin(u);
        if (std::abs(s) < 1e-12) return static_cast<double>(n) * n;
        const double t = std::sin(n * u);
        return t * t / (s * s);
    }
    const cplx z = q * std::polar(1.0, -theta);
    if (std::abs(1.0 - z) < 1e-6) {
        cplx acc = 0, term = 1;
        for (int k = 0; k < n; ++k, term *= z) acc += term;
        return std::norm(acc);
    }
    return std::norm((1.0 - std::pow(z, n)) / (1.0 - z));
}

/// Focal intensity in array units: |a00|^2 envelope times both axis factors.
inline double focal_intensity_analytic(const ArrayField& arr, const RipaGeometry& g, double x, double y) {
    if (arr.hg_x != 0 || arr.hg_y != 0) throw ArgumentError("analytic solver handles fundamental modes only");
    const auto geo = detect_geometric(arr);
    const double bz = bz_extent(g);
    const double we = g.wavelength * g.focus_focal / (pi * arr.mode_waist);
    const double env = std::exp(-2.0 * (x * x + y * y) / (we * we));
    return std::norm(geo.a00) * env * axis_factor(arr.n_x(), geo.qx, 2 * pi * x / bz) *
           axis_factor(arr.n_y(), geo.qy, 2 * pi * y / bz);
}

/// Factor converting analytic (array) units to the physical intensity of the numeric solver.
inline double focal_scale(const ArrayField& arr, const RipaGeometry& g) {
    const double s = pi * arr.mode_waist * arr.mode_waist / (g.wavelength * g.focus_focal);
    return s * s;
}

// ---------------------------------------------------------------- numeric

struct NumericFocalSpec {
    double array_dx = 0;  // 0 selects mode_waist / 4
    double guard = 6.0;   // margin around the footprint, in mode waists
    GridSpec out{};       // dx == 0 selects 1024 x 1024 over three zones
};

namespace detail {

/// Unit-power-normalized 1D Hermite-Gaussian of order n, waist w.
inline double hg_profile(int n, double s, double w) {
    const double u = s / w;
    double norm = 1;
    for (int k = 1; k <= n; ++k) norm *= 2.0 * k;
    return std::hermite(static_cast<unsigned>(n), std::sqrt(2.0) * u) * std::exp(-u * u) / std::sqrt(norm);
}

struct ArraySampling {
    double delta = 0;
    std::vector<double> xs, ys;
};

inline ArraySampling array_sampling(const ArrayField& arr, const NumericFocalSpec& spec) {
    ArraySampling s;
    s.delta = spec.array_dx > 0 ? spec.array_dx : arr.mode_waist / 4;
    if (arr.mode_waist < 3 * s.delta)
        throw SamplingError("array plane undersampled: mode waist < 3 dx");
    auto axis = [&](int n) {
        const double half = 0.5 * (n - 1) * arr.pitch + spec.guard * arr.mode_waist;
        const int m = static_cast<int>(std::ceil(half / s.delta));
        std::vector<double> v(static_cast<std::size_t>(2 * m + 1));
        for (int k = -m; k <= m; ++k) v[static_cast<std::size_t>(k + m)] = k * s.delta;
        return v;
    };
    s.xs = axis(arr.n_x());
    s.ys = axis(arr.n_y());
    return s;
}

inline Eigen::MatrixXd beam_profiles(const std::vector<double>& pts, int n_beams, double pitch, double w, int order) {
    Eigen::MatrixXd G(static_cast<Eigen::Index>(pts.size()), n_beams);
    for (int b = 0; b < n_beams; ++b) {
        const double c = (b - 0.5 * (n_beams - 1)) * pitch;
        for (std::size_t k = 0; k < pts.size(); ++k)
            G(static_cast<Eigen::Index>(k), b) = hg_profile(order, pts[k] - c, w);
    }
    return G;
}

inline Eigen::MatrixXcd fourier_kernel(const std::vector<double>& in, std::size_t n_out, double d_out, double c_out,
                                       double scale) {
    Eigen::MatrixXcd W(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(in.size()));
    const double x0 = c_out - 0.5 * d_out * static_cast<double>(n_out - 1);
    for (std::size_t m = 0; m < n_out; ++m) {
        const double xf = x0 + d_out * static_cast<double>(m);
        for (std::size_t a = 0; a < in.size(); ++a)
            W(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(a)) = std::polar(1.0, -2 * pi * xf * in[a] * scale);
    }
    return W;
}

}  // namespace detail

/// Sampled array-plane field (rows y, columns x), beams centered on the axis.
inline FieldGrid array_plane_field(const ArrayField& arr, const NumericFocalSpec& spec = {}) {
    const auto s = detail::array_sampling(arr, spec);
    const Eigen::MatrixXd GX = detail::beam_profiles(s.xs, arr.n_x(), arr.pitch, arr.mode_waist, arr.hg_x);
    const Eigen::MatrixXd GY = detail::beam_profiles(s.ys, arr.n_y(), arr.pitch, arr.mode_waist, arr.hg_y);
    const Eigen::MatrixXcd E = GY.cast<cplx>() * arr.amplitudes.transpose() * GX.transpose().cast<cplx>();
    FieldGrid out(s.xs.size(), s.ys.size(), s.delta, s.delta, s.xs.front(), s.ys.front());
    for (std::size_t iy = 0; iy < s.ys.size(); ++iy)
        for (std::size_t ix = 0; ix < s.xs.size(); ++ix)
            out(ix, iy) = E(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix));
    return out;
}

/// Output layout that spans exactly one alias period; Parseval holds on it.
inline GridSpec natural_output_spec(const ArrayField& arr, const RipaGeometry& g, const NumericFocalSpec& spec = {}) {
    const auto s = detail::array_sampling(arr, spec);
    const double lf = g.wavelength * g.focus_focal;
    return {s.xs.size(), s.ys.size(), lf / (static_cast<double>(s.xs.size()) * s.delta),
            lf / (static_cast<double>(s.ys.size()) * s.delta), 0, 0};
}

/// Focal field as a direct discrete Fourier transform of the sampled array plane.
inline FieldGrid focal_field_numeric(const ArrayField& arr, const RipaGeometry& g, NumericFocalSpec spec = {}) {
    const double bz = bz_extent(g);
    if (spec.out.dx <= 0 || spec.out.dy <= 0) spec.out = GridSpec::centered(1024, 3 * bz);
    const auto s = detail::array_sampling(arr, spec);
    const double lf = g.wavelength * g.focus_focal;
    const double alias = lf / s.delta;
    const double half_x = 0.5 * spec.out.dx * static_cast<double>(spec.out.nx) + std::abs(spec.out.cx);
    const double half_y = 0.5 * spec.out.dy * static_cast<double>(spec.out.ny) + std::abs(spec.out.cy);
    if (half_x > 0.5 * alias * (1 + 1e-12) || half_y > 0.5 * alias * (1 + 1e-12))
        throw SamplingError("focal window exceeds the alias period of the array sampling");
    const Eigen::MatrixXd GX = detail::beam_profiles(s.xs, arr.n_x(), arr.pitch, arr.mode_waist, arr.hg_x);
    const Eigen::MatrixXd GY = detail::beam_profiles(s.ys, arr.n_y(), arr.pitch, arr.mode_waist, arr.hg_y);
    const Eigen::MatrixXcd E = GY.cast<cplx>() * arr.amplitudes.transpose() * GX.transpose().cast<cplx>();
    const Eigen::MatrixXcd WX = detail::fourier_kernel(s.xs, spec.out.nx, spec.out.dx, spec.out.cx, 1.0 / lf);
    const Eigen::MatrixXcd WY = detail::fourier_kernel(s.ys, spec.out.ny, spec.out.dy, spec.out.cy, 1.0 / lf);
    const Eigen::MatrixXcd F = (s.delta * s.delta / lf) * (WY * E) * WX.transpose();
    auto out = spec.out.make<cplx>();
    for (std::size_t iy = 0; iy < out.ny; ++iy)
        for (std::size_t ix = 0; ix < out.nx; ++ix)
            out(ix, iy) = F(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(ix));
    return out;
}

// ---------------------------------------------------------------- spot fitting

struct SpotFit {
    double x = 0;
    double y = 0;
    double w_x = 0;
    double w_y = 0;
    double peak = 0;
    double residual = 0;
};

struct SpotFitOptions {
    int max_evaluations = 400;
    double peak_floor = 0.1;  // local maxima below this fraction of the window max are ignored
};

namespace detail {

struct WindowSample {
    std::size_t ix, iy;
    double x, y, v;
};

inline std::vector<WindowSample> window_samples(const IntensityGrid& g, double cx, double cy, double radius) {
    std::vector<WindowSample> out;
    for (std::size_t iy = 0; iy < g.ny; ++iy) {
        const double y = g.y(iy);
        if (std::abs(y - cy) > radius) continue;
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
            const double x = g.x(ix);
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) out.push_back({ix, iy, x, y, g(ix, iy)});
        }
    }
    return out;
}

/// Local maxima (8-neighbourhood over the whole grid) among the given samples.
inline std::vector<WindowSample> local_maxima(const IntensityGrid& g, const std::vector<WindowSample>& win,
                                              double floor) {
    std::vector<WindowSample> peaks;
    for (const auto& s : win) {
        if (s.v < floor) continue;
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (!dx && !dy) continue;
                const long jx = static_cast<long>(s.ix) + dx, jy = static_cast<long>(s.iy) + dy;
                if (jx < 0 || jy < 0 || jx >= static_cast<long>(g.nx) || jy >= static_cast<long>(g.ny)) continue;
                const double v = g(static_cast<std::size_t>(jx), static_cast<std::size_t>(jy));
                // ties broken toward the lower index so plateaus count once
                if (v > s.v || (v == s.v && (dy < 0 || (dy == 0 && dx < 0)))) {
                    is_max = false;
                    break;
                }
            }
        if (is_max) peaks.push_back(s);
    }
    return peaks;
}

}  // namespace detail

/// 2D Gaussian fit P exp(-2(x-xc)^2/wx^2 - 2(y-yc)^2/wy^2) inside a circular window.
inline SpotFit fit_spot(const IntensityGrid& g, double cx, double cy, double radius, const SpotFitOptions& opt = {}) {
    const auto win = detail::window_samples(g, cx, cy, radius);
    if (win.size() < 6) throw FitError("fit window holds fewer than 6 samples", 0);
    double vmax = 0;
    for (const auto& s : win) vmax = std::max(vmax, s.v);
    if (!(vmax > 0)) throw FitError("fit window holds no signal", 0);
    const auto peaks = detail::local_maxima(g, win, opt.peak_floor * vmax);
    if (peaks.size() > 1)
        throw AmbiguityError("fit window contains " + std::to_string(peaks.size()) + " peaks",
                             static_cast<int>(peaks.size()));
    auto top = *std::max_element(win.begin(), win.end(), [](const auto& a, const auto& b) { return a.v < b.v; });
    // half-maximum extent through the peak seeds the widths
    auto extent = [&](bool along_x) {
        int count = 0;
        for (const auto& s : win)
            if ((along_x ? s.iy == top.iy : s.ix == top.ix) && s.v >= 0.5 * top.v) ++count;
        const double step = along_x ? g.dx : g.dy;
        return std::max(count, 1) * step * 0.5 / std::sqrt(std::log(2.0) / 2);
    };
    Eigen::VectorXd p(5);
    p << top.v, top.x, top.y, extent(true), extent(false);
    const int m = static_cast<int>(win.size());
    auto residual = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (int k = 0; k < m; ++k) {
            const auto& s = win[static_cast<std::size_t>(k)];
            const double ex = (s.x - q[1]) / q[3], ey = (s.y - q[2]) / q[4];
            r[k] = q[0] * std::exp(-2 * ex * ex - 2 * ey * ey) - s.v;
        }
    };
    auto jacobian = [&](const Eigen::VectorXd& q, Eigen::MatrixXd& J) {
        for (int k = 0; k < m; ++k) {
            const auto& s = win[static_cast<std::size_t>(k)];
            const double ex = (s.x - q[1]) / q[3], ey = (s.y - q[2]) / q[4];
            const double e = std::exp(-2 * ex * ex - 2 * ey * ey);
            J(k, 0) = e;
            J(k, 1) = q[0] * e * 4 * ex / q[3];
            J(k, 2) = q[0] * e * 4 * ey / q[4];
            J(k, 3) = q[0] * e * 4 * ex * ex / q[3];
            J(k, 4) = q[0] * e * 4 * ey * ey / q[4];
        }
    };
    const auto res = detail::levenberg_marquardt(p, m, residual, jacobian, opt.max_evaluations);
    const auto& q = res.x;
    const double rel = res.rms / std::max(std::abs(q[0]), std::numeric_limits<double>::min());
    if (!res.converged || !(q[0] > 0) || !std::isfinite(rel))
        throw FitError("spot fit did not converge", rel);
    return {q[1], q[2], std::abs(q[3]), std::abs(q[4]), q[0], rel};
}

inline SpotFit fit_spot(const FieldGrid& g, double cx, double cy, double radius, const SpotFitOptions& opt = {}) {
    return fit_spot(intensity(g), cx, cy, radius, opt);
}

// ---------------------------------------------------------------- axial propagation

struct AxialOptions {
    double band_tolerance = 1e-6;  // spectral energy fraction allowed outside the band limit
    double edge_taper = 0;         // cosine taper width per side, as a fraction of the window
};

/// Raised-cosine apodization of the outer `fraction` of each side.
inline FieldGrid taper_edges(const FieldGrid& in, double fraction) {
    FieldGrid out = in;
    if (fraction <= 0) return out;
    auto weight = [&](std::size_t k, std::size_t n) {
        const double pos = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        const double e = std::min(pos, 1 - pos) / fraction;
        return e >= 1 ? 1.0 : 0.5 - 0.5 * std::cos(pi * e);
    };
    for (std::size_t iy = 0; iy < in.ny; ++iy)
        for (std::size_t ix = 0; ix < in.nx; ++ix) out(ix, iy) *= weight(ix, in.nx) * weight(iy, in.ny);
    return out;
}

namespace detail {

inline void fft2(std::vector<cplx>& data, std::size_t nx, std::size_t ny, bool inverse) {
    Eigen::FFT<double> fft;
    std::vector<cplx> line, out;
    line.resize(nx);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(iy * nx), nx, line.begin());
        inverse ? fft.inv(out, line) : fft.fwd(out, line);
        std::copy(out.begin(), out.end(), data.begin() + static_cast<std::ptrdiff_t>(iy * nx));
    }
    line.resize(ny);
    for (std::size_t ix = 0; ix < nx; ++ix) {
        for (std::size_t iy = 0; iy < ny; ++iy) line[iy] = data[iy * nx + ix];
        inverse ? fft.inv(out, line) : fft.fwd(out, line);
        for (std::size_t iy = 0; iy < ny; ++iy) data[iy * nx + ix] = out[iy];
    }
}

inline double fft_frequency(std::size_t k, std::size_t n, double d) {
    const long kk = k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
    return static_cast<double>(kk) / (static_cast<double>(n) * d);
}

}  // namespace detail

/// Angular-spectrum propagation by z (exact kz, carrier removed).
inline FieldGrid propagate_axial(const FieldGrid& focal, double z, double wavelength, const AxialOptions& opt = {}) {
    FieldGrid out = taper_edges(focal, opt.edge_taper);
    out.plane_z = focal.plane_z + z;
    if (z == 0) return out;
    const std::size_t nx = focal.nx, ny = focal.ny;
    detail::fft2(out.samples, nx, ny, false);
    const double inv_l2 = 1.0 / (wavelength * wavelength);
    auto limit = [&](std::size_t n, double d) {
        const double df = 1.0 / (static_cast<double>(n) * d);
        return 1.0 / (wavelength * std::sqrt(std::pow(2 * df * z, 2) + 1.0));
    };
    const double lim_x = limit(nx, focal.dx), lim_y = limit(ny, focal.dy);
    double total = 0, outside = 0;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        const double fy = detail::fft_frequency(iy, ny, focal.dy);
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double fx = detail::fft_frequency(ix, nx, focal.dx);
            auto& v = out.samples[iy * nx + ix];
            const double p = std::norm(v);
            total += p;
            const double kz2 = inv_l2 - fx * fx - fy * fy;
            if (std::abs(fx) > lim_x || std::abs(fy) > lim_y || kz2 <= 0) outside += p;
            if (kz2 <= 0) {
                v = 0;
                continue;
            }
            // sqrt(a) - sqrt(b) in a cancellation-free form
            const double dk = -(fx * fx + fy * fy) / (std::sqrt(kz2) + 1.0 / wavelength);
            v *= std::polar(1.0, 2 * pi * z * dk);
        }
    }
    if (total > 0 && outside / total > opt.band_tolerance)
        throw SamplingError("axial propagation would alias: " + std::to_string(outside / total) +
                            " of the spectrum lies outside the band limit");
    detail::fft2(out.samples, nx, ny, true);
    return out;
}

// ---------------------------------------------------------------- lensing

inline double ripa_transit_time(const RipaGeometry& g) { return g.n_cols * g.roundtrip_2 / speed_of_light; }

inline double lensing_ratio(double tau_ripa, double tau_aod) {
    if (!(tau_ripa >= 0) || !(tau_aod > 0)) throw ArgumentError("lensing_ratio: times must be positive");
    return tau_ripa / (std::sqrt(6.0) * tau_aod);
}

/// Focal shift of the equivalent thin lens formed by the retarded column phases.
inline double chirp_defocus_analytic(const RipaGeometry& g, double sweep_rate) {
    const double t2 = tau_2(g);
    return -g.wavelength * g.focus_focal * g.focus_focal * sweep_rate * t2 * t2 / (g.mla_pitch * g.mla_pitch);
}

struct ChirpOptions {
    std::size_t samples = 256;  // per axis over three zones
    int coarse_points = 41;
    double z_span = 0;          // 0: automatic
    double z_tolerance = 1e-3;  // in Rayleigh ranges of the spot
    double edge_taper = 0.1;
};

/// Array with the instantaneous column phases of a linear chirp.
inline ArrayField chirped_array(const RipaGeometry& g, const LossModel& l, double sweep_rate) {
    ArrayField arr = synthesize_array(Tone{}, g, l);
    const double t2 = tau_2(g);
    for (int i = 0; i < arr.n_x(); ++i) {
        const double tr = i * t2;
        arr.amplitudes.row(i) *= std::polar(1.0, -pi * sweep_rate * tr * tr);
    }
    return arr;
}

/// Axial position of the xz-plane waist during a linear chirp.
inline double chirp_defocus_numeric(const RipaGeometry& g, const LossModel& l, double sweep_rate,
                                    const ChirpOptions& opt = {}) {
    if (!std::isfinite(sweep_rate)) throw ArgumentError("sweep rate must be finite");
    // the chirp acts on columns only; one row leaves the slowly varying envelope along y
    RipaGeometry gx = g;
    gx.n_rows = 1;
    const ArrayField arr = chirped_array(gx, l, sweep_rate);
    const double bz = bz_extent(g);
    NumericFocalSpec spec;
    spec.out = GridSpec::centered(opt.samples, 3 * bz);
    spec.out.ny = 8;
    spec.out.dy = 3 * bz / 8;
    const FieldGrid focal = taper_edges(focal_field_numeric(arr, gx, spec), opt.edge_taper);
    const double ws = gaussian_equiv_waist(std::max(2, g.n_cols), bz);
    const double z_r = pi * ws * ws / g.wavelength;
    const double span = opt.z_span > 0 ? opt.z_span
                                        : std::max(3.0 * std::abs(chirp_defocus_analytic(g, sweep_rate)), 2.0 * z_r);
    // waist in the xz plane: peak of the y-projected intensity
    auto peak = [&](double z) {
        const auto f = propagate_axial(focal, z, g.wavelength);
        std::vector<double> proj(f.nx, 0.0);
        for (std::size_t iy = 0; iy < f.ny; ++iy)
            for (std::size_t ix = 0; ix < f.nx; ++ix) proj[ix] += std::norm(f(ix, iy));
        const auto k = static_cast<std::size_t>(std::max_element(proj.begin(), proj.end()) - proj.begin());
        if (k == 0 || k + 1 == proj.size()) return proj[k];
        // sub-sample vertex value
        const double a = proj[k - 1], b = proj[k], c = proj[k + 1];
        const double den = a - 2 * b + c;
        return den < 0 ? b - (a - c) * (a - c) / (8 * den) : b;
    };
    const int n = std::max(5, opt.coarse_points | 1);
    const double h = 2 * span / (n - 1);
    int best = 0;
    double best_v = -1;
    for (int k = 0; k < n; ++k) {
        const double v = peak(-span + k * h);
        if (v > best_v) best_v = v, best = k;
    }
    // golden-section refinement inside the bracketing cells
    double a = -span + std::max(0, best - 1) * h, b = -span + std::min(n - 1, best + 1) * h;
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = peak(c), fd = peak(d);
    while (b - a > opt.z_tolerance * z_r) {
        if (fc > fd) {
            b = d, d = c, fd = fc;
            c = b - phi * (b - a), fc = peak(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + phi * (b - a), fd = peak(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace ripa
