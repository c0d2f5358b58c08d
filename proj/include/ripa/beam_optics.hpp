// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "ripa/config.hpp"
#include "ripa/errors.hpp"

namespace ripa {

struct RayMatrix {
    double a = 1, b = 0, c = 0, d = 1;

    double det() const { return a * d - b * c; }
    double half_trace() const { return 0.5 * (a + d); }

    /// this * rhs (rhs acts first)
    RayMatrix operator*(const RayMatrix& r) const {
        return {a * r.a + b * r.c, a * r.b + b * r.d, c * r.a + d * r.c, c * r.b + d * r.d};
    }

    static RayMatrix identity() { return {}; }
};

inline RayMatrix free_space(double length) { return {1, length, 0, 1}; }
inline RayMatrix thin_lens(double focal) { return {1, 0, -1.0 / focal, 1}; }

/// Product of the elements; the first element acts first.
inline RayMatrix compose(const std::vector<RayMatrix>& elements) {
    if (elements.empty()) throw ArgumentError("compose: element list is empty");
    RayMatrix m = elements.front();
    for (std::size_t k = 1; k < elements.size(); ++k) m = elements[k] * m;
    return m;
}

/// One lens-guide period: half the round trip, the lens, the other half.
inline RayMatrix lens_guide_roundtrip(double l_rt, double focal) {
    return compose({free_space(0.5 * l_rt), thin_lens(focal), free_space(0.5 * l_rt)});
}

struct GaussianBeamParam {
    std::complex<double> q;
    double wavelength = 780e-9;

    double rayleigh_range() const { return q.imag(); }
    double waist() const { return std::sqrt(wavelength * q.imag() / pi); }
};

inline GaussianBeamParam propagate(const GaussianBeamParam& p, const RayMatrix& m) {
    return {(m.a * p.q + m.b) / (m.c * p.q + m.d), p.wavelength};
}

/// Self-consistent q of a periodic system.
inline GaussianBeamParam eigen_q(const RayMatrix& m, double wavelength) {
    const double ht = m.half_trace();
    if (!(std::abs(ht) < 1.0) || m.c == 0.0)
        throw StabilityError("ray matrix is not stable: |A+D|/2 = " + std::to_string(std::abs(ht)), ht);
    const double re = (m.a - m.d) / (2.0 * m.c);
    const double im = std::sqrt(1.0 - ht * ht) / std::abs(m.c);
    return {{re, im}, wavelength};
}

inline double gouy_roundtrip(const GaussianBeamParam& q, double l_rt) {
    return 2.0 * std::atan(0.5 * l_rt / q.q.imag());
}

inline double clipping_loss(double w0, double pupil_d) {
    const double r = 0.5 * pupil_d;
    const double w = std::sqrt(2.0) * w0;
    return std::exp(-2.0 * r * r / (w * w));
}

struct HgSuppressionStats {
    double s_min = 0;
    double s_max = 0;
    double s_mean = 0;
    std::vector<double> values;
};

struct HgSampling {
    int integration_samples = 4096;  // per axis, over one zone
    double gouy_roundtrip = pi / 2;
    bool odd_in_y = true;            // (0,1) leakage; false selects (1,0)
};

/// Cell-centered n x n positions over the first zone.
inline std::vector<std::pair<double, double>> zone_sample_grid(double bz, int n = 11) {
    std::vector<std::pair<double, double>> out;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            out.emplace_back((a - 0.5 * (n - 1)) * bz / n, (b - 0.5 * (n - 1)) * bz / n);
    return out;
}

namespace detail {

/// Lossless grating factor sin^2(n pi u)/sin^2(pi u) with its removable limit.
inline double grating(int n, double u) {
    const double s = std::sin(pi * u);
    if (std::abs(s) < 1e-12) return static_cast<double>(n) * n;
    const double t = std::sin(n * pi * u);
    return t * t / (s * s);
}

/// Focal-plane amplitude envelope of a Hermite-Gaussian order 0 or 1 (intensity ratio 4x^2/w^2).
inline double hg_envelope_intensity(int order, double x, double w_env) {
    const double g = std::exp(-2.0 * x * x / (w_env * w_env));
    return order == 0 ? g : 4.0 * x * x / (w_env * w_env) * g;
}

}  // namespace detail

/// Intensity of an array of HG(l, m) beams sharing the phase ramp (phi_x, phi_y) plus the Gouy ramp.
inline double hg_array_intensity(const RipaGeometry& g, int l, int m, double phi_x, double phi_y,
                                 double gouy_rt, double x, double y) {
    if (l < 0 || l > 1 || m < 0 || m > 1) throw ArgumentError("hg_array_intensity: orders 0 or 1 only");
    const double bz = bz_extent(g), we = envelope_waist(g);
    const double extra = (l + m) * gouy_rt;
    const double ux = (x - bz * (phi_x + extra) / (2 * pi)) / bz;
    const double uy = (y - bz * (phi_y + extra) / (2 * pi)) / bz;
    return detail::hg_envelope_intensity(l, x, we) * detail::hg_envelope_intensity(m, y, we) *
           detail::grating(g.n_cols, ux) * detail::grating(g.n_rows, uy);
}

/// Ratio of zone-integrated fundamental to odd-mode power per addressed position.
inline HgSuppressionStats hg_suppression(const RipaGeometry& g, const HgSampling& sampling,
                                         const std::vector<std::pair<double, double>>& positions) {
    if (positions.empty()) throw ArgumentError("hg_suppression: empty sample set");
    if (sampling.integration_samples < 16) throw ArgumentError("hg_suppression: too few integration samples");
    const double bz = bz_extent(g), we = envelope_waist(g);
    for (const auto& [x, y] : positions)
        if (std::abs(x) > 0.5 * bz || std::abs(y) > 0.5 * bz)
            throw ArgumentError("hg_suppression: position outside the first zone");
    const int M = sampling.integration_samples;
    std::vector<double> s(static_cast<std::size_t>(M)), e0(s.size()), e1(s.size());
    for (int k = 0; k < M; ++k) {
        s[k] = ((k + 0.5) / M - 0.5) * bz;
        e0[k] = detail::hg_envelope_intensity(0, s[k], we);
        e1[k] = detail::hg_envelope_intensity(1, s[k], we);
    }
    const double shift = bz * sampling.gouy_roundtrip / (2 * pi);
    // zone integral of an axis envelope times the grating centered at c
    auto axis = [&](const std::vector<double>& env, int n, double c) {
        double acc = 0;
        for (int k = 0; k < M; ++k) acc += env[k] * detail::grating(n, (s[k] - c) / bz);
        return acc;
    };
    HgSuppressionStats out;
    for (const auto& [x0, y0] : positions) {
        const double fund = axis(e0, g.n_cols, x0) * axis(e0, g.n_rows, y0);
        const double odd = sampling.odd_in_y
                               ? axis(e0, g.n_cols, x0 + shift) * axis(e1, g.n_rows, y0 + shift)
                               : axis(e1, g.n_cols, x0 + shift) * axis(e0, g.n_rows, y0 + shift);
        out.values.push_back(fund / odd);
    }
    out.s_min = *std::min_element(out.values.begin(), out.values.end());
    out.s_max = *std::max_element(out.values.begin(), out.values.end());
    double sum = 0;
    for (double v : out.values) sum += v;
    out.s_mean = sum / static_cast<double>(out.values.size());
    return out;
}

}  // namespace ripa
