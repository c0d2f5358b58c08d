// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ripa/errors.hpp"

namespace ripa {

inline constexpr double speed_of_light = 299792458.0;
inline constexpr double pi = std::numbers::pi;

/// Physical layout of a cascaded RIPA. SI units throughout.
struct RipaGeometry {
    double wavelength = 780e-9;
    double mla_pitch = 1e-3;      // p
    double mla_focal = 47e-3;     // f_MLA
    double roundtrip_1 = 0.094;   // L_rt,1 (fast axis, y)
    double roundtrip_2 = 2.31;    // L_rt,2 (slow axis, x)
    int n_rows = 9;               // N_y
    int n_cols = 8;               // N_x
    double focus_focal = 0.2;     // f
    std::optional<double> mode_waist_override;
    bool half_confocal = true;
    double half_confocal_tolerance = 0.01;
};

/// Per-round-trip loss fractions and downstream efficiencies.
struct LossModel {
    double kappa_1 = 0.029;
    double loss_1 = 0.022;
    double kappa_2 = 0.068;
    double loss_2 = 0.033;
    double kappa_lock = 0.097;
    double relay_eff = 0.706;
    double imaging_eff = 0.85;

    double stage1_total() const { return kappa_1 + loss_1; }
    double stage2_total() const { return kappa_lock + kappa_2 + loss_2; }

    static LossModel lossless() { return {0, 0, 0, 0, 0, 1, 1}; }
};

/// Settings of the electrical/optical tone chain and detector.
struct DriveSettings {
    double anchor_hz = 0.0;
    double beta = 0.3;
    double rf_offset_hz = 11e9;
    double filter_bandwidth_hz = 4e9;
    double pd_bandwidth_hz = 50e6;
    int pd_order = 1;
};

struct Config {
    RipaGeometry geometry;
    LossModel loss;
    DriveSettings drive;
};

struct DerivedQuantities {
    double fsr_1 = 0;
    double fsr_2 = 0;
    double f_res = 0;
    double bz_extent = 0;
    double mode_waist = 0;
    double spot_waist = 0;
    double envelope_waist = 0;
    double zone_count = 0;
    double length_ratio = 0;
};

struct Diagnostic {
    std::string field;
    std::string rule;
    std::string message;
};

inline double mode_waist(const RipaGeometry& g) {
    if (g.mode_waist_override) return *g.mode_waist_override;
    return std::sqrt(g.mla_focal * g.wavelength / pi);
}

inline double bz_extent(const RipaGeometry& g) { return g.focus_focal * g.wavelength / g.mla_pitch; }

inline double envelope_waist(const RipaGeometry& g) {
    return g.wavelength * g.focus_focal / (pi * mode_waist(g));
}

inline double tau_1(const RipaGeometry& g) { return g.roundtrip_1 / speed_of_light; }
inline double tau_2(const RipaGeometry& g) { return g.roundtrip_2 / speed_of_light; }

/// 1/e^2 radius of the Gaussian that best matches an n-beam grating peak.
inline double gaussian_equiv_waist(int n, double bz) {
    if (n < 2) throw ArgumentError("gaussian_equiv_waist: n must be >= 2");
    const double nn = static_cast<double>(n);
    return bz * std::sqrt(6.0 / (pi * pi * (nn * nn - 1.0)));
}

inline std::vector<Diagnostic> validate_geometry(const RipaGeometry& g) {
    std::vector<Diagnostic> out;
    auto positive = [&](const char* name, double v) {
        if (!(v > 0) || !std::isfinite(v))
            out.push_back({name, "must be positive", std::string(name) + " must be a finite positive length"});
    };
    positive("wavelength", g.wavelength);
    positive("mla_pitch", g.mla_pitch);
    positive("mla_focal", g.mla_focal);
    positive("roundtrip_1", g.roundtrip_1);
    positive("roundtrip_2", g.roundtrip_2);
    positive("focus_focal", g.focus_focal);
    if (g.mode_waist_override) positive("mode_waist", *g.mode_waist_override);
    if (g.n_rows < 1) out.push_back({"n_rows", "count must be >= 1", "n_rows must be at least 1"});
    if (g.n_cols < 1) out.push_back({"n_cols", "count must be >= 1", "n_cols must be at least 1"});
    if (g.roundtrip_1 > 0 && g.roundtrip_2 > 0 && !(g.roundtrip_2 > g.roundtrip_1))
        out.push_back({"roundtrip_2", "separation of scales violated",
                       "roundtrip_2 must exceed roundtrip_1"});
    if (g.half_confocal && g.mla_focal > 0 && g.roundtrip_1 > 0) {
        const double rel = std::abs(g.roundtrip_1 - 2 * g.mla_focal) / (2 * g.mla_focal);
        if (rel >= g.half_confocal_tolerance)
            out.push_back({"roundtrip_1", "half-confocal mismatch",
                           "|roundtrip_1 - 2 mla_focal| exceeds the half-confocal tolerance"});
    }
    return out;
}

inline std::vector<Diagnostic> validate_loss(const LossModel& l) {
    std::vector<Diagnostic> out;
    auto fraction = [&](const char* name, double v) {
        if (!(v >= 0 && v < 1))
            out.push_back({name, "fraction out of range", std::string(name) + " must lie in [0, 1)"});
    };
    fraction("kappa_1", l.kappa_1);
    fraction("loss_1", l.loss_1);
    fraction("kappa_2", l.kappa_2);
    fraction("loss_2", l.loss_2);
    fraction("kappa_lock", l.kappa_lock);
    // efficiencies may reach 1 (ideal relay)
    auto efficiency = [&](const char* name, double v) {
        if (!(v >= 0 && v <= 1))
            out.push_back({name, "fraction out of range", std::string(name) + " must lie in [0, 1]"});
    };
    efficiency("relay_eff", l.relay_eff);
    efficiency("imaging_eff", l.imaging_eff);
    if (!(l.stage1_total() < 1))
        out.push_back({"loss_1", "stage loss total must be < 1", "kappa_1 + loss_1 must be below 1"});
    if (!(l.stage2_total() < 1))
        out.push_back({"loss_2", "stage loss total must be < 1",
                       "kappa_lock + kappa_2 + loss_2 must be below 1"});
    return out;
}

inline std::vector<Diagnostic> validate_config(const RipaGeometry& g, const LossModel& l) {
    auto out = validate_geometry(g);
    auto more = validate_loss(l);
    out.insert(out.end(), more.begin(), more.end());
    return out;
}

inline std::string describe(const std::vector<Diagnostic>& diags) {
    std::ostringstream os;
    for (std::size_t k = 0; k < diags.size(); ++k) {
        if (k) os << "; ";
        os << diags[k].field << ": " << diags[k].rule;
    }
    return os.str();
}

inline void require_valid(const RipaGeometry& g) {
    auto d = validate_geometry(g);
    if (!d.empty()) throw ValidationError("invalid geometry: " + describe(d));
}

inline void require_valid(const RipaGeometry& g, const LossModel& l) {
    auto d = validate_config(g, l);
    if (!d.empty()) throw ValidationError("invalid configuration: " + describe(d));
}

inline DerivedQuantities derive_quantities(const RipaGeometry& g) {
    require_valid(g);
    DerivedQuantities q;
    q.fsr_1 = speed_of_light / g.roundtrip_1;
    q.fsr_2 = speed_of_light / g.roundtrip_2;
    q.f_res = q.fsr_2 / g.n_cols;
    q.bz_extent = bz_extent(g);
    q.mode_waist = mode_waist(g);
    q.envelope_waist = envelope_waist(g);
    q.zone_count = q.envelope_waist / q.bz_extent;
    // a single row has no interference narrowing; fall back to the envelope
    q.spot_waist = g.n_rows >= 2 ? gaussian_equiv_waist(g.n_rows, q.bz_extent) : q.envelope_waist;
    q.length_ratio = g.roundtrip_2 / g.roundtrip_1;
    return q;
}

}  // namespace ripa
