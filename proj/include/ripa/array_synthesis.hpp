// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ripa/config.hpp"
#include "ripa/errors.hpp"

namespace ripa {

struct Tone {
    double detuning = 0;   // Hz, relative to the phase anchor
    double amplitude = 1;  // field amplitude
    double phase = 0;      // rad
};

using ToneSet = std::vector<Tone>;

/// Complex beam amplitudes a(i, j), i along x (slow), j along y (fast).
struct ArrayField {
    Eigen::MatrixXcd amplitudes;
    double pitch = 0;
    double mode_waist = 0;
    int hg_x = 0;  // Hermite-Gaussian order of every beam
    int hg_y = 0;

    int n_x() const { return static_cast<int>(amplitudes.rows()); }
    int n_y() const { return static_cast<int>(amplitudes.cols()); }
};

struct PhasePair {
    double x = 0;
    double y = 0;
};

/// Wraps into [-pi, pi).
inline double wrap_phase(double phi) { return phi - 2 * pi * std::floor((phi + pi) / (2 * pi)); }

inline PhasePair phase_pair(double detuning, const RipaGeometry& g) {
    return {wrap_phase(2 * pi * g.roundtrip_2 * detuning / speed_of_light),
            wrap_phase(2 * pi * g.roundtrip_1 * detuning / speed_of_light)};
}

/// Focal-plane position addressed by a detuning (first zone).
inline std::pair<double, double> spot_position(double detuning, const RipaGeometry& g) {
    const auto ph = phase_pair(detuning, g);
    const double bz = bz_extent(g);
    return {bz * ph.x / (2 * pi), bz * ph.y / (2 * pi)};
}

/// Per-beam field survival after i slow and j fast round trips.
inline double beam_weight(int i, int j, const LossModel& l) {
    return std::pow(1.0 - l.stage2_total(), 0.5 * i) * std::pow(1.0 - l.stage1_total(), 0.5 * j);
}

inline ArrayField synthesize_array(const Tone& tone, const RipaGeometry& g, const LossModel& l) {
    require_valid(g, l);
    const auto ph = phase_pair(tone.detuning, g);
    ArrayField arr;
    arr.pitch = g.mla_pitch;
    arr.mode_waist = mode_waist(g);
    arr.amplitudes.resize(g.n_cols, g.n_rows);
    const std::complex<double> base = std::polar(tone.amplitude, tone.phase);
    for (int i = 0; i < g.n_cols; ++i)
        for (int j = 0; j < g.n_rows; ++j)
            arr.amplitudes(i, j) = base * beam_weight(i, j, l) * std::polar(1.0, i * ph.x + j * ph.y);
    return arr;
}

/// Normalized |A|^2 weights of mutually incoherent tones.
inline std::vector<double> static_intensity_weights(const ToneSet& tones) {
    if (tones.empty()) throw ArgumentError("static_intensity_weights: empty tone set");
    for (std::size_t a = 0; a < tones.size(); ++a)
        for (std::size_t b = a + 1; b < tones.size(); ++b)
            if (tones[a].detuning == tones[b].detuning)
                throw ArgumentError("static_intensity_weights: duplicate detuning " +
                                    std::to_string(tones[a].detuning) + " Hz; merge coherent tones first");
    double total = 0;
    for (const auto& t : tones) {
        if (t.amplitude < 0) throw ArgumentError("tone amplitude must be >= 0");
        total += t.amplitude * t.amplitude;
    }
    if (total <= 0) throw ArgumentError("static_intensity_weights: all amplitudes are zero");
    std::vector<double> w;
    for (const auto& t : tones) w.push_back(t.amplitude * t.amplitude / total);
    return w;
}

inline nlohmann::json to_json(const ToneSet& tones) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : tones)
        arr.push_back({{"detuning_hz", t.detuning}, {"amplitude", t.amplitude}, {"phase_rad", t.phase}});
    return arr;
}

inline ToneSet tones_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw ValidationError("tone set must be a JSON array");
    ToneSet out;
    for (const auto& item : doc) {
        if (!item.is_object()) throw ValidationError("tone entries must be objects");
        for (auto it = item.begin(); it != item.end(); ++it)
            if (it.key() != "detuning_hz" && it.key() != "amplitude" && it.key() != "phase_rad")
                throw ValidationError("unknown tone key '" + it.key() + "'");
        Tone t;
        t.detuning = item.value("detuning_hz", 0.0);
        t.amplitude = item.value("amplitude", 1.0);
        t.phase = item.value("phase_rad", 0.0);
        if (t.amplitude < 0) throw ValidationError("tone amplitude must be >= 0");
        out.push_back(t);
    }
    return out;
}

}  // namespace ripa
