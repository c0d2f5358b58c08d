// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ripa/array_synthesis.hpp"
#include "ripa/config.hpp"
#include "ripa/errors.hpp"
#include "ripa/grid.hpp"

namespace ripa {

// ---------------------------------------------------------------- RF and sidebands

struct RfWaveform {
    double sample_rate = 0;
    std::vector<double> samples;
    ToneSet tones;
};

/// V(t) = (1 / sum A) sum A cos(2 pi (offset + nu) t + phi); tone detunings are RF frequencies here.
inline RfWaveform rf_waveform(const ToneSet& tones, double rate, double duration, double rf_offset = 0) {
    if (tones.empty()) throw ArgumentError("rf_waveform: empty tone set");
    double sum_a = 0, f_max = 0;
    for (const auto& t : tones) {
        sum_a += t.amplitude;
        f_max = std::max(f_max, std::abs(rf_offset + t.detuning));
    }
    if (!(sum_a > 0)) throw ArgumentError("rf_waveform: amplitudes sum to zero");
    if (!(rate > 2 * f_max)) throw SamplingError("rf_waveform: sample rate violates Nyquist");
    RfWaveform w;
    w.sample_rate = rate;
    w.tones = tones;
    const auto n = static_cast<std::size_t>(std::llround(duration * rate));
    w.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / rate;
        double v = 0;
        for (const auto& tone : tones)
            v += tone.amplitude * std::cos(2 * pi * (rf_offset + tone.detuning) * t + tone.phase);
        w.samples[k] = v / sum_a;
    }
    return w;
}

struct SidebandLine {
    double offset = 0;  // Hz from the optical carrier
    cplx amplitude;
};

struct SidebandSpectrum {
    std::vector<SidebandLine> lines;

    double total_power() const {
        double s = 0;
        for (const auto& l : lines) s += std::norm(l.amplitude);
        return s;
    }
    const SidebandLine* find(double offset, double tol = 1e-3) const {
        for (const auto& l : lines)
            if (std::abs(l.offset - offset) <= tol) return &l;
        return nullptr;
    }
};

namespace detail {

inline void add_line(std::vector<SidebandLine>& lines, double offset, cplx amp) {
    for (auto& l : lines)
        if (std::abs(l.offset - offset) < 1e-6) {
            l.amplitude += amp;
            return;
        }
    lines.push_back({offset, amp});
}

inline void sort_lines(std::vector<SidebandLine>& lines) {
    std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
}

}  // namespace detail

/// Phase-modulation sidebands. Tone amplitudes scale the index: phi(t) = beta sum A cos(...).
inline SidebandSpectrum eom_spectrum(const ToneSet& tones, double beta, double rf_offset = 0) {
    if (!(beta >= 0)) throw ArgumentError("eom_spectrum: beta must be >= 0");
    SidebandSpectrum s;
    if (tones.empty() || beta == 0) {
        s.lines.push_back({0, 1});
        return s;
    }
    if (tones.size() == 1) {
        const auto& t = tones.front();
        const double m = beta * t.amplitude, nu = rf_offset + t.detuning;
        const int n_max = static_cast<int>(std::ceil(m)) + 20;
        for (int n = -n_max; n <= n_max; ++n) {
            const double jn = std::cyl_bessel_j(std::abs(n), m) * ((n < 0 && (n & 1)) ? -1.0 : 1.0);
            if (std::abs(jn) < 1e-17) continue;
            // e^{i m cos(theta)} = sum i^n J_n(m) e^{i n theta}
            const cplx in = std::pow(cplx(0, 1), n);
            detail::add_line(s.lines, n * nu, jn * in * std::polar(1.0, n * t.phase));
        }
        detail::sort_lines(s.lines);
        return s;
    }
    double sum_a = 0;
    for (const auto& t : tones) sum_a += t.amplitude;
    if (!(beta * sum_a < 0.5))
        throw ModelValidityError("eom_spectrum: first-order expansion needs beta * sum(A) < 0.5");
    double side_power = 0;
    for (const auto& t : tones) {
        const double a = 0.5 * beta * t.amplitude;
        const double nu = rf_offset + t.detuning;
        detail::add_line(s.lines, nu, cplx(0, a) * std::polar(1.0, t.phase));
        detail::add_line(s.lines, -nu, cplx(0, a) * std::polar(1.0, -t.phase));
        side_power += 2 * a * a;
    }
    // carrier carries the remaining power so the passive bound holds exactly
    detail::add_line(s.lines, 0, std::sqrt(std::max(0.0, 1 - side_power)));
    detail::sort_lines(s.lines);
    return s;
}

/// Second-order flat-top amplitude response centered on `center`.
inline double filter_response(double offset, double center, double bandwidth) {
    const double u = (offset - center) / (0.5 * bandwidth);
    return 1.0 / std::sqrt(1.0 + u * u * u * u);
}

inline SidebandSpectrum filter_apply(const SidebandSpectrum& spec, double center, double bandwidth) {
    if (!(bandwidth > 0)) throw ArgumentError("filter_apply: bandwidth must be positive");
    SidebandSpectrum out = spec;
    for (auto& l : out.lines) l.amplitude *= filter_response(l.offset, center, bandwidth);
    return out;
}

/// Lines of the +1 band as drive tones, detuning measured from `rf_offset + anchor`.
inline ToneSet sidebands_to_tones(const SidebandSpectrum& spec, double rf_offset, double anchor = 0,
                                  double rel_floor = 1e-6) {
    double strongest = 0;
    for (const auto& l : spec.lines)
        if (l.offset > 0) strongest = std::max(strongest, std::abs(l.amplitude));
    ToneSet out;
    for (const auto& l : spec.lines)
        if (l.offset > 0 && std::abs(l.amplitude) > rel_floor * strongest)
            out.push_back({l.offset - rf_offset - anchor, std::abs(l.amplitude), std::arg(l.amplitude)});
    return out;
}

// ---------------------------------------------------------------- tone compilation

enum class GridVariant { quasi_square, orthogonal };

inline ToneSet tones_for_grid(int n, const RipaGeometry& g, GridVariant variant = GridVariant::quasi_square,
                              double amplitude = 1) {
    if (n < 1) throw ArgumentError("tones_for_grid: n must be >= 1");
    const double fsr1 = speed_of_light / g.roundtrip_1, fsr2 = speed_of_light / g.roundtrip_2;
    const double r = g.roundtrip_2 / g.roundtrip_1;
    ToneSet out;
    double nu_max = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double frac = static_cast<double>(j) / n;
            const double nu = variant == GridVariant::quasi_square ? (2.0 * i + frac) * fsr2
                                                                   : (i + frac) / (1 + 1 / (r * r)) * fsr2;
            nu_max = std::max(nu_max, nu);
            out.push_back({nu, amplitude, 0});
        }
    if (!(nu_max < fsr1)) throw RangeError("tones_for_grid: " + std::to_string(n * n) + " spots overflow one FSR1");
    return out;
}

/// Ideal lattice of the quasi-square grid: spacings and the angle between its axes.
struct GridLattice {
    double d_x = 0;
    double d_y = 0;
    double angle = 0;
};

inline GridLattice quasi_square_lattice(int n, const RipaGeometry& g) {
    const double bz = bz_extent(g), r = g.roundtrip_2 / g.roundtrip_1;
    return {bz / n, 2 * bz / r, pi / 2 - std::atan(1 / r)};
}

struct SpotCompileOptions {
    bool channelized = false;
};

struct SpotCompileResult {
    ToneSet tones;
    std::vector<std::pair<double, double>> placed;
    std::vector<double> placement_error;
};

namespace detail {

inline double wrap_position(double v, double bz) { return v - bz * std::floor(v / bz + 0.5); }

}  // namespace detail

/// Inverse map: for each target the detuning whose forward position lands nearest.
inline SpotCompileResult tones_for_spots(const std::vector<std::pair<double, double>>& targets, const RipaGeometry& g,
                                         const SpotCompileOptions& opt = {}) {
    require_valid(g);
    const double bz = bz_extent(g);
    const double fsr1 = speed_of_light / g.roundtrip_1, fsr2 = speed_of_light / g.roundtrip_2;
    const double f_res = fsr2 / g.n_cols;
    auto distance = [&](double ax, double ay, double bx, double by) {
        return std::hypot(detail::wrap_position(ax - bx, bz), detail::wrap_position(ay - by, bz));
    };
    SpotCompileResult res;
    std::vector<long> channel;
    for (const auto& [tx_raw, ty_raw] : targets) {
        if (std::abs(tx_raw) > 0.5 * bz || std::abs(ty_raw) > 0.5 * bz)
            throw RangeError("tones_for_spots: target outside the first zone");
        const double tx = detail::wrap_position(tx_raw, bz), ty = detail::wrap_position(ty_raw, bz);
        double best_nu = 0, best_err = 1e300;
        auto consider = [&](double nu) {
            const auto [px, py] = spot_position(nu, g);
            const double e = distance(px, py, tx, ty);
            if (e < best_err - 1e-15 || (std::abs(e - best_err) <= 1e-15 && std::abs(nu) < std::abs(best_nu)))
                best_err = e, best_nu = nu;
        };
        if (opt.channelized) {
            const long n_lo = static_cast<long>(std::ceil(-0.5 * fsr1 / f_res));
            const long n_hi = static_cast<long>(std::floor(0.5 * fsr1 / f_res));
            for (long n = n_lo; n <= n_hi; ++n) consider(n * f_res);
        } else {
            const long m_lim = static_cast<long>(std::ceil(0.5 * fsr1 / fsr2)) + 1;
            for (long m = -m_lim; m <= m_lim; ++m) {
                const double nu = fsr2 * (tx / bz + static_cast<double>(m));
                if (std::abs(nu) <= 0.5 * fsr1) consider(nu);
            }
        }
        const auto placed = spot_position(best_nu, g);
        const long ch = std::lround(best_nu / f_res);
        for (std::size_t k = 0; k < channel.size(); ++k)
            if (channel[k] == ch)
                throw CollisionError("tones_for_spots: targets " + std::to_string(k) + " and " +
                                         std::to_string(channel.size()) + " map to the same channel",
                                     k, channel.size());
        channel.push_back(ch);
        res.tones.push_back({best_nu, 1, 0});
        res.placed.push_back(placed);
        res.placement_error.push_back(best_err);
    }
    return res;
}

/// Divides each amplitude by the field envelope at its spot so focal peaks equalize.
inline ToneSet compensate_envelope(const ToneSet& tones, const RipaGeometry& g) {
    const double we = envelope_waist(g);
    ToneSet out = tones;
    for (auto& t : out) {
        const auto [x, y] = spot_position(t.detuning, g);
        const double env = std::exp(-2 * (x * x + y * y) / (we * we));
        if (env < 1e-3) throw RangeError("compensate_envelope: spot where the envelope is below 1e-3");
        t.amplitude /= std::sqrt(env);
    }
    return out;
}

// ---------------------------------------------------------------- calibration table

/// Measured drive response power_rel(freq, amp_code) with bilinear interpolation.
class CalibrationTable {
public:
    CalibrationTable() = default;

    static CalibrationTable from_csv(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) throw ValidationError("calibration table is empty");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "freq_hz,amp_code,power_rel")
            throw ValidationError("calibration table header must be freq_hz,amp_code,power_rel");
        std::map<std::pair<double, double>, double> cells;
        std::vector<double> fs, cs;
        int row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string a, b, c;
            if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
                throw ValidationError("calibration table row " + std::to_string(row) + " is malformed");
            try {
                const double f = std::stod(a), code = std::stod(b), p = std::stod(c);
                cells[{f, code}] = p;
                fs.push_back(f);
                cs.push_back(code);
            } catch (const std::exception&) {
                throw ValidationError("calibration table row " + std::to_string(row) + " is not numeric");
            }
        }
        auto uniq = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            return v;
        };
        CalibrationTable t;
        t.freqs_ = uniq(fs);
        t.codes_ = uniq(cs);
        if (t.freqs_.size() < 2 || t.codes_.size() < 2)
            throw ValidationError("calibration table needs at least 2 frequencies and 2 codes");
        t.power_.resize(t.freqs_.size() * t.codes_.size());
        for (std::size_t a = 0; a < t.freqs_.size(); ++a)
            for (std::size_t b = 0; b < t.codes_.size(); ++b) {
                auto it = cells.find({t.freqs_[a], t.codes_[b]});
                if (it == cells.end()) throw ValidationError("calibration table is not a full grid");
                t.power_[a * t.codes_.size() + b] = it->second;
            }
        return t;
    }

    static CalibrationTable from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot open calibration table '" + path + "'");
        return from_csv(in);
    }

    bool empty() const { return freqs_.empty(); }

    /// Relative power for a drive code; identity when no table is loaded.
    double power(double freq, double code, std::vector<std::string>* warnings = nullptr) const {
        if (empty()) return code;
        const auto [ia, ta] = locate(freqs_, freq, "frequency", warnings);
        const auto [ib, tb] = locate(codes_, code, "amplitude code", warnings);
        auto at = [&](std::size_t a, std::size_t b) { return power_[a * codes_.size() + b]; };
        const double lo = at(ia, ib) * (1 - tb) + at(ia, ib + 1) * tb;
        const double hi = at(ia + 1, ib) * (1 - tb) + at(ia + 1, ib + 1) * tb;
        return lo * (1 - ta) + hi * ta;
    }

    /// Drive code producing `target` power at `freq` (response assumed monotone in code).
    double code_for_power(double freq, double target, std::vector<std::string>* warnings = nullptr) const {
        if (empty()) return target;
        double lo = codes_.front(), hi = codes_.back();
        const double p_lo = power(freq, lo, warnings), p_hi = power(freq, hi, warnings);
        if (target <= p_lo) {
            if (warnings && target < p_lo) warnings->push_back("requested power below table range, clamped");
            return lo;
        }
        if (target >= p_hi) {
            if (warnings && target > p_hi) warnings->push_back("requested power above table range, clamped");
            return hi;
        }
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (power(freq, mid) < target ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double v, const char* what,
                                                 std::vector<std::string>* warnings) {
        if (v < axis.front() || v > axis.back()) {
            if (warnings) warnings->push_back(std::string(what) + " outside calibration table, clamped");
            v = std::clamp(v, axis.front(), axis.back());
        }
        auto it = std::upper_bound(axis.begin(), axis.end(), v);
        std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - axis.begin())) - 1;
        k = std::min(k, axis.size() - 2);
        return {k, (v - axis[k]) / (axis[k + 1] - axis[k])};
    }

    std::vector<double> freqs_, codes_, power_;
};

}  // namespace ripa
