// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "ripa/config.hpp"

namespace ripa {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ValidationError("unknown key '" + where + "." + it.key() + "'");
}

template <class T>
void read_field(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("bad value type for '" + where + "." + key + "'");
    }
}

}  // namespace detail

inline json to_json(const RipaGeometry& g) {
    json j{{"wavelength", g.wavelength},   {"mla_pitch", g.mla_pitch},
           {"mla_focal", g.mla_focal},     {"roundtrip_1", g.roundtrip_1},
           {"roundtrip_2", g.roundtrip_2}, {"n_rows", g.n_rows},
           {"n_cols", g.n_cols},           {"focus_focal", g.focus_focal},
           {"half_confocal", g.half_confocal},
           {"half_confocal_tolerance", g.half_confocal_tolerance}};
    j["mode_waist"] = g.mode_waist_override ? json(*g.mode_waist_override) : json(nullptr);
    return j;
}

inline json to_json(const LossModel& l) {
    return {{"kappa_1", l.kappa_1}, {"loss_1", l.loss_1},         {"kappa_2", l.kappa_2},
            {"loss_2", l.loss_2},   {"kappa_lock", l.kappa_lock}, {"relay_eff", l.relay_eff},
            {"imaging_eff", l.imaging_eff}};
}

inline json to_json(const DriveSettings& d) {
    return {{"anchor_hz", d.anchor_hz},
            {"beta", d.beta},
            {"rf_offset_hz", d.rf_offset_hz},
            {"filter_bandwidth_hz", d.filter_bandwidth_hz},
            {"pd_bandwidth_hz", d.pd_bandwidth_hz},
            {"pd_order", d.pd_order}};
}

inline json to_json(const Config& c) {
    return {{"geometry", to_json(c.geometry)}, {"loss", to_json(c.loss)}, {"drive", to_json(c.drive)}};
}

inline json to_json(const DerivedQuantities& q) {
    return {{"fsr_1", q.fsr_1},           {"fsr_2", q.fsr_2},
            {"f_res", q.f_res},           {"bz_extent", q.bz_extent},
            {"mode_waist", q.mode_waist}, {"spot_waist", q.spot_waist},
            {"envelope_waist", q.envelope_waist}, {"zone_count", q.zone_count},
            {"length_ratio", q.length_ratio}};
}

/// Parses a config document; unknown keys and wrong types are rejected.
inline Config config_from_json(const json& doc) {
    detail::reject_unknown(doc, {"geometry", "loss", "drive"}, "config");
    Config c;
    if (doc.contains("geometry")) {
        const json& g = doc.at("geometry");
        detail::reject_unknown(g,
                               {"wavelength", "mla_pitch", "mla_focal", "roundtrip_1", "roundtrip_2",
                                "n_rows", "n_cols", "focus_focal", "mode_waist", "half_confocal",
                                "half_confocal_tolerance"},
                               "geometry");
        auto& G = c.geometry;
        detail::read_field(g, "wavelength", G.wavelength, "geometry");
        detail::read_field(g, "mla_pitch", G.mla_pitch, "geometry");
        detail::read_field(g, "mla_focal", G.mla_focal, "geometry");
        detail::read_field(g, "roundtrip_1", G.roundtrip_1, "geometry");
        detail::read_field(g, "roundtrip_2", G.roundtrip_2, "geometry");
        detail::read_field(g, "n_rows", G.n_rows, "geometry");
        detail::read_field(g, "n_cols", G.n_cols, "geometry");
        detail::read_field(g, "focus_focal", G.focus_focal, "geometry");
        detail::read_field(g, "half_confocal", G.half_confocal, "geometry");
        detail::read_field(g, "half_confocal_tolerance", G.half_confocal_tolerance, "geometry");
        if (g.contains("mode_waist") && !g.at("mode_waist").is_null()) {
            double w = 0;
            detail::read_field(g, "mode_waist", w, "geometry");
            G.mode_waist_override = w;
        }
    }
    if (doc.contains("loss")) {
        const json& l = doc.at("loss");
        detail::reject_unknown(l,
                               {"kappa_1", "loss_1", "kappa_2", "loss_2", "kappa_lock", "relay_eff",
                                "imaging_eff"},
                               "loss");
        auto& L = c.loss;
        detail::read_field(l, "kappa_1", L.kappa_1, "loss");
        detail::read_field(l, "loss_1", L.loss_1, "loss");
        detail::read_field(l, "kappa_2", L.kappa_2, "loss");
        detail::read_field(l, "loss_2", L.loss_2, "loss");
        detail::read_field(l, "kappa_lock", L.kappa_lock, "loss");
        detail::read_field(l, "relay_eff", L.relay_eff, "loss");
        detail::read_field(l, "imaging_eff", L.imaging_eff, "loss");
    }
    if (doc.contains("drive")) {
        const json& d = doc.at("drive");
        detail::reject_unknown(d,
                               {"anchor_hz", "beta", "rf_offset_hz", "filter_bandwidth_hz",
                                "pd_bandwidth_hz", "pd_order"},
                               "drive");
        auto& D = c.drive;
        detail::read_field(d, "anchor_hz", D.anchor_hz, "drive");
        detail::read_field(d, "beta", D.beta, "drive");
        detail::read_field(d, "rf_offset_hz", D.rf_offset_hz, "drive");
        detail::read_field(d, "filter_bandwidth_hz", D.filter_bandwidth_hz, "drive");
        detail::read_field(d, "pd_bandwidth_hz", D.pd_bandwidth_hz, "drive");
        detail::read_field(d, "pd_order", D.pd_order, "drive");
    }
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in '" + path + "': " + e.what());
    }
}

inline Config load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

/// Applies `a.b.c=value`; the value is parsed as JSON when possible, else kept as a string.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override must be key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ValidationError("empty key in override: " + assignment);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

}  // namespace ripa
