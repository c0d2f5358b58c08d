// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ripa/errors.hpp"
#include "ripa/grid.hpp"

namespace ripa::io {

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4) out[static_cast<std::size_t>(k)] = digits[v & 0xf];
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
        : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot write '" + path.string() + "'");
        bool first = true;
        for (auto h : header) {
            if (!first) out_ << ',';
            out_ << h;
            first = false;
        }
        out_ << '\n';
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((emit(cells, first)), ...);
        out_ << '\n';
    }

private:
    void emit(double v, bool& first) { sep(first), out_ << format_double(v); }
    void emit(int v, bool& first) { sep(first), out_ << v; }
    void emit(long v, bool& first) { sep(first), out_ << v; }
    void emit(std::size_t v, bool& first) { sep(first), out_ << v; }
    void emit(bool v, bool& first) { sep(first), out_ << (v ? 1 : 0); }
    void emit(const std::string& v, bool& first) { sep(first), out_ << v; }
    void emit(const char* v, bool& first) { sep(first), out_ << v; }
    void sep(bool& first) {
        if (!first) out_ << ',';
        first = false;
    }
    std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

/// 16-bit binary PGM, big-endian, normalized to the grid maximum.
inline void write_pgm16(const std::filesystem::path& path, const IntensityGrid& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "P5\n" << g.nx << ' ' << g.ny << "\n65535\n";
    const double peak = *std::max_element(g.samples.begin(), g.samples.end());
    const double scale = peak > 0 ? 65535.0 / peak : 0.0;
    std::vector<char> bytes(g.samples.size() * 2);
    for (std::size_t k = 0; k < g.samples.size(); ++k) {
        const double v = std::clamp(g.samples[k] * scale, 0.0, 65535.0);
        const auto q = static_cast<std::uint16_t>(v + 0.5);
        bytes[2 * k] = static_cast<char>(q >> 8);
        bytes[2 * k + 1] = static_cast<char>(q & 0xff);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline nlohmann::json grid_sidecar(const IntensityGrid& g) {
    const double peak = *std::max_element(g.samples.begin(), g.samples.end());
    return {{"nx", g.nx},  {"ny", g.ny},           {"dx", g.dx},  {"dy", g.dy},
            {"origin", {g.x0, g.y0}}, {"z", g.plane_z}, {"peak", peak}};
}

inline void export_grid(const std::filesystem::path& stem, const IntensityGrid& g) {
    write_pgm16(stem.string() + ".pgm", g);
    write_json(stem.string() + ".json", grid_sidecar(g));
}

}  // namespace ripa::io
