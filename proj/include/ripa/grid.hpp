// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "ripa/errors.hpp"

namespace ripa {

using cplx = std::complex<double>;

/// Regularly sampled 2D plane. Row-major, y is the slow index.
template <class T>
struct Grid2D {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double dx = 0;
    double dy = 0;
    double x0 = 0;  // position of sample (0, 0)
    double y0 = 0;
    double plane_z = 0;
    std::vector<T> samples;

    Grid2D() = default;
    Grid2D(std::size_t nx_, std::size_t ny_, double dx_, double dy_, double x0_, double y0_, double z = 0)
        : nx(nx_), ny(ny_), dx(dx_), dy(dy_), x0(x0_), y0(y0_), plane_z(z), samples(nx_ * ny_) {
        if (nx < 2 || ny < 2) throw ArgumentError("grid needs at least 2 samples per axis");
        if (!(dx > 0) || !(dy > 0)) throw ArgumentError("grid spacing must be positive");
    }

    T& operator()(std::size_t ix, std::size_t iy) { return samples[iy * nx + ix]; }
    const T& operator()(std::size_t ix, std::size_t iy) const { return samples[iy * nx + ix]; }
    double x(std::size_t ix) const { return x0 + dx * static_cast<double>(ix); }
    double y(std::size_t iy) const { return y0 + dy * static_cast<double>(iy); }

    template <class U>
    Grid2D<U> same_shape() const {
        return Grid2D<U>(nx, ny, dx, dy, x0, y0, plane_z);
    }
};

using FieldGrid = Grid2D<cplx>;
using IntensityGrid = Grid2D<double>;

/// Sampling layout of a plane centered on (cx, cy).
struct GridSpec {
    std::size_t nx = 1024;
    std::size_t ny = 1024;
    double dx = 0;
    double dy = 0;
    double cx = 0;
    double cy = 0;

    static GridSpec centered(std::size_t n, double extent, double cx = 0, double cy = 0) {
        return {n, n, extent / static_cast<double>(n), extent / static_cast<double>(n), cx, cy};
    }

    template <class T>
    Grid2D<T> make(double z = 0) const {
        return Grid2D<T>(nx, ny, dx, dy, cx - 0.5 * dx * static_cast<double>(nx - 1),
                         cy - 0.5 * dy * static_cast<double>(ny - 1), z);
    }
};

inline IntensityGrid intensity(const FieldGrid& f) {
    auto out = f.same_shape<double>();
    for (std::size_t k = 0; k < f.samples.size(); ++k) out.samples[k] = std::norm(f.samples[k]);
    return out;
}

inline double energy(const FieldGrid& f) {
    double s = 0;
    for (const auto& v : f.samples) s += std::norm(v);
    return s * f.dx * f.dy;
}

}  // namespace ripa
