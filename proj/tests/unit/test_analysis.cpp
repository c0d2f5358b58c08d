// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#include <catch_amalgamated.hpp>

#include "ripa/analysis.hpp"
#include "ripa/drive_compiler.hpp"

using namespace ripa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const RipaGeometry geom;

bool within_factor(double v, double target, double factor) { return v >= target / factor && v <= target * factor; }

RipaGeometry square_array(int n) {
    RipaGeometry g;
    g.n_cols = n;
    g.n_rows = n;
    return g;
}

LossModel uniform_loss(double a) {
    LossModel l = LossModel::lossless();
    l.kappa_1 = a;
    l.kappa_2 = a;
    return l;
}

}  // namespace

TEST_CASE("crosstalk metric") {
    const LossModel l;
    CHECK_THAT(crosstalk_at(geom, l, 1e-4), WithinAbs(1.0, 1e-6));
    CHECK(within_factor(crosstalk_at(geom, l, 6.1), 2.8e-3, 1.5));

    const auto g100 = square_array(100);
    const auto l100 = uniform_loss(0.01);
    CHECK(within_factor(crosstalk_at(g100, l100, 6.5), 1e-3, 2));
    CHECK(within_factor(crosstalk_at(g100, l100, 13.5), 1e-4, 2));

    CHECK_THROWS_AS(crosstalk_at(geom, l, 0), ArgumentError);
    CHECK_THROWS_AS(crosstalk_at(geom, l, 2, 4), ArgumentError);
}

TEST_CASE("azimuthal mean does not depend on the starting angle") {
    const LossModel l;
    for (double d : {2.0, 4.0, 6.1, 9.0}) {
        const double ref = crosstalk_at(geom, l, d);
        for (double a : {0.1, 0.37, 1.0}) {
            CrosstalkOptions o;
            o.start_angle = a;
            CHECK_THAT(crosstalk_at(geom, l, d, 64, o), WithinRel(ref, 0.02));
        }
    }
}

TEST_CASE("lossless crosstalk falls monotonically out to half a zone") {
    const double half_zone = 0.5 * bz_extent(geom) / derive_quantities(geom).spot_waist;
    std::vector<double> d;
    for (double x = 2; x <= half_zone; x += 0.25) d.push_back(x);
    const auto c = crosstalk_curve(geom, LossModel::lossless(), d);
    for (std::size_t k = 1; k < c.value.size(); ++k) CHECK(c.value[k] < c.value[k - 1]);
    for (double v : c.value) CHECK((v > 0 && v <= 1));
}

TEST_CASE("power-law tail fit") {
    std::vector<double> d, c, gauss;
    for (double x = 1; x <= 12; x += 0.5) {
        d.push_back(x);
        c.push_back(0.7 * std::pow(x, -3.0));
        gauss.push_back(std::exp(-2 * x * x / 16));
    }
    const auto f = powerlaw_fit(d, c, 3, 10);
    CHECK_THAT(f.exponent, WithinAbs(-3.0, 1e-6));
    CHECK_THAT(f.prefactor, WithinRel(0.7, 1e-6));
    CHECK_FALSE(f.model_mismatch);
    CHECK(powerlaw_fit(d, gauss, 3, 10).model_mismatch);

    auto bad = c;
    bad[6] = 0;
    CHECK_THROWS_AS(powerlaw_fit(d, bad, 3, 10), DomainError);
    CHECK_THROWS_AS(powerlaw_fit(d, c, 3, 4), ArgumentError);
}

TEST_CASE("simulated crosstalk tail exponent", "[reference-target]") {
    std::vector<double> d;
    for (double x = 3; x <= 10.001; x += 0.25) d.push_back(x);
    const auto fit = powerlaw_fit(crosstalk_curve(geom, LossModel{}, d), 3, 10);
    CHECK_THAT(fit.exponent, WithinAbs(-3.1, 0.4));
}

TEST_CASE("uniformity statistics") {
    const SpotFit a{1e-6, 2e-6, 14e-6, 13e-6, 5, 0};
    CHECK(uniformity_stats({a, a, a}).sigma_i == 0);
    CHECK(uniformity_stats({a, a}).sigma_wx == 0);
    SpotFit b = a;
    b.peak = 7;
    const auto s = uniformity_stats({a, b});
    CHECK_THAT(s.sigma_i, WithinRel(1.0 / 6.0, 1e-12));
    CHECK(s.sigma_wy == 0);
    CHECK_THROWS_AS(uniformity_stats({a}), ArgumentError);
}

TEST_CASE("efficiency budget") {
    const LossModel l;
    const auto b = efficiency_budget(l, geom);
    double brute = 0;
    for (int j = 0; j < geom.n_rows; ++j) brute += l.kappa_1 * std::pow(1 - l.kappa_1 - l.loss_1, j);
    CHECK_THAT(b.eta_1, WithinRel(brute, 1e-14));
    CHECK_THAT(b.eta_1, WithinAbs(0.219, 0.01));
    CHECK_THAT(b.eta_1, WithinAbs(0.214, 0.001));
    CHECK_THAT(b.eta_2, WithinAbs(0.283, 0.01));
    CHECK_THAT(b.eta_total, WithinAbs(0.037, 0.005));
    CHECK(b.eta_total == b.eta_1 * b.eta_rel * b.eta_2 * b.eta_im);
    CHECK(b.stage1_loss == l.kappa_1 + l.loss_1);
    CHECK(b.stage2_loss == l.kappa_lock + l.kappa_2 + l.loss_2);

    LossModel z = LossModel::lossless();
    z.kappa_1 = 1e-9;
    CHECK(efficiency_budget(z, geom).eta_1 < 1e-8);

    const auto j = to_json(b, l);
    CHECK(j.at("Total system efficiency").at("eta").get<double>() == b.eta_total);
    CHECK(j.at("1st RIPA").at("A_1").get<double>() == b.stage1_loss);
}

TEST_CASE("efficiency and linewidth tradeoff") {
    SECTION("lossless limit") {
        const auto c = tradeoff_curve(100, 0.0, {0.0, 1e-6, 1e-4});
        CHECK_THAT(c.points[0].broadening, WithinAbs(1.0, 1e-9));
        CHECK_THAT(c.points[1].broadening, WithinAbs(1.0, 1e-3));
        CHECK(c.points[0].efficiency == 0);
    }
    SECTION("monotone in kappa") {
        std::vector<double> k;
        for (double x = 0; x <= 0.08; x += 0.005) k.push_back(x);
        const auto c = tradeoff_curve(100, 0.01, k);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            CHECK(c.points[i].broadening >= c.points[i - 1].broadening - 1e-9);
            CHECK(c.points[i].efficiency > c.points[i - 1].efficiency);
        }
        for (const auto& p : c.points) {
            CHECK(p.broadening >= 1 - 1e-9);
            CHECK((p.efficiency >= 0 && p.efficiency <= 1));
        }
    }
    SECTION("errors") {
        CHECK_THROWS_AS(tradeoff_curve(100, 0.5, {0.5}), DomainError);
        CHECK_THROWS_AS(tradeoff_curve(1, 0.0, {0.1}), ArgumentError);
    }
}

TEST_CASE("high efficiency with little broadening at N = 100", "[reference-target]") {
    std::vector<double> k;
    for (double x = 0.001; x <= 0.1; x += 0.001) k.push_back(x);
    const auto c = tradeoff_curve(100, 0.01, k);
    bool found = false;
    for (const auto& p : c.points) found |= p.efficiency > 0.8 && p.broadening < 1.1;
    CHECK(found);
}
