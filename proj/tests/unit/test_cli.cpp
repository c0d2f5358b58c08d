// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "ripa_cli.hpp"

using namespace ripa;
namespace fs = std::filesystem;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Scratch {
    fs::path root;
    Scratch() {
        root = fs::temp_directory_path() / ("ripa_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Scratch() { fs::remove_all(root); }
    std::string operator/(const std::string& name) const { return (root / name).string(); }
};

int run_quiet(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) m[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return m;
}

const std::string reference_config = RIPA_SOURCE_DIR "/configs/reference.json";

}  // namespace

TEST_CASE("derive reports the free spectral ranges") {
    Scratch s;
    REQUIRE(run_quiet({"--config", reference_config, "--out", s / "d", "derive"}) == 0);
    const auto j = load(s / "d/derived.json");
    CHECK_THAT(j.at("fsr_1").get<double>(), WithinRel(3.19e9, 0.005));
    CHECK_THAT(j.at("length_ratio").get<double>(), WithinRel(24.6, 0.01));
    CHECK(fs::exists(s / "d/manifest.json"));
    // global options are also accepted after the subcommand
    REQUIRE(run_quiet({"derive", "--out", s / "e"}) == 0);
    CHECK(slurp(s / "e/derived.json") == slurp(s / "d/derived.json"));
}

TEST_CASE("overrides change the configuration") {
    Scratch s;
    REQUIRE(run_quiet({"--out", s / "d", "--set", "geometry.roundtrip_2=2.0", "derive"}) == 0);
    CHECK_THAT(load(s / "d/derived.json").at("fsr_2").get<double>(), WithinRel(speed_of_light / 2.0, 1e-12));
    const auto m = load(s / "d/manifest.json");
    CHECK(m.at("overrides").size() == 1);
    CHECK(m.at("config").at("geometry").at("roundtrip_2").get<double>() == 2.0);
}

TEST_CASE("pulse rise time") {
    Scratch s;
    REQUIRE(run_quiet({"--config", reference_config, "--out", s / "p", "pulse"}) == 0);
    const auto j = load(s / "p/pulse.json");
    CHECK_THAT(j.at("rise_ns").get<double>(), WithinAbs(44, 10));
    CHECK_THAT(j.at("fall_ns").get<double>(), WithinAbs(44, 10));
    CHECK(fs::exists(s / "p/trace.csv"));
}

TEST_CASE("manifest reruns are byte-identical") {
    Scratch s;
    const std::vector<std::vector<std::string>> cases{
        {"--seed", "3", "calibrate", "--aberration", "smooth"},
        {"focal", "--samples", "64", "--detuning", "2.5e8"},
        {"budget"},
        {"--set", "loss.kappa_1=0.03", "crosstalk", "--d-max", "8"}};
    int k = 0;
    for (auto args : cases) {
        const std::string a = s / ("a" + std::to_string(k)), b = s / ("b" + std::to_string(k));
        ++k;
        args.insert(args.begin(), {"--out", a});
        REQUIRE(run_quiet(args) == 0);
        const auto first = tree(a);
        // same command twice
        REQUIRE(run_quiet(args) == 0);
        CHECK(tree(a) == first);
        // from the manifest into a fresh directory: only the recorded output directory differs
        REQUIRE(run_quiet({"--manifest", a + "/manifest.json", "--out", b}) == 0);
        auto second = tree(b);
        CHECK(second.size() == first.size());
        for (const auto& [name, bytes] : first) {
            if (name == "manifest.json") continue;
            CHECK(second[name] == bytes);
        }
        auto ma = load(fs::path(a) / "manifest.json"), mb = load(fs::path(b) / "manifest.json");
        ma.erase("output_directory"), mb.erase("output_directory");
        CHECK(ma == mb);
        // in place: everything including the manifest
        REQUIRE(run_quiet({"--manifest", a + "/manifest.json"}) == 0);
        CHECK(tree(a) == first);
    }
}

TEST_CASE("outputs stay inside the output directory") {
    Scratch s;
    REQUIRE(run_quiet({"--out", s / "only", "stability"}) == 0);
    std::vector<std::string> top;
    for (const auto& e : fs::directory_iterator(s.root)) top.push_back(e.path().filename().string());
    CHECK(top == std::vector<std::string>{"only"});
    CHECK(fs::exists(s / "only/stability.json"));
}

TEST_CASE("exit codes") {
    Scratch s;
    std::string err;
    CHECK(run_quiet({"--out", s / "x", "frobnicate"}, &err) == 64);
    CHECK(run_quiet({"--out", s / "x"}) == 64);
    CHECK(run_quiet({"derive"}) == 64);
    CHECK(run_quiet({"--out", s / "x", "derive", "--bogus"}) == 64);
    CHECK(run_quiet({"--out", s / "x", "--set", "geometry.n_rows=0", "derive"}, &err) == 1);
    CHECK_FALSE(err.empty());
    CHECK(run_quiet({"--out", s / "x", "--set", "geometry.no_such_key=1", "derive"}) == 1);
    CHECK(run_quiet({"--config", s / "missing.json", "--out", s / "x", "derive"}) == 1);
    CHECK(run_quiet({"--out", s / "x", "crosstalk", "--tail-lo", "50", "--tail-hi", "60"}, &err) == 2);
    CHECK(err.find("numerical") != std::string::npos);
    CHECK(run_quiet({"--manifest", s / "missing.json"}) == 1);
    CHECK(run_quiet({"--version"}) == 0);
}
