#include <catch2/catch_amalgamated.hpp>

#include "phtest/complexes.hpp"
#include "phtest/null_model.hpp"
#include "phtest/persistence.hpp"
#include "phtest/rng.hpp"
#include "phtest/standardization.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

using namespace phtest;

namespace {

PoolKey key_for(std::string source = "null", double param = 1.0, std::size_t n = 10) {
    PoolKey k;
    k.source = std::move(source);
    k.param = param;
    k.n = n;
    return k;
}

std::vector<double> length_pool_values(double side, std::size_t n, std::size_t draws,
                                       std::uint64_t seed_root) {
    NullModelSpec spec;
    spec.box.lower = {0.0, 0.0};
    spec.box.upper = {side, side};
    spec.n = n;
    spec.seed_root = seed_root;
    std::vector<double> values;
    values.reserve(draws);
    for (std::uint64_t r = 0; r < draws; ++r) {
        const auto d = reduce(alpha_filtration_2d(sample_uniform(spec, r)));
        values.push_back(max_bar_length(d, 1));
    }
    return values;
}

}  // namespace

TEST_CASE("pool statistics on frozen values", "[standardization]") {
    const auto pool = build_pool({2.0, 0.0}, key_for());
    CHECK(pool.values == std::vector<double>{0.0, 2.0});
    CHECK(pool.mean == 1.0);
    CHECK(pool.sd == std::sqrt(2.0));
    CHECK(pool.absent_count == 0);
}

TEST_CASE("pool rejects degenerate inputs", "[standardization]") {
    REQUIRE_THROWS_AS(build_pool({}, key_for()), degenerate_pool_error);
    REQUIRE_THROWS_AS(build_pool({5.0}, key_for()), degenerate_pool_error);
    REQUIRE_THROWS_AS(build_pool({3.0, 3.0, 3.0}, key_for()), degenerate_pool_error);
    REQUIRE_THROWS_AS(build_pool({1.0, 2.0}, key_for(), 3), degenerate_pool_error);
    REQUIRE_NOTHROW(build_pool({1.0, 2.0}, key_for(), 2));
    // degenerate_pool_error is a flavor of input_error
    REQUIRE_THROWS_AS(build_pool({}, key_for()), input_error);
}

TEST_CASE("pool key formatting distinguishes configurations", "[standardization]") {
    PoolKey k = key_for("circle", 0.25, 100);
    k.invariant = InvariantKind::log_max_bar_length;
    k.dim = 0;
    CHECK(to_string(k) == "circle-0.25-n100-log-length-h0");
    CHECK(to_string(key_for()) == "null-1-n10-length-h1");
    CHECK_FALSE(key_for() == k);
    CHECK(key_for() == key_for());
}

TEST_CASE("studentize against a frozen pool", "[standardization]") {
    const auto pool = build_pool({1.0, 2.0, 2.0, 3.0}, key_for());
    REQUIRE(pool.mean == 2.0);
    REQUIRE(pool.sd == Catch::Approx(std::sqrt(2.0 / 3.0)).margin(1e-15));

    const auto mid = studentize(2.0, pool);
    CHECK(mid.raw == 2.0);
    CHECK(mid.z == 0.0);
    CHECK(mid.ecdf_quantile == 0.75);
    CHECK(mid.key == pool.key);

    CHECK(studentize(0.5, pool).ecdf_quantile == 0.0);
    CHECK(studentize(1.0, pool).ecdf_quantile == 0.25);
    CHECK(studentize(3.0, pool).ecdf_quantile == 1.0);
    CHECK(studentize(99.0, pool).ecdf_quantile == 1.0);
    CHECK(studentize(3.0, pool).z == Catch::Approx(std::sqrt(1.5)).margin(1e-15));
}

TEST_CASE("self-studentized pools are centered and unit scale", "[standardization]") {
    auto stream = rng::Stream(rng::derive(0, {401}));
    std::vector<double> values;
    for (int i = 0; i < 200; ++i) values.push_back(stream.normal() * 3.0 + 7.0);
    const auto pool = build_pool(values, key_for());
    const auto z = studentized_values(pool);
    REQUIRE(z.size() == 200);
    REQUIRE(std::is_sorted(z.begin(), z.end()));
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(z.size());
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(z.size() - 1));
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::abs(sd - 1.0) < 1e-12);
}

TEST_CASE("studentization is affine invariant", "[standardization]") {
    auto stream = rng::Stream(rng::derive(0, {402}));
    std::vector<double> values;
    for (int i = 0; i < 100; ++i) values.push_back(stream.uniform01());
    auto scaled = values;
    for (double& v : scaled) v = 3.5 * v - 2.0;

    const auto za = studentized_values(build_pool(values, key_for()));
    const auto zb = studentized_values(build_pool(scaled, key_for()));
    REQUIRE(za.size() == zb.size());
    for (std::size_t i = 0; i < za.size(); ++i)
        REQUIRE(za[i] == Catch::Approx(zb[i]).margin(1e-9));
}

TEST_CASE("two-sample KS statistic", "[standardization]") {
    CHECK(two_sample_ks({1.0, 2.0}, {1.5}) == 0.5);
    CHECK(two_sample_ks({1.5}, {1.0, 2.0}) == 0.5);
    CHECK(two_sample_ks({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(two_sample_ks({1.0, 2.0}, {5.0, 6.0}) == 1.0);
    REQUIRE_THROWS_AS(two_sample_ks({}, {1.0}), parameter_error);
    REQUIRE_THROWS_AS(two_sample_ks({1.0}, {}), parameter_error);
}

TEST_CASE("QQ points use nearest ranks", "[standardization]") {
    std::vector<double> deciles;
    for (int i = 1; i <= 10; ++i) deciles.push_back(10.0 * i);
    const auto qq = qq_points(deciles, deciles);
    REQUIRE(qq.size() == 99);
    CHECK(qq[0] == std::array<double, 2>{10.0, 10.0});
    CHECK(qq[49] == std::array<double, 2>{50.0, 50.0});
    CHECK(qq[98] == std::array<double, 2>{100.0, 100.0});
    for (const auto& p : qq) CHECK(p[0] == p[1]);

    const auto mixed = qq_points(deciles, {0.0, 1.0});
    CHECK(mixed[0][1] == 0.0);
    CHECK(mixed[98][1] == 1.0);
    REQUIRE_THROWS_AS(qq_points({}, deciles), parameter_error);
}

TEST_CASE("pearson correlation", "[standardization]") {
    CHECK(pearson_correlation({{0, 0}, {1, 2}, {2, 4}}) == Catch::Approx(1.0).margin(1e-15));
    CHECK(pearson_correlation({{0, 4}, {1, 2}, {2, 0}}) == Catch::Approx(-1.0).margin(1e-15));
    CHECK(pearson_correlation({{1, 5}, {2, 5}, {3, 5}}) == 0.0);
    REQUIRE_THROWS_AS(pearson_correlation({{1, 1}}), parameter_error);
}

TEST_CASE("exchangeability report structure", "[standardization]") {
    auto stream = rng::Stream(rng::derive(0, {403}));
    auto draw_pool = [&](double shift, std::size_t count, double param) {
        std::vector<double> v;
        for (std::size_t i = 0; i < count; ++i) v.push_back(stream.normal() + shift);
        return build_pool(v, key_for("null", param, 50));
    };

    const auto a = draw_pool(0.0, 80, 1.0);
    const auto b = draw_pool(5.0, 80, 2.0);
    const auto tiny = draw_pool(0.0, 10, 3.0);

    const auto report = exchangeability_report({a, b, tiny});
    REQUIRE(report.pool_keys.size() == 2);
    REQUIRE(report.pairs.size() == 1);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("excluded") != std::string::npos);
    CHECK(report.pairs[0].i == 0);
    CHECK(report.pairs[0].j == 1);
    CHECK(report.pairs[0].ks <= 1.0);
    CHECK(report.pairs[0].qq.size() == 99);
    for (const auto& z : report.studentized) REQUIRE(std::is_sorted(z.begin(), z.end()));

    REQUIRE_THROWS_AS(exchangeability_report({a, tiny}), parameter_error);
    REQUIRE_THROWS_AS(exchangeability_report({a}), parameter_error);
}

TEST_CASE("equal-law pools are exchangeable", "[standardization]") {
    auto stream = rng::Stream(rng::derive(0, {404}));
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(stream.uniform01());
    const auto a = build_pool(v, key_for("null", 1.0, 50));

    // Power-of-two scaling keeps every z-score bit-identical.
    auto scaled = v;
    for (double& x : scaled) x *= 4.0;
    const auto b = build_pool(scaled, key_for("null", 2.0, 50));
    const auto exact = exchangeability_report({a, b});
    CHECK(exact.pairs[0].ks == 0.0);
    CHECK(exact.pairs[0].qq_correlation == Catch::Approx(1.0).margin(1e-12));

    // A general affine map may slip a rank or two to rounding, nothing more.
    auto shifted = v;
    for (double& x : shifted) x = 2.0 * x + 1.0;
    const auto c = build_pool(shifted, key_for("null", 3.0, 50));
    const auto close = exchangeability_report({a, c});
    CHECK(close.pairs[0].ks <= 0.02);
    CHECK(close.pairs[0].qq_correlation == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("KS statistic calibration on matched normal pools", "[standardization]") {
    // At n = m = 1000 the 5% critical value is about 0.0607; equal-law pairs
    // should rarely exceed it.
    auto stream = rng::Stream(rng::derive(0, {405}));
    int exceed = 0;
    for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> a(1000), b(1000);
        for (auto& x : a) x = stream.normal();
        for (auto& x : b) x = stream.normal();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (two_sample_ks(a, b) > 0.0607) ++exceed;
    }
    CHECK(exceed <= 6);
}

TEST_CASE("studentized loop statistics line up across configurations", "[standardization]") {
    // Same count, different box side: the raw statistic scales with the box,
    // so the studentized laws agree exactly.
    const std::size_t draws = 300;
    const auto small_side = build_pool(length_pool_values(0.1, 50, draws, 406),
                                       key_for("null", 0.1, 50));
    const auto big_side = build_pool(length_pool_values(10.0, 50, draws, 407),
                                     key_for("null", 10.0, 50));
    const auto cross_n = build_pool(length_pool_values(10.0, 500, draws, 408),
                                    key_for("null", 10.0, 500));

    const auto report = exchangeability_report({small_side, big_side, cross_n});
    REQUIRE(report.pairs.size() == 3);
    for (const auto& pair : report.pairs) {
        CHECK(pair.ks <= 0.12);
        CHECK(pair.qq_correlation >= 0.98);
    }
}
