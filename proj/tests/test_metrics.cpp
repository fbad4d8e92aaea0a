#include <catch2/catch_amalgamated.hpp>

#include "phtest/diagram_metrics.hpp"
#include "phtest/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

using namespace phtest;

namespace {

PersistenceDiagram make(std::vector<DiagramPoint> pts) {
    PersistenceDiagram d;
    d.points = std::move(pts);
    return d;
}

}  // namespace

TEST_CASE("max bar length on frozen diagrams", "[metrics]") {
    CHECK(max_bar_length(make({{1.0, std::sqrt(2.0), 1}}), 1) == std::sqrt(2.0) - 1.0);
    CHECK(max_bar_length(make({}), 0) == 0.0);
    CHECK(max_bar_length(make({{0, 2, 0}, {0, 5, 0}, {0, kInf, 0}}), 0) == 5.0);
    CHECK(max_bar_length(make({{0, 2, 0}}), 1) == 0.0);
    CHECK(max_bar_length(make({{0, kInf, 1}}), 1) == 0.0);
}

TEST_CASE("log max bar length", "[metrics]") {
    const double e = std::exp(1.0);
    CHECK(log_max_bar_length(make({{0.0, e, 0}}), 0) == Catch::Approx(1.0).margin(1e-14));
    CHECK(log_max_bar_length(make({{1.0, std::sqrt(2.0), 1}}), 1) ==
          Catch::Approx(-0.8814).margin(5e-5));
    REQUIRE_THROWS_AS(log_max_bar_length(make({}), 0), absent_statistic_error);
    REQUIRE_THROWS_AS(log_max_bar_length(make({{1, 1, 0}}), 0), absent_statistic_error);
    REQUIRE_THROWS_AS(log_max_bar_length(make({{0, kInf, 1}}), 1), absent_statistic_error);
}

TEST_CASE("invariant value and names", "[metrics]") {
    const auto d = make({{0, 2, 1}});
    const auto len = invariant_value(d, {InvariantKind::max_bar_length, 1});
    REQUIRE(len.has_value());
    CHECK(*len == 2.0);

    const auto empty_len = invariant_value(make({}), {InvariantKind::max_bar_length, 1});
    REQUIRE(empty_len.has_value());
    CHECK(*empty_len == 0.0);

    const auto empty_log = invariant_value(make({}), {InvariantKind::log_max_bar_length, 1});
    CHECK_FALSE(empty_log.has_value());

    const auto log_val = invariant_value(d, {InvariantKind::log_max_bar_length, 1});
    REQUIRE(log_val.has_value());
    CHECK(*log_val == Catch::Approx(std::log(2.0)).margin(1e-15));

    CHECK(std::string(invariant_name(InvariantKind::max_bar_length)) == "length");
    CHECK(std::string(invariant_name(InvariantKind::log_max_bar_length)) == "log-length");
}

TEST_CASE("bottleneck distance on frozen pairs", "[metrics]") {
    const auto single = make({{0, 2, 1}});
    CHECK(bottleneck_distance(single, single, 1) == 0.0);
    CHECK(bottleneck_distance(single, make({}), 1) == 1.0);
    CHECK(bottleneck_distance(make({}), single, 1) == 1.0);
    CHECK(bottleneck_distance(single, make({{0.5, 2.5, 1}}), 1) == 0.5);
    CHECK(bottleneck_distance(make({}), make({}), 0) == 0.0);
}

TEST_CASE("bottleneck handles infinite bars by birth pairing", "[metrics]") {
    CHECK(bottleneck_distance(make({{0, kInf, 0}}), make({}), 0) == kInf);
    CHECK(bottleneck_distance(make({{0, kInf, 0}}), make({{0.5, kInf, 0}}), 0) == 0.5);
    CHECK(bottleneck_distance(make({{0, kInf, 0}, {0, 2, 0}}),
                              make({{0.25, kInf, 0}, {0, 2, 0}}), 0) == 0.25);
    // Points in other dimensions never contribute.
    CHECK(bottleneck_distance(make({{0, 9, 0}}), make({{0, 9, 0}, {1, 7, 1}}), 0) == 0.0);
}

TEST_CASE("wasserstein distance on frozen pairs", "[metrics]") {
    const auto single = make({{0, 2, 1}});
    CHECK(wasserstein_distance(single, single, 1, {2.0, 2.0}) == 0.0);
    CHECK(wasserstein_distance(single, make({}), 1, {2.0, 2.0}) ==
          Catch::Approx(1.0).margin(1e-15));
    CHECK(wasserstein_distance(make({{0, 2, 1}, {0, 4, 1}}), single, 1, {1.0, 1.0}) ==
          Catch::Approx(2.0).margin(1e-15));
    CHECK(wasserstein_distance(make({{0, kInf, 1}}), make({{1, kInf, 1}}), 1, {2.0, 2.0}) ==
          Catch::Approx(1.0).margin(1e-15));
    CHECK(wasserstein_distance(make({{0, kInf, 1}}), make({}), 1, {2.0, 2.0}) == kInf);
}

TEST_CASE("wasserstein exponent contract", "[metrics]") {
    const auto d = make({{0, 2, 1}});
    REQUIRE_THROWS_AS(wasserstein_distance(d, d, 1, {0.5, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(wasserstein_distance(d, d, 1, {0.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(wasserstein_distance(d, d, 1, {kInf, 1.0}), parameter_error);
    REQUIRE_NOTHROW(wasserstein_distance(d, d, 1, {1.0, 1.0}));
}

TEST_CASE("two-group loss on frozen cases", "[metrics]") {
    const auto a = make({{0, 2, 1}});
    const auto b = make({{0, 4, 1}});

    CHECK(rt_loss({a, a, a}, {b, b}, 1, {1.0, 1.0}) == 0.0);

    // d_1(a, b) = 2 (direct match beats the diagonal), so each group-1 ordered
    // pair contributes 2 and F = (1/4)(2 + 2) = 1.
    const double f = rt_loss({a, b}, {a, a}, 1, {1.0, 1.0});
    CHECK(f == Catch::Approx(1.0).margin(1e-12));
    const double d1 = wasserstein_distance(a, b, 1, {1.0, 1.0});
    CHECK(d1 == Catch::Approx(2.0).margin(1e-15));
    CHECK(f == Catch::Approx(2.0 * d1 / 4.0).margin(1e-12));

    CHECK(rt_loss({a, b}, {a, a}, 1, {1.0, 1.0}) ==
          Catch::Approx(rt_loss({a, a}, {a, b}, 1, {1.0, 1.0})).margin(1e-15));

    REQUIRE_THROWS_AS(rt_loss({a}, {a, b}, 1, {1.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(rt_loss({a, b}, {}, 1, {1.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(rt_loss({a, b}, {a, b}, 1, {1.0, 0.5}), parameter_error);
}

TEST_CASE("two-group loss from a matrix", "[metrics]") {
    const std::vector<std::vector<double>> dm{
        {0, 1, 5, 5}, {1, 0, 5, 5}, {5, 5, 0, 3}, {5, 5, 3, 0}};
    // Ordered pairs double each entry; each group normalizes by 2 n (n-1).
    CHECK(rt_loss_from_matrix(dm, {0, 1}, {2, 3}, 1.0) ==
          Catch::Approx(0.5 + 1.5).margin(1e-15));
    CHECK(rt_loss_from_matrix(dm, {0, 1}, {2, 3}, 2.0) ==
          Catch::Approx(0.5 * 1.0 + 0.5 * 9.0).margin(1e-15));
    REQUIRE_THROWS_AS(rt_loss_from_matrix(dm, {0}, {2, 3}, 1.0), parameter_error);
}

TEST_CASE("two-group loss ignores within-group order", "[metrics]") {
    auto stream = rng::Stream(rng::derive(0, {301}));
    const auto a = oracles::random_diagram(stream, 1, 4, false);
    const auto b = oracles::random_diagram(stream, 1, 4, false);
    const auto c = oracles::random_diagram(stream, 1, 4, false);
    const auto d = oracles::random_diagram(stream, 1, 4, false);
    const MatchingCost cost{2.0, 2.0};
    const double base = rt_loss({a, b, c}, {d, a}, 1, cost);
    CHECK(rt_loss({c, a, b}, {d, a}, 1, cost) == Catch::Approx(base).margin(1e-12));
    CHECK(rt_loss({b, c, a}, {a, d}, 1, cost) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("distances match exhaustive matching on random diagrams", "[metrics]") {
    auto stream = rng::Stream(rng::derive(0, {302}));
    for (int rep = 0; rep < 60; ++rep) {
        const int dim = static_cast<int>(stream.below(2));
        const bool with_inf = rep % 3 == 0;
        const auto d1 = oracles::random_diagram(stream, dim, 4, with_inf);
        const auto d2 = oracles::random_diagram(stream, dim, 4, with_inf);

        const double b_fast = bottleneck_distance(d1, d2, dim);
        const double b_slow = oracles::diagram_distance(d1, d2, dim, 0.0);
        if (std::isinf(b_slow))
            REQUIRE(std::isinf(b_fast));
        else
            REQUIRE(b_fast == Catch::Approx(b_slow).margin(1e-9));

        for (double p : {1.0, 2.0}) {
            const double w_fast = wasserstein_distance(d1, d2, dim, {p, 1.0});
            const double w_slow = oracles::diagram_distance(d1, d2, dim, p);
            if (std::isinf(w_slow))
                REQUIRE(std::isinf(w_fast));
            else
                REQUIRE(w_fast == Catch::Approx(w_slow).margin(1e-9));
        }
    }
}

TEST_CASE("distances satisfy metric axioms", "[metrics]") {
    auto stream = rng::Stream(rng::derive(0, {303}));
    for (int rep = 0; rep < 25; ++rep) {
        const auto a = oracles::random_diagram(stream, 1, 5, false);
        const auto b = oracles::random_diagram(stream, 1, 5, false);
        const auto c = oracles::random_diagram(stream, 1, 5, false);

        REQUIRE(bottleneck_distance(a, a, 1) == 0.0);
        const double ab = bottleneck_distance(a, b, 1);
        REQUIRE(ab == bottleneck_distance(b, a, 1));
        REQUIRE(ab >= 0.0);
        REQUIRE(ab <= bottleneck_distance(a, c, 1) + bottleneck_distance(c, b, 1) + 1e-12);

        for (double p : {1.0, 2.0}) {
            const MatchingCost cost{p, 1.0};
            REQUIRE(wasserstein_distance(a, a, 1, cost) == 0.0);
            const double wab = wasserstein_distance(a, b, 1, cost);
            REQUIRE(wab == Catch::Approx(wasserstein_distance(b, a, 1, cost)).margin(1e-12));
            REQUIRE(wab <= wasserstein_distance(a, c, 1, cost) +
                               wasserstein_distance(c, b, 1, cost) + 1e-9);
        }
    }
}

TEST_CASE("max bar length is twice the distance to the empty diagram", "[metrics]") {
    auto stream = rng::Stream(rng::derive(0, {304}));
    for (int rep = 0; rep < 40; ++rep) {
        const int dim = static_cast<int>(stream.below(2));
        const auto d = oracles::random_diagram(stream, dim, 5, false);
        REQUIRE(max_bar_length(d, dim) == 2.0 * bottleneck_distance(d, make({}), dim));
    }
}

TEST_CASE("pairwise distance matrix is symmetric with zero diagonal", "[metrics]") {
    auto stream = rng::Stream(rng::derive(0, {305}));
    std::vector<PersistenceDiagram> all;
    for (int i = 0; i < 5; ++i) all.push_back(oracles::random_diagram(stream, 1, 4, false));
    const auto dm = pairwise_wasserstein(all, 1, {2.0, 2.0});
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(dm[i][i] == 0.0);
        for (std::size_t j = 0; j < all.size(); ++j) CHECK(dm[i][j] == dm[j][i]);
    }
}
