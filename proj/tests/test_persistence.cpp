#include <catch2/catch_amalgamated.hpp>

#include "phtest/complexes.hpp"
#include "phtest/persistence.hpp"
#include "phtest/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace phtest;

namespace {

DistanceMatrix exact_triangle() {
    DistanceMatrix dm;
    dm.n = 3;
    dm.d = {0, 1, 1, 1, 0, 1, 1, 1, 0};
    return dm;
}

std::vector<std::pair<double, double>> bars(const PersistenceDiagram& d, int dim,
                                            bool positive_only = false) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : d.points)
        if (p.dim == dim && (!positive_only || p.death > p.birth))
            out.emplace_back(p.birth, p.death);
    std::sort(out.begin(), out.end());
    return out;
}

Filtration square_rips() {
    const auto dm = build_distance_matrix(
        PointCloud::from_rows({{0, 0}, {1, 0}, {0, 1}, {1, 1}}));
    return vietoris_rips(dm, 2, 2.0);
}

}  // namespace

TEST_CASE("reduce on three points at pairwise distance one", "[persistence]") {
    const auto d = reduce(vietoris_rips(exact_triangle(), 2, 1.5));
    const auto h0 = bars(d, 0);
    REQUIRE(h0.size() == 3);
    CHECK(h0[0] == std::pair{0.0, 1.0});
    CHECK(h0[1] == std::pair{0.0, 1.0});
    CHECK(h0[2].first == 0.0);
    CHECK(h0[2].second == kInf);
    // The cycle and its filling triangle enter together, so no positive bar.
    CHECK(bars(d, 1, true).empty());
    for (const auto& [b, dd] : bars(d, 1)) CHECK(b == dd);
}

TEST_CASE("reduce on the unit square corners", "[persistence]") {
    const auto d = reduce(square_rips());
    const auto h1 = bars(d, 1, true);
    REQUIRE(h1.size() == 1);
    CHECK(h1[0].first == 1.0);
    CHECK(h1[0].second == std::sqrt(2.0));

    const auto h0 = bars(d, 0);
    REQUIRE(h0.size() == 4);
    std::size_t infinite = 0;
    for (const auto& [b, dd] : h0) {
        CHECK(b == 0.0);
        if (std::isinf(dd))
            ++infinite;
        else
            CHECK(dd == 1.0);
    }
    CHECK(infinite == 1);
}

TEST_CASE("reduce on a single vertex", "[persistence]") {
    Filtration f;
    f.simplices.push_back(Simplex{{0}, 0.0});
    const auto d = reduce(f);
    REQUIRE(d.points.size() == 1);
    CHECK(d.points[0].dim == 0);
    CHECK(d.points[0].birth == 0.0);
    CHECK(d.points[0].death == kInf);
}

TEST_CASE("reduce rejects malformed filtrations", "[persistence]") {
    Filtration duplicate;
    duplicate.simplices.push_back(Simplex{{0}, 0.0});
    duplicate.simplices.push_back(Simplex{{0}, 0.0});
    REQUIRE_THROWS_AS(reduce(duplicate), input_error);

    Filtration missing_face;
    missing_face.simplices.push_back(Simplex{{0}, 0.0});
    missing_face.simplices.push_back(Simplex{{0, 1}, 1.0});
    REQUIRE_THROWS_AS(reduce(missing_face), input_error);

    Filtration late_face;
    late_face.simplices.push_back(Simplex{{0}, 0.0});
    late_face.simplices.push_back(Simplex{{1}, 2.0});
    late_face.simplices.push_back(Simplex{{0, 1}, 1.0});
    REQUIRE_THROWS_AS(reduce(late_face), input_error);

    Filtration bad_vertices;
    bad_vertices.simplices.push_back(Simplex{{1, 0}, 0.0});
    REQUIRE_THROWS_AS(reduce(bad_vertices), input_error);

    Filtration negative_value;
    negative_value.simplices.push_back(Simplex{{0}, -1.0});
    REQUIRE_THROWS_AS(reduce(negative_value), input_error);
}

TEST_CASE("reduce is deterministic", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {201}));
    const auto cloud = oracles::random_cloud(stream, 12);
    const auto dm = build_distance_matrix(cloud);
    const auto f = vietoris_rips(dm, 2, 0.8);
    const auto d1 = reduce(f);
    const auto d2 = reduce(f);
    REQUIRE(d1.points.size() == d2.points.size());
    for (std::size_t i = 0; i < d1.points.size(); ++i) {
        CHECK(d1.points[i].birth == d2.points[i].birth);
        CHECK(d1.points[i].death == d2.points[i].death);
        CHECK(d1.points[i].dim == d2.points[i].dim);
    }
}

TEST_CASE("persistent betti on frozen diagrams", "[persistence]") {
    PersistenceDiagram single;
    single.points.push_back(DiagramPoint{0.0, kInf, 0});
    CHECK(persistent_betti(single, {0, 0.0, 5.0}) == 1);
    CHECK(persistent_betti(single, {1, 0.0, 5.0}) == 0);

    PersistenceDiagram loop;
    loop.points.push_back(DiagramPoint{1.0, std::sqrt(2.0), 1});
    CHECK(persistent_betti(loop, {1, 1.2, 1.3}) == 1);
    CHECK(persistent_betti(loop, {1, 0.5, 1.3}) == 0);
    CHECK(persistent_betti(loop, {1, 1.0, 1.5}) == 0);  // death not past s
    CHECK(persistent_betti(loop, {1, 1.0, 1.0}) == 1);
}

TEST_CASE("persistent betti query validation", "[persistence]") {
    PersistenceDiagram d;
    REQUIRE_THROWS_AS(persistent_betti(d, {0, 2.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(persistent_betti(d, {0, -1.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(persistent_betti(d, {-1, 0.0, 1.0}), parameter_error);
    REQUIRE_THROWS_AS(persistent_betti(d, {0, 0.0, kInf}), parameter_error);
    REQUIRE_NOTHROW(persistent_betti(d, {0, 1.0, 1.0}));
}

TEST_CASE("persistent betti monotonicity", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {202}));
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = oracles::random_diagram(stream, 1 + static_cast<int>(stream.below(2)), 12,
                                               true);
        const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5};
        for (int q = 0; q <= 2; ++q) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
                for (std::size_t j = i; j < grid.size(); ++j) {
                    const auto base = persistent_betti(d, {q, grid[i], grid[j]});
                    if (i > 0)
                        REQUIRE(persistent_betti(d, {q, grid[i - 1], grid[j]}) <= base);
                    if (j + 1 < grid.size())
                        REQUIRE(persistent_betti(d, {q, grid[i], grid[j + 1]}) <= base);
                }
            }
        }
    }
}

TEST_CASE("euler characteristic agrees with alternating betti sum", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {203}));
    for (int rep = 0; rep < 15; ++rep) {
        const auto cloud = oracles::random_cloud(stream, 3 + stream.below(6));
        const auto dm = build_distance_matrix(cloud);
        const auto f = vietoris_rips(dm, 3, 1.5);
        const auto d = reduce(f);
        for (double t : {0.0, 0.3, 0.6, 0.9, 1.2}) {
            long chi = 0;
            for (const auto& s : f.simplices)
                if (s.value <= t) chi += (s.dim() % 2 == 0) ? 1 : -1;
            long betti_sum = 0;
            for (int q = 0; q <= f.max_dim; ++q) {
                const long b = static_cast<long>(persistent_betti(d, {q, t, t}));
                betti_sum += (q % 2 == 0) ? b : -b;
            }
            REQUIRE(chi == betti_sum);
        }
    }
}

TEST_CASE("connected component count at time zero", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {204}));
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 1 + stream.below(12);
        const auto cloud = oracles::random_cloud(stream, n);
        const auto dm = build_distance_matrix(cloud);
        const auto d = reduce(vietoris_rips(dm, 1, 2.0));
        REQUIRE(persistent_betti(d, {0, 0.0, 0.0}) == n);
        REQUIRE(d.count_in_dim(0) == n);
    }
}

TEST_CASE("rank oracle on frozen cases", "[persistence]") {
    Filtration empty;
    CHECK(betti_rank_oracle(empty, {0, 0.0, 1.0}) == 0);
    CHECK(betti_rank_oracle(empty, {1, 0.0, 1.0}) == 0);

    const auto square = square_rips();
    CHECK(betti_rank_oracle(square, {1, 1.0, 1.2}) == 1);
    CHECK(betti_rank_oracle(square, {0, 0.0, 0.0}) == 4);
    CHECK(betti_rank_oracle(square, {0, 1.0, 1.0}) == 1);
    CHECK(betti_rank_oracle(square, {1, 1.5, 1.5}) == 0);

    REQUIRE_THROWS_AS(betti_rank_oracle(square, {0, 2.0, 1.0}), parameter_error);
}

TEST_CASE("rank oracle r equals s gives ordinary betti numbers", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {205}));
    for (int rep = 0; rep < 10; ++rep) {
        const auto cloud = oracles::random_cloud(stream, 3 + stream.below(5));
        const auto dm = build_distance_matrix(cloud);
        const auto f = vietoris_rips(dm, 2, 1.2);
        const auto d = reduce(f);
        for (double t : {0.2, 0.5, 0.9}) {
            for (int q : {0, 1}) {
                REQUIRE(betti_rank_oracle(f, {q, t, t}) == persistent_betti(d, {q, t, t}));
            }
        }
    }
}

TEST_CASE("rank oracle size guard", "[persistence]") {
    Filtration big;
    for (int i = 0; i < 5000; ++i) big.simplices.push_back(Simplex{{i}, 0.0});
    REQUIRE_THROWS_AS(betti_rank_oracle(big, {0, 0.0, 0.0}), guard_error);
}

TEST_CASE("reduction agrees with the rank oracle on random clouds", "[persistence]") {
    auto stream = rng::Stream(rng::derive(0, {206}));
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 3 + stream.below(4);
        const auto cloud = oracles::random_cloud(stream, n);
        Filtration f;
        if (rep % 2 == 0) {
            const auto dm = build_distance_matrix(cloud);
            f = vietoris_rips(dm, 2, 0.4 + stream.uniform01());
        } else {
            f = alpha_filtration_2d(cloud);
        }
        const auto d = reduce(f);
        double top = 0.0;
        for (const auto& s : f.simplices) top = std::max(top, s.value);
        for (int qi = 0; qi < 2; ++qi) {
            for (int ri = 0; ri < 4; ++ri) {
                const double r = top * static_cast<double>(ri) / 3.0;
                for (int si = ri; si < 4; ++si) {
                    const double s = top * static_cast<double>(si) / 3.0;
                    REQUIRE(persistent_betti(d, {qi, r, s}) == betti_rank_oracle(f, {qi, r, s}));
                }
            }
        }
    }
}
