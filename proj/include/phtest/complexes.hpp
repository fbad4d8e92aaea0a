#pragma once

#include "phtest/core.hpp"
#include "phtest/predicates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace phtest {

inline constexpr std::size_t kDefaultRipsGuard = 2'000'000;
inline constexpr std::size_t kDefaultAlphaGuard = 200'000;

struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> d;  // row-major n x n

    double operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

inline DistanceMatrix build_distance_matrix(const PointCloud& cloud) {
    validate_cloud(cloud);
    const std::size_t n = cloud.size();
    DistanceMatrix dm;
    dm.n = n;
    dm.d.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < cloud.dim; ++k) {
                const double diff = cloud(i, k) - cloud(j, k);
                s += diff * diff;
            }
            const double dist = std::sqrt(s);
            dm.d[i * n + j] = dist;
            dm.d[j * n + i] = dist;
        }
    }
    return dm;
}

/// All cliques of the max_radius neighborhood graph up to max_dim, each at the
/// max of its pairwise distances (vertices at 0).
inline Filtration vietoris_rips(const DistanceMatrix& dm, int max_dim, double max_radius,
                                std::size_t max_simplices = kDefaultRipsGuard) {
    if (max_dim < 0) throw parameter_error("vietoris_rips: max_dim must be nonnegative");
    if (!(max_radius > 0)) throw parameter_error("vietoris_rips: max_radius must be positive");

    const std::size_t n = dm.n;
    std::vector<std::vector<int>> above(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (dm(i, j) <= max_radius) above[i].push_back(static_cast<int>(j));

    Filtration f;
    std::size_t count = 0;
    auto emit = [&](const std::vector<int>& vertices, double value) {
        if (++count > max_simplices)
            throw guard_error("vietoris_rips: simplex budget exceeded; raise the cap or lower "
                              "max_radius/max_dim");
        f.simplices.push_back(Simplex{vertices, value});
    };

    std::vector<int> simplex;
    // Depth-first clique expansion; candidates stay sorted ascending so every
    // clique is produced exactly once.
    auto expand = [&](auto&& self, const std::vector<int>& candidates, double value) -> void {
        if (static_cast<int>(simplex.size()) - 1 >= max_dim) return;
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const int v = candidates[ci];
            double grown = value;
            for (int u : simplex) grown = std::max(grown, dm(u, v));
            simplex.push_back(v);
            emit(simplex, grown);
            std::vector<int> next;
            std::set_intersection(candidates.begin() + static_cast<std::ptrdiff_t>(ci) + 1,
                                  candidates.end(), above[v].begin(), above[v].end(),
                                  std::back_inserter(next));
            self(self, next, grown);
            simplex.pop_back();
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        simplex.assign(1, static_cast<int>(i));
        emit(simplex, 0.0);
        expand(expand, above[i], 0.0);
    }
    canonicalize(f);
    f.max_dim = std::max(f.max_dim, 0);
    return f;
}

namespace detail {

// Exact-coordinate deduplication; rep[u] is the first original index of
// unique point u.
struct UniquePoints {
    std::vector<std::array<double, 2>> pts;
    std::vector<int> rep;
    std::size_t merged = 0;
};

inline UniquePoints dedupe_2d(const PointCloud& cloud) {
    UniquePoints u;
    std::map<std::pair<double, double>, int> seen;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const std::pair<double, double> key{cloud(i, 0), cloud(i, 1)};
        if (seen.emplace(key, static_cast<int>(u.pts.size())).second) {
            u.pts.push_back({key.first, key.second});
            u.rep.push_back(static_cast<int>(i));
        } else {
            ++u.merged;
        }
    }
    return u;
}

inline constexpr int kGhost = -1;

inline std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a + 1)) << 32) |
           static_cast<std::uint32_t>(b + 1);
}

/// Incremental Bowyer-Watson over exact predicates.  Ghost triangles (a, b,
/// kGhost) carry the hull edge (a, b) traversed clockwise, so the outside of
/// the hull lies to the left of a->b; every directed edge, ghost edges
/// included, belongs to exactly one triangle.
inline std::vector<std::array<int, 3>> delaunay_unique(
    const std::vector<std::array<double, 2>>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) return {};

    int third = -1;
    int orient = 0;
    for (int i = 2; i < n; ++i) {
        orient = geom::orient2d(pts[0][0], pts[0][1], pts[1][0], pts[1][1], pts[i][0], pts[i][1]);
        if (orient != 0) {
            third = i;
            break;
        }
    }
    if (third < 0) return {};  // all collinear

    std::vector<std::array<int, 3>> tris;
    std::vector<char> alive;
    auto add = [&](int a, int b, int c) {
        tris.push_back({a, b, c});
        alive.push_back(1);
    };

    {
        int a = 0, b = 1, c = third;
        if (orient < 0) std::swap(b, c);
        add(a, b, c);
        add(b, a, kGhost);
        add(c, b, kGhost);
        add(a, c, kGhost);
    }

    const auto conflicts = [&](const std::array<int, 3>& t, double px, double py) {
        if (t[2] != kGhost) {
            return geom::incircle(pts[t[0]][0], pts[t[0]][1], pts[t[1]][0], pts[t[1]][1],
                                  pts[t[2]][0], pts[t[2]][1], px, py) > 0;
        }
        const int o =
            geom::orient2d(pts[t[0]][0], pts[t[0]][1], pts[t[1]][0], pts[t[1]][1], px, py);
        if (o != 0) return o > 0;
        return geom::in_open_segment(pts[t[0]][0], pts[t[0]][1], pts[t[1]][0], pts[t[1]][1], px,
                                     py);
    };

    std::vector<std::size_t> dead;
    std::unordered_set<std::uint64_t> dead_edges;
    for (int p = 2; p < n; ++p) {
        if (p == third) continue;
        const double px = pts[p][0], py = pts[p][1];

        dead.clear();
        dead_edges.clear();
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!alive[t] || !conflicts(tris[t], px, py)) continue;
            dead.push_back(t);
            const auto& tri = tris[t];
            dead_edges.insert(edge_key(tri[0], tri[1]));
            dead_edges.insert(edge_key(tri[1], tri[2]));
            dead_edges.insert(edge_key(tri[2], tri[0]));
        }
        if (dead.empty())
            throw guard_error("delaunay_2d: inserted point conflicts with no triangle");

        const std::size_t first_new = tris.size();
        for (std::size_t t : dead) {
            const std::array<int, 3> tri = tris[t];
            alive[t] = 0;
            const std::array<std::pair<int, int>, 3> edges{
                {{tri[0], tri[1]}, {tri[1], tri[2]}, {tri[2], tri[0]}}};
            for (const auto& [x, y] : edges) {
                if (dead_edges.count(edge_key(y, x))) continue;  // interior to the cavity
                if (x == kGhost)
                    add(y, p, kGhost);
                else if (y == kGhost)
                    add(p, x, kGhost);
                else
                    add(x, y, p);
            }
        }
        if (tris.size() == first_new)
            throw guard_error("delaunay_2d: cavity produced no boundary");
    }

    std::vector<std::array<int, 3>> out;
    for (std::size_t t = 0; t < tris.size(); ++t)
        if (alive[t] && tris[t][2] != kGhost) out.push_back(tris[t]);
    return out;
}

inline double dist2d(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

/// Circumradius of the triangle (a, b, c); degenerate triangles yield inf.
inline double circumradius(const std::array<double, 2>& a, const std::array<double, 2>& b,
                           const std::array<double, 2>& c) {
    const double la = detail::dist2d(b, c);
    const double lb = detail::dist2d(c, a);
    const double lc = detail::dist2d(a, b);
    const double cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    if (cross == 0.0) return kInf;
    return (la * lb * lc) / (2.0 * std::abs(cross));
}

/// Delaunay triangles as CCW index triples into the original cloud; exact
/// duplicates are merged first (first occurrence wins).  Fewer than 3 unique
/// points or a fully collinear cloud yields an empty list.
inline std::vector<std::array<int, 3>> delaunay_2d(const PointCloud& cloud,
                                                   BuildDiagnostics* diag = nullptr) {
    validate_cloud(cloud);
    if (cloud.dim != 2) throw parameter_error("delaunay_2d: ambient dimension must be 2");

    const auto u = detail::dedupe_2d(cloud);
    if (diag && u.merged > 0) {
        diag->duplicates_merged += u.merged;
        diag->warn("delaunay_2d: merged " + std::to_string(u.merged) + " duplicate points");
    }
    auto tris = detail::delaunay_unique(u.pts);
    for (auto& t : tris)
        for (int& v : t) v = u.rep[static_cast<std::size_t>(v)];
    return tris;
}

/// Standard planar alpha filtration in length units: vertices at 0, triangles
/// at their circumradius, edges at half their length when the open diametral
/// disk is empty of other points, otherwise at the smallest incident triangle
/// value.  Collinear clouds degrade to a path of consecutive edges.
inline Filtration alpha_filtration_2d(const PointCloud& cloud, BuildDiagnostics* diag = nullptr,
                                      std::size_t max_points = kDefaultAlphaGuard) {
    validate_cloud(cloud);
    if (cloud.dim != 2) throw parameter_error("alpha_filtration_2d: ambient dimension must be 2");
    if (cloud.size() > max_points)
        throw guard_error("alpha_filtration_2d: point budget exceeded; raise the cap or shrink "
                          "the cloud");

    const auto u = detail::dedupe_2d(cloud);
    if (diag && u.merged > 0) {
        diag->duplicates_merged += u.merged;
        diag->warn("alpha_filtration_2d: merged " + std::to_string(u.merged) +
                   " duplicate points");
    }
    const std::size_t nu = u.pts.size();

    Filtration f;
    for (std::size_t i = 0; i < nu; ++i)
        f.simplices.push_back(Simplex{{u.rep[i]}, 0.0});

    const auto tris = detail::delaunay_unique(u.pts);
    if (tris.empty()) {
        // Collinear (or tiny) cloud: connect consecutive points along the line.
        std::vector<int> order(nu);
        for (std::size_t i = 0; i < nu; ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return u.pts[static_cast<std::size_t>(a)] < u.pts[static_cast<std::size_t>(b)];
        });
        for (std::size_t i = 0; i + 1 < nu; ++i) {
            const int a = order[i], b = order[i + 1];
            std::vector<int> verts{u.rep[static_cast<std::size_t>(a)],
                                   u.rep[static_cast<std::size_t>(b)]};
            std::sort(verts.begin(), verts.end());
            f.simplices.push_back(Simplex{
                std::move(verts),
                detail::dist2d(u.pts[static_cast<std::size_t>(a)],
                               u.pts[static_cast<std::size_t>(b)]) / 2.0});
        }
        canonicalize(f);
        return f;
    }

    // Smallest incident triangle value per Delaunay edge (unique-point indices).
    std::map<std::pair<int, int>, double> edge_min;
    std::vector<double> tri_value(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const auto& tr = tris[t];
        const double r = circumradius(u.pts[static_cast<std::size_t>(tr[0])],
                                      u.pts[static_cast<std::size_t>(tr[1])],
                                      u.pts[static_cast<std::size_t>(tr[2])]);
        tri_value[t] = r;
        for (int e = 0; e < 3; ++e) {
            const int a = std::min(tr[e], tr[(e + 1) % 3]);
            const int b = std::max(tr[e], tr[(e + 1) % 3]);
            auto [it, fresh] = edge_min.try_emplace({a, b}, r);
            if (!fresh) it->second = std::min(it->second, r);
        }
    }

    for (const auto& [edge, incident_min] : edge_min) {
        const auto& pa = u.pts[static_cast<std::size_t>(edge.first)];
        const auto& pb = u.pts[static_cast<std::size_t>(edge.second)];
        const double mx = (pa[0] + pb[0]) / 2.0, my = (pa[1] + pb[1]) / 2.0;
        const double r2 = ((pa[0] - pb[0]) * (pa[0] - pb[0]) +
                           (pa[1] - pb[1]) * (pa[1] - pb[1])) / 4.0;
        bool gabriel = true;
        for (std::size_t k = 0; k < nu; ++k) {
            if (static_cast<int>(k) == edge.first || static_cast<int>(k) == edge.second) continue;
            const double dx = u.pts[k][0] - mx, dy = u.pts[k][1] - my;
            if (dx * dx + dy * dy < r2) {
                gabriel = false;
                break;
            }
        }
        // min() also repairs any last-ulp rounding so no edge outranks a coface.
        const double value =
            gabriel ? std::min(detail::dist2d(pa, pb) / 2.0, incident_min) : incident_min;
        std::vector<int> verts{u.rep[static_cast<std::size_t>(edge.first)],
                               u.rep[static_cast<std::size_t>(edge.second)]};
        std::sort(verts.begin(), verts.end());
        f.simplices.push_back(Simplex{std::move(verts), value});
    }

    for (std::size_t t = 0; t < tris.size(); ++t) {
        std::vector<int> verts{u.rep[static_cast<std::size_t>(tris[t][0])],
                               u.rep[static_cast<std::size_t>(tris[t][1])],
                               u.rep[static_cast<std::size_t>(tris[t][2])]};
        std::sort(verts.begin(), verts.end());
        f.simplices.push_back(Simplex{std::move(verts), tri_value[t]});
    }

    canonicalize(f);
    return f;
}

}  // namespace phtest
