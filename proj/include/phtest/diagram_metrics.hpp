#pragma once

#include "phtest/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <vector>

namespace phtest {

/// Requested statistic has no defined value on this diagram (no positive
/// finite bar in the dimension).
struct absent_statistic_error : input_error {
    using input_error::input_error;
};

enum class InvariantKind { max_bar_length, log_max_bar_length };

struct InvariantSpec {
    InvariantKind kind = InvariantKind::max_bar_length;
    int dim = 1;
};

inline const char* invariant_name(InvariantKind kind) {
    return kind == InvariantKind::max_bar_length ? "length" : "log-length";
}

/// Longest finite bar in the dimension; 0 when the diagram has none.
inline double max_bar_length(const PersistenceDiagram& diagram, int dim) {
    double best = 0.0;
    for (const auto& p : diagram.points)
        if (p.dim == dim && p.finite()) best = std::max(best, p.length());
    return best;
}

/// Natural log of max_bar_length; requires a positive finite bar.
inline double log_max_bar_length(const PersistenceDiagram& diagram, int dim) {
    const double len = max_bar_length(diagram, dim);
    if (len <= 0.0)
        throw absent_statistic_error("log bar length undefined: no positive finite bar");
    return std::log(len);
}

/// nullopt marks an absent statistic (log invariant on a barless diagram).
inline std::optional<double> invariant_value(const PersistenceDiagram& diagram,
                                             const InvariantSpec& spec) {
    const double len = max_bar_length(diagram, spec.dim);
    if (spec.kind == InvariantKind::max_bar_length) return len;
    if (len <= 0.0) return std::nullopt;
    return std::log(len);
}

struct MatchingCost {
    double p = 2.0;      // matching exponent
    double q_exp = 2.0;  // outer exponent of the two-group loss
};

namespace detail {

inline double linf_dist(const DiagramPoint& a, const DiagramPoint& b) {
    return std::max(std::abs(a.birth - b.birth), std::abs(a.death - b.death));
}

inline double diag_dist(const DiagramPoint& a) { return (a.death - a.birth) / 2.0; }

struct DimSplit {
    std::vector<DiagramPoint> finite;
    std::vector<double> infinite_births;
};

inline DimSplit split_dim(const PersistenceDiagram& d, int dim) {
    DimSplit s;
    for (const auto& p : d.points) {
        if (p.dim != dim) continue;
        if (p.finite())
            s.finite.push_back(p);
        else
            s.infinite_births.push_back(p.birth);
    }
    std::sort(s.infinite_births.begin(), s.infinite_births.end());
    return s;
}

/// Hopcroft-Karp maximum matching on an adjacency list (left -> right).
inline std::size_t max_bipartite_matching(const std::vector<std::vector<int>>& adj,
                                          std::size_t n_right) {
    const std::size_t n_left = adj.size();
    constexpr int kFree = -1;
    std::vector<int> match_l(n_left, kFree), match_r(n_right, kFree);
    std::vector<int> layer(n_left);
    std::size_t matched = 0;

    for (;;) {
        std::queue<int> frontier;
        for (std::size_t u = 0; u < n_left; ++u) {
            if (match_l[u] == kFree) {
                layer[u] = 0;
                frontier.push(static_cast<int>(u));
            } else {
                layer[u] = -1;
            }
        }
        bool reachable = false;
        while (!frontier.empty()) {
            const int u = frontier.front();
            frontier.pop();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                const int w = match_r[static_cast<std::size_t>(v)];
                if (w == kFree) {
                    reachable = true;
                } else if (layer[static_cast<std::size_t>(w)] < 0) {
                    layer[static_cast<std::size_t>(w)] = layer[static_cast<std::size_t>(u)] + 1;
                    frontier.push(w);
                }
            }
        }
        if (!reachable) break;

        auto augment = [&](auto&& self, int u) -> bool {
            for (int v : adj[static_cast<std::size_t>(u)]) {
                const int w = match_r[static_cast<std::size_t>(v)];
                if (w == kFree ||
                    (layer[static_cast<std::size_t>(w)] == layer[static_cast<std::size_t>(u)] + 1 &&
                     self(self, w))) {
                    match_l[static_cast<std::size_t>(u)] = v;
                    match_r[static_cast<std::size_t>(v)] = u;
                    return true;
                }
            }
            layer[static_cast<std::size_t>(u)] = -1;
            return false;
        };
        for (std::size_t u = 0; u < n_left; ++u)
            if (match_l[u] == kFree && augment(augment, static_cast<int>(u))) ++matched;
    }
    return matched;
}

/// Perfect-matching feasibility at threshold c for the diagonal-augmented
/// bottleneck graph: reals pair when their cost fits, each real may retire to
/// its own diagonal projection, projections pair among themselves freely.
inline bool bottleneck_feasible(const std::vector<DiagramPoint>& P,
                                const std::vector<DiagramPoint>& Q, double c) {
    const std::size_t n = P.size(), m = Q.size();
    // Left: n reals then m projections of Q.  Right: m reals then n projections of P.
    std::vector<std::vector<int>> adj(n + m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j)
            if (linf_dist(P[i], Q[j]) <= c) adj[i].push_back(static_cast<int>(j));
        if (diag_dist(P[i]) <= c) adj[i].push_back(static_cast<int>(m + i));
    }
    for (std::size_t j = 0; j < m; ++j) {
        auto& row = adj[n + j];
        if (diag_dist(Q[j]) <= c) row.push_back(static_cast<int>(j));
        for (std::size_t i = 0; i < n; ++i) row.push_back(static_cast<int>(m + i));
    }
    return max_bipartite_matching(adj, n + m) == n + m;
}

/// Cost of pairing equal-count infinite bars (sorted births), as max or p-sum.
inline double infinite_part_cost(const std::vector<double>& a, const std::vector<double>& b,
                                 double p_or_max) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (p_or_max <= 0.0)
            acc = std::max(acc, d);
        else
            acc += std::pow(d, p_or_max);
    }
    return acc;
}

/// Exact min-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials).
inline double hungarian_min_cost(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    if (n == 0) return 0.0;
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0),
        v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = a[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(
                                       j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
        total += a[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)]
                  [static_cast<std::size_t>(j - 1)];
    return total;
}

}  // namespace detail

/// Exact bottleneck distance with diagonal augmentation (L-inf ground metric);
/// infinity when the diagrams disagree on infinite-bar counts.
inline double bottleneck_distance(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                  int dim) {
    const auto A = detail::split_dim(d1, dim);
    const auto B = detail::split_dim(d2, dim);
    if (A.infinite_births.size() != B.infinite_births.size()) return kInf;
    const double inf_cost = detail::infinite_part_cost(A.infinite_births, B.infinite_births, 0.0);

    std::vector<double> candidates{0.0};
    for (const auto& p : A.finite) candidates.push_back(detail::diag_dist(p));
    for (const auto& q : B.finite) candidates.push_back(detail::diag_dist(q));
    for (const auto& p : A.finite)
        for (const auto& q : B.finite) candidates.push_back(detail::linf_dist(p, q));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::size_t lo = 0, hi = candidates.size() - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (detail::bottleneck_feasible(A.finite, B.finite, candidates[mid]))
            hi = mid;
        else
            lo = mid + 1;
    }
    return std::max(candidates[lo], inf_cost);
}

/// Exact p-Wasserstein distance with diagonal augmentation (L-inf ground
/// metric); infinity when infinite-bar counts disagree.
inline double wasserstein_distance(const PersistenceDiagram& d1, const PersistenceDiagram& d2,
                                   int dim, const MatchingCost& cost) {
    if (!std::isfinite(cost.p) || cost.p < 1.0)
        throw parameter_error("wasserstein_distance: matching exponent must be finite and >= 1");
    const auto A = detail::split_dim(d1, dim);
    const auto B = detail::split_dim(d2, dim);
    if (A.infinite_births.size() != B.infinite_births.size()) return kInf;

    const std::size_t n = A.finite.size(), m = B.finite.size();
    double total = detail::infinite_part_cost(A.infinite_births, B.infinite_births, cost.p);
    if (n + m > 0) {
        std::vector<std::vector<double>> a(n + m, std::vector<double>(n + m, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j)
                a[i][j] = std::pow(detail::linf_dist(A.finite[i], B.finite[j]), cost.p);
            const double dd = std::pow(detail::diag_dist(A.finite[i]), cost.p);
            for (std::size_t j = m; j < n + m; ++j) a[i][j] = dd;
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double dd = std::pow(detail::diag_dist(B.finite[j]), cost.p);
            for (std::size_t i = n; i < n + m; ++i) a[i][j] = dd;
        }
        total += detail::hungarian_min_cost(a);
    }
    return std::pow(total, 1.0 / cost.p);
}

/// All pairwise p-Wasserstein distances among a set of diagrams.
inline std::vector<std::vector<double>> pairwise_wasserstein(
    const std::vector<PersistenceDiagram>& diagrams, int dim, const MatchingCost& cost) {
    const std::size_t n = diagrams.size();
    std::vector<std::vector<double>> dm(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dm[i][j] = dm[j][i] = wasserstein_distance(diagrams[i], diagrams[j], dim, cost);
    return dm;
}

/// Two-group loss from a precomputed distance matrix: mean of d^q over
/// ordered in-group pairs, averaged with weight 1/(2 group_size (size-1)).
inline double rt_loss_from_matrix(const std::vector<std::vector<double>>& dm,
                                  const std::vector<int>& group1, const std::vector<int>& group2,
                                  double q_exp) {
    if (group1.size() < 2 || group2.size() < 2)
        throw parameter_error("two-group loss needs at least 2 diagrams per group");
    if (!(q_exp >= 1.0)) throw parameter_error("two-group loss: outer exponent must be >= 1");
    auto in_group = [&](const std::vector<int>& g) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (i == j) continue;
                acc += std::pow(dm[static_cast<std::size_t>(g[i])][static_cast<std::size_t>(g[j])],
                                q_exp);
            }
        const double size = static_cast<double>(g.size());
        return acc / (2.0 * size * (size - 1.0));
    };
    return in_group(group1) + in_group(group2);
}

/// In-group Wasserstein loss of the two groups of diagrams.
inline double rt_loss(const std::vector<PersistenceDiagram>& group1,
                      const std::vector<PersistenceDiagram>& group2, int dim,
                      const MatchingCost& cost) {
    if (group1.size() < 2 || group2.size() < 2)
        throw parameter_error("two-group loss needs at least 2 diagrams per group");
    std::vector<PersistenceDiagram> all;
    all.reserve(group1.size() + group2.size());
    for (const auto& d : group1) all.push_back(d);
    for (const auto& d : group2) all.push_back(d);
    const auto dm = pairwise_wasserstein(all, dim, cost);
    std::vector<int> idx1(group1.size()), idx2(group2.size());
    for (std::size_t i = 0; i < idx1.size(); ++i) idx1[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < idx2.size(); ++j)
        idx2[j] = static_cast<int>(group1.size() + j);
    return rt_loss_from_matrix(dm, idx1, idx2, cost.q_exp);
}

}  // namespace phtest
