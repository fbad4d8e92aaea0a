#pragma once

#include "phtest/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace phtest {

struct PersistentBettiQuery {
    int q = 0;
    double r = 0.0;
    double s = 0.0;
};

inline void validate_query(const PersistentBettiQuery& query) {
    if (query.q < 0) throw parameter_error("persistent Betti query: dimension must be >= 0");
    if (!(query.r >= 0.0) || !(query.r <= query.s) || !std::isfinite(query.s))
        throw parameter_error("persistent Betti query requires 0 <= r <= s < inf");
}

namespace detail {

struct VertexVectorHash {
    std::size_t operator()(const std::vector<int>& v) const {
        std::size_t h = 1469598103934665603ULL;
        for (int x : v) {
            h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(x));
            h *= 1099511628211ULL;
        }
        return h;
    }
};

/// Simplices in canonical order plus facet columns; shared by the reduction
/// and the rank oracle.  Throws input_error on duplicate simplices or a
/// missing/later-valued face.
struct IndexedFiltration {
    std::vector<const Simplex*> ordered;
    std::vector<std::vector<int>> boundary;  // facet positions, ascending
    int max_dim = 0;

    explicit IndexedFiltration(const Filtration& f) {
        const std::size_t m = f.simplices.size();
        ordered.resize(m);
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return simplex_order(f.simplices[a], f.simplices[b]);
        });

        std::unordered_map<std::vector<int>, int, VertexVectorHash> position;
        position.reserve(m * 2);
        for (std::size_t i = 0; i < m; ++i) {
            const Simplex& s = f.simplices[order[i]];
            if (s.vertices.empty() || !std::is_sorted(s.vertices.begin(), s.vertices.end()) ||
                std::adjacent_find(s.vertices.begin(), s.vertices.end()) != s.vertices.end())
                throw input_error("filtration contains a malformed simplex");
            if (!(s.value >= 0.0) || !std::isfinite(s.value))
                throw input_error("filtration value must be finite and nonnegative");
            if (!position.emplace(s.vertices, static_cast<int>(i)).second)
                throw input_error("filtration contains a duplicate simplex");
            ordered[i] = &s;
            max_dim = std::max(max_dim, s.dim());
        }

        boundary.resize(m);
        std::vector<int> facet;
        for (std::size_t i = 0; i < m; ++i) {
            const Simplex& s = *ordered[i];
            if (s.dim() == 0) continue;
            auto& col = boundary[i];
            col.reserve(s.vertices.size());
            for (std::size_t drop = 0; drop < s.vertices.size(); ++drop) {
                facet = s.vertices;
                facet.erase(facet.begin() + static_cast<std::ptrdiff_t>(drop));
                const auto it = position.find(facet);
                if (it == position.end())
                    throw input_error("filtration is missing a face of one of its simplices");
                if (ordered[static_cast<std::size_t>(it->second)]->value > s.value)
                    throw input_error("filtration value of a face exceeds its coface");
                col.push_back(it->second);
            }
            std::sort(col.begin(), col.end());
        }
    }
};

inline void xor_into(std::vector<int>& target, const std::vector<int>& other) {
    std::vector<int> merged;
    merged.reserve(target.size() + other.size());
    std::set_symmetric_difference(target.begin(), target.end(), other.begin(), other.end(),
                                  std::back_inserter(merged));
    target.swap(merged);
}

}  // namespace detail

/// Persistence over Z/2 by left-to-right column reduction with the clearing
/// optimization (dimensions processed downward).  Zero-length pairs are kept.
inline PersistenceDiagram reduce(const Filtration& filtration) {
    const detail::IndexedFiltration ix(filtration);
    const std::size_t m = ix.ordered.size();

    std::vector<int> pivot_owner(m, -1);
    std::vector<int> killer(m, -1);
    std::vector<char> cleared(m, 0);
    std::vector<char> is_death(m, 0);
    std::vector<std::vector<int>> reduced(m);

    for (int d = ix.max_dim; d >= 1; --d) {
        for (std::size_t i = 0; i < m; ++i) {
            if (ix.ordered[i]->dim() != d || cleared[i]) continue;
            std::vector<int> col = ix.boundary[i];
            while (!col.empty()) {
                const int low = col.back();
                const int owner = pivot_owner[static_cast<std::size_t>(low)];
                if (owner < 0) {
                    pivot_owner[static_cast<std::size_t>(low)] = static_cast<int>(i);
                    killer[static_cast<std::size_t>(low)] = static_cast<int>(i);
                    cleared[static_cast<std::size_t>(low)] = 1;
                    is_death[i] = 1;
                    break;
                }
                detail::xor_into(col, reduced[static_cast<std::size_t>(owner)]);
            }
            reduced[i] = std::move(col);
        }
    }

    PersistenceDiagram diagram;
    for (std::size_t i = 0; i < m; ++i) {
        const Simplex& s = *ix.ordered[i];
        if (cleared[i]) {
            const Simplex& k = *ix.ordered[static_cast<std::size_t>(killer[i])];
            diagram.points.push_back(DiagramPoint{s.value, k.value, s.dim()});
        } else if (!is_death[i]) {
            diagram.points.push_back(DiagramPoint{s.value, kInf, s.dim()});
        }
    }
    return diagram;
}

/// Count of dimension-q classes born by r and still alive after s.
inline std::size_t persistent_betti(const PersistenceDiagram& diagram,
                                    const PersistentBettiQuery& query) {
    validate_query(query);
    std::size_t count = 0;
    for (const auto& p : diagram.points)
        count += (p.dim == query.q && p.birth <= query.r && p.death > query.s);
    return count;
}

namespace detail {

/// GF(2) column vectors in 64-bit blocks with pivot-tracking elimination.
class Gf2Eliminator {
public:
    static void set_bit(std::vector<std::uint64_t>& col, std::size_t row) {
        col[row / 64] ^= (std::uint64_t{1} << (row % 64));
    }

    /// Reduces col in place against the accepted pivots; returns true and
    /// keeps it when independent, returns false when it vanishes.
    bool add(std::vector<std::uint64_t> col) {
        for (;;) {
            const int p = top_bit(col);
            if (p < 0) return false;
            const auto it = pivots_.find(p);
            if (it == pivots_.end()) {
                pivots_.emplace(p, std::move(col));
                return true;
            }
            const auto& other = it->second;
            for (std::size_t b = 0; b < col.size(); ++b) col[b] ^= other[b];
        }
    }

    std::size_t rank() const { return pivots_.size(); }

private:
    static int top_bit(const std::vector<std::uint64_t>& col) {
        for (std::size_t b = col.size(); b-- > 0;) {
            if (col[b] == 0) continue;
            return static_cast<int>(b * 64 + 63 - static_cast<std::size_t>(
                                                      std::countl_zero(col[b])));
        }
        return -1;
    }

    std::unordered_map<int, std::vector<std::uint64_t>> pivots_;
};

}  // namespace detail

inline constexpr std::size_t kRankOracleGuard = 4096;

/// Independent evaluation of the dimension-q persistent Betti number between
/// scales r and s from boundary-matrix ranks alone:
///   beta = rank([kernel basis of d_q at r | d_{q+1} columns at s])
///        - rank(d_{q+1} columns at s).
inline std::size_t betti_rank_oracle(const Filtration& filtration,
                                     const PersistentBettiQuery& query) {
    validate_query(query);
    if (filtration.simplices.size() > kRankOracleGuard)
        throw guard_error("betti_rank_oracle: filtration too large for the dense oracle");

    const detail::IndexedFiltration ix(filtration);
    const std::size_t m = ix.ordered.size();
    const int q = query.q;

    // Row space: q-simplices present at scale s (those at scale r form a subset).
    std::vector<int> row_of(m, -1);
    std::size_t q_rows = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const Simplex& s = *ix.ordered[i];
        if (s.dim() != q || s.value > query.s) continue;
        row_of[i] = static_cast<int>(q_rows++);
    }
    const std::size_t blocks = (q_rows + 63) / 64 + (q_rows == 0);

    // Kernel basis of the q-boundary over the scale-r complex, tracked through
    // column elimination of [d_q; I].
    std::vector<std::vector<std::uint64_t>> kernel;
    {
        struct Tracked {
            std::vector<std::uint64_t> col;
            std::vector<std::uint64_t> combo;
        };
        std::unordered_map<int, Tracked> pivots;
        for (std::size_t i = 0; i < m; ++i) {
            const Simplex& s = *ix.ordered[i];
            if (s.dim() != q || s.value > query.r) continue;
            Tracked t;
            t.col.assign((m + 63) / 64, 0);
            t.combo.assign(blocks, 0);
            if (q > 0)
                for (int f : ix.boundary[i])
                    detail::Gf2Eliminator::set_bit(t.col, static_cast<std::size_t>(f));
            detail::Gf2Eliminator::set_bit(t.combo,
                                           static_cast<std::size_t>(row_of[i]));
            for (;;) {
                int p = -1;
                for (std::size_t b = t.col.size(); b-- > 0;)
                    if (t.col[b] != 0) {
                        p = static_cast<int>(
                            b * 64 + 63 -
                            static_cast<std::size_t>(std::countl_zero(t.col[b])));
                        break;
                    }
                if (p < 0) {
                    kernel.push_back(std::move(t.combo));
                    break;
                }
                const auto it = pivots.find(p);
                if (it == pivots.end()) {
                    pivots.emplace(p, std::move(t));
                    break;
                }
                for (std::size_t b = 0; b < t.col.size(); ++b) t.col[b] ^= it->second.col[b];
                for (std::size_t b = 0; b < t.combo.size(); ++b)
                    t.combo[b] ^= it->second.combo[b];
            }
        }
    }

    // Boundary columns of (q+1)-simplices present at scale s, in the same rows.
    std::vector<std::vector<std::uint64_t>> bgens;
    for (std::size_t i = 0; i < m; ++i) {
        const Simplex& s = *ix.ordered[i];
        if (s.dim() != q + 1 || s.value > query.s) continue;
        std::vector<std::uint64_t> col(blocks, 0);
        for (int f : ix.boundary[i])
            detail::Gf2Eliminator::set_bit(col, static_cast<std::size_t>(
                                                    row_of[static_cast<std::size_t>(f)]));
        bgens.push_back(std::move(col));
    }

    detail::Gf2Eliminator b_only;
    for (const auto& col : bgens) b_only.add(col);
    const std::size_t rank_b = b_only.rank();

    detail::Gf2Eliminator joint;
    for (const auto& col : bgens) joint.add(col);
    for (const auto& col : kernel) joint.add(col);

    return joint.rank() - rank_b;
}

}  // namespace phtest
