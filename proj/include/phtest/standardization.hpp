#pragma once

#include "phtest/core.hpp"
#include "phtest/diagram_metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

namespace phtest {

/// Identifies one cloud configuration: statistics are only pooled when every
/// field matches.
struct PoolKey {
    std::string source = "null";  // generating family: "null" box or "circle"
    double param = 1.0;           // box side length or noise sigma
    std::size_t n = 0;            // points per cloud
    InvariantKind invariant = InvariantKind::max_bar_length;
    int dim = 1;

    friend bool operator==(const PoolKey&, const PoolKey&) = default;

    friend bool operator<(const PoolKey& a, const PoolKey& b) {
        return std::tie(a.source, a.param, a.n, a.invariant, a.dim) <
               std::tie(b.source, b.param, b.n, b.invariant, b.dim);
    }
};

inline std::string to_string(const PoolKey& key) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s-%g-n%zu-%s-h%d", key.source.c_str(), key.param, key.n,
                  invariant_name(key.invariant), key.dim);
    return buf;
}

struct NullPool {
    std::vector<double> values;  // sorted ascending
    PoolKey key;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t absent_count = 0;  // draws whose statistic was undefined
};

/// Sample mean/sd (n-1 denominator) plus the sorted ECDF support.  Rejects
/// constant pools and pools where most draws carried no statistic.
inline NullPool build_pool(std::vector<double> values, PoolKey key,
                           std::size_t absent_count = 0) {
    if (values.size() < 2)
        throw degenerate_pool_error("pool '" + to_string(key) + "' needs at least 2 values");
    if (values.size() < absent_count)
        throw degenerate_pool_error("pool '" + to_string(key) +
                                    "' dropped more than half of its draws as absent");
    NullPool pool;
    pool.key = std::move(key);
    pool.absent_count = absent_count;
    std::sort(values.begin(), values.end());
    pool.values = std::move(values);

    double sum = 0.0;
    for (double v : pool.values) sum += v;
    pool.mean = sum / static_cast<double>(pool.values.size());
    double ss = 0.0;
    for (double v : pool.values) ss += (v - pool.mean) * (v - pool.mean);
    pool.sd = std::sqrt(ss / static_cast<double>(pool.values.size() - 1));
    if (!(pool.sd > 0.0))
        throw degenerate_pool_error("pool '" + to_string(pool.key) + "' has no spread");
    return pool;
}

struct StandardizedScore {
    double raw = 0.0;
    double z = 0.0;
    double ecdf_quantile = 0.0;  // fraction of pool values <= raw
    PoolKey key;
};

inline StandardizedScore studentize(double x, const NullPool& pool) {
    StandardizedScore s;
    s.raw = x;
    s.z = (x - pool.mean) / pool.sd;
    const auto upper = std::upper_bound(pool.values.begin(), pool.values.end(), x);
    s.ecdf_quantile = static_cast<double>(upper - pool.values.begin()) /
                      static_cast<double>(pool.values.size());
    s.key = pool.key;
    return s;
}

/// The pool's own values studentized against itself (sorted, mean 0, sd 1).
inline std::vector<double> studentized_values(const NullPool& pool) {
    std::vector<double> z(pool.values.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (pool.values[i] - pool.mean) / pool.sd;
    return z;
}

/// Two-sample Kolmogorov-Smirnov statistic over sorted samples.
inline double two_sample_ks(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw parameter_error("KS statistic needs non-empty samples");
    double best = 0.0;
    std::size_t i = 0, j = 0;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= t) ++i;
        while (j < b.size() && b[j] <= t) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na -
                                       static_cast<double>(j) / nb));
    }
    return best;
}

/// Nearest-rank percentile pairs (1..99) of two sorted samples.
inline std::vector<std::array<double, 2>> qq_points(const std::vector<double>& a,
                                                    const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw parameter_error("QQ points need non-empty samples");
    std::vector<std::array<double, 2>> pts;
    pts.reserve(99);
    for (int p = 1; p <= 99; ++p) {
        const auto rank = [p](std::size_t n) {
            const auto r = static_cast<std::size_t>(
                std::ceil(static_cast<double>(p) / 100.0 * static_cast<double>(n)));
            return std::min(n - 1, r > 0 ? r - 1 : 0);
        };
        pts.push_back({a[rank(a.size())], b[rank(b.size())]});
    }
    return pts;
}

inline double pearson_correlation(const std::vector<std::array<double, 2>>& pts) {
    if (pts.size() < 2) throw parameter_error("correlation needs at least 2 points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p[0];
        my += p[1];
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (const auto& p : pts) {
        sxy += (p[0] - mx) * (p[1] - my);
        sxx += (p[0] - mx) * (p[0] - mx);
        syy += (p[1] - my) * (p[1] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct ExchangeabilityPair {
    std::size_t i = 0, j = 0;  // indices into pool_keys
    double ks = 0.0;
    double qq_correlation = 0.0;
    std::vector<std::array<double, 2>> qq;
};

struct ExchangeabilityReport {
    std::vector<std::string> pool_keys;                  // included pools, in order
    std::vector<std::vector<double>> studentized;        // sorted z-scores per pool
    std::vector<ExchangeabilityPair> pairs;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kMinExchangeablePool = 50;

/// Pairwise KS statistics and QQ point sets between studentized pools;
/// undersized pools are dropped with a warning.
inline ExchangeabilityReport exchangeability_report(const std::vector<NullPool>& pools) {
    ExchangeabilityReport report;
    std::vector<const NullPool*> kept;
    for (const auto& pool : pools) {
        if (pool.values.size() < kMinExchangeablePool) {
            report.warnings.push_back("pool '" + to_string(pool.key) + "' excluded: only " +
                                      std::to_string(pool.values.size()) + " values");
            continue;
        }
        kept.push_back(&pool);
    }
    if (kept.size() < 2)
        throw parameter_error("exchangeability report needs at least 2 usable pools");

    for (const auto* pool : kept) {
        report.pool_keys.push_back(to_string(pool->key));
        report.studentized.push_back(studentized_values(*pool));
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t j = i + 1; j < kept.size(); ++j) {
            ExchangeabilityPair pair;
            pair.i = i;
            pair.j = j;
            pair.ks = two_sample_ks(report.studentized[i], report.studentized[j]);
            pair.qq = qq_points(report.studentized[i], report.studentized[j]);
            pair.qq_correlation = pearson_correlation(pair.qq);
            report.pairs.push_back(std::move(pair));
        }
    }
    return report;
}

}  // namespace phtest
