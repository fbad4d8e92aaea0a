#pragma once

#include "phtest/complexes.hpp"
#include "phtest/core.hpp"
#include "phtest/diagram_metrics.hpp"
#include "phtest/null_model.hpp"
#include "phtest/persistence.hpp"
#include "phtest/rng.hpp"
#include "phtest/standardization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phtest {

inline constexpr std::uint64_t kStreamPermutation = 4;
inline constexpr std::uint64_t kStreamBattery = 5;

/// One hypothesis unit: the observed invariant plus its own simulated null
/// rounds.  nullopt marks an absent statistic (kept so round indices stay
/// aligned across units).
struct ScoreEntry {
    std::string label;
    std::optional<double> observed;
    std::vector<std::optional<double>> nulls;
};

struct ScoreBattery {
    std::vector<ScoreEntry> entries;
    InvariantSpec invariant;
};

enum class Procedure {
    fwer_max,
    fdr_cutoff,
    bonferroni,
    holm,
    hochberg,
    two_sample_perm,
    two_sample_fdr
};

inline const char* procedure_name(Procedure p) {
    switch (p) {
        case Procedure::fwer_max: return "fwer-max";
        case Procedure::fdr_cutoff: return "fdr-cutoff";
        case Procedure::bonferroni: return "bonferroni";
        case Procedure::holm: return "holm";
        case Procedure::hochberg: return "hochberg";
        case Procedure::two_sample_perm: return "two-sample-perm";
        case Procedure::two_sample_fdr: return "two-sample-fdr";
    }
    return "unknown";
}

struct HypothesisRecord {
    std::string label;
    double raw = kNaN;
    double z = kNaN;
    bool rejected = false;
    bool excluded = false;         // statistic absent, unit not tested
    bool flagged_post_hoc = false; // z above the simulated max quantile
};

struct DecisionReport {
    Procedure procedure = Procedure::fwer_max;
    double alpha = 0.0;
    std::vector<HypothesisRecord> hypotheses;
    std::size_t rejections = 0;
    double global_p = kNaN;      // max-statistic test and permutation tests
    std::size_t rank = 0;        // rank of the observed max among round maxima
    int argmax_index = -1;       // hypothesis attaining the observed max
    double cutoff = kNaN;        // score cutoff (z units) or loss cutoff
    double min_qhat = kNaN;      // smallest achievable FDR across cutoffs
    double achieved_qhat = kNaN; // estimated FDR at the chosen cutoff
    std::vector<std::string> warnings;
};

namespace detail {

struct StudentizedBattery {
    std::vector<std::size_t> kept;           // indices into battery.entries
    std::vector<double> x;                   // observed z per kept entry
    std::vector<std::vector<std::optional<double>>> z_nulls;  // per kept entry, per round
    std::size_t rounds = 0;
};

/// Studentizes every unit against its own null rounds; units with an absent
/// observed statistic are dropped (recorded on the report).
inline StudentizedBattery studentize_battery(const ScoreBattery& battery,
                                             DecisionReport& report) {
    if (battery.entries.empty()) throw parameter_error("battery has no hypotheses");
    const std::size_t rounds = battery.entries.front().nulls.size();
    if (rounds < 1) throw parameter_error("battery needs at least one simulation round");

    StudentizedBattery out;
    out.rounds = rounds;
    for (std::size_t i = 0; i < battery.entries.size(); ++i) {
        const auto& entry = battery.entries[i];
        if (entry.nulls.size() != rounds)
            throw parameter_error("battery units disagree on simulation round count");

        HypothesisRecord record;
        record.label = entry.label.empty() ? "unit-" + std::to_string(i) : entry.label;
        if (!entry.observed.has_value()) {
            record.excluded = true;
            report.hypotheses.push_back(std::move(record));
            report.warnings.push_back("unit '" + report.hypotheses.back().label +
                                      "' excluded: observed statistic absent");
            continue;
        }

        std::vector<double> retained;
        std::size_t absent = 0;
        for (const auto& v : entry.nulls)
            if (v.has_value())
                retained.push_back(*v);
            else
                ++absent;
        PoolKey key;
        key.source = record.label;
        key.n = retained.size();
        key.invariant = battery.invariant.kind;
        key.dim = battery.invariant.dim;
        const NullPool pool = build_pool(std::move(retained), std::move(key), absent);

        record.raw = *entry.observed;
        record.z = studentize(*entry.observed, pool).z;
        out.kept.push_back(report.hypotheses.size());
        out.x.push_back(record.z);
        auto& zn = out.z_nulls.emplace_back();
        zn.reserve(rounds);
        for (const auto& v : entry.nulls) {
            if (v.has_value())
                zn.push_back((*v - pool.mean) / pool.sd);
            else
                zn.push_back(std::nullopt);
        }
        report.hypotheses.push_back(std::move(record));
    }
    if (out.x.empty())
        throw parameter_error("battery has no testable hypotheses after exclusions");
    return out;
}

}  // namespace detail

/// Max-statistic family-wise test: studentize per unit, take per-round maxima
/// across units, and rank the observed max conservatively among them.  The
/// p-value lives on the grid {1/N, ..., 1} with N = rounds + 1.
inline DecisionReport fwer_max_from_scores(const ScoreBattery& battery, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0, 1)");
    DecisionReport report;
    report.procedure = Procedure::fwer_max;
    report.alpha = alpha;

    const auto st = detail::studentize_battery(battery, report);

    std::vector<double> round_max;
    round_max.reserve(st.rounds);
    for (std::size_t j = 0; j < st.rounds; ++j) {
        double best = -kInf;
        bool seen = false;
        for (const auto& zn : st.z_nulls) {
            if (!zn[j].has_value()) continue;
            best = std::max(best, *zn[j]);
            seen = true;
        }
        if (seen) round_max.push_back(best);
    }
    if (round_max.empty()) throw parameter_error("no usable simulation rounds");

    const auto x_it = std::max_element(st.x.begin(), st.x.end());
    const double x = *x_it;
    const std::size_t below = static_cast<std::size_t>(
        std::count_if(round_max.begin(), round_max.end(), [&](double y) { return y < x; }));
    const std::size_t n_eff = round_max.size() + 1;
    report.rank = below + 1;
    report.global_p = static_cast<double>(n_eff - report.rank + 1) / static_cast<double>(n_eff);
    report.argmax_index = static_cast<int>(
        st.kept[static_cast<std::size_t>(x_it - st.x.begin())]);

    const bool reject = report.global_p <= alpha;

    // Post-hoc unit flags against the simulated max distribution's upper
    // alpha quantile; diagnostic only, no per-unit FWER guarantee.
    std::vector<double> sorted_max = round_max;
    std::sort(sorted_max.begin(), sorted_max.end());
    const auto qrank = static_cast<std::size_t>(std::ceil(
        (1.0 - alpha) * static_cast<double>(sorted_max.size())));
    const double threshold = sorted_max[std::min(sorted_max.size() - 1, qrank > 0 ? qrank - 1 : 0)];
    for (std::size_t k = 0; k < st.kept.size(); ++k) {
        auto& record = report.hypotheses[st.kept[k]];
        record.flagged_post_hoc = st.x[k] > threshold;
        record.rejected = reject && record.flagged_post_hoc;
        report.rejections += record.rejected;
    }
    if (reject && report.rejections == 0) {
        auto& record = report.hypotheses[static_cast<std::size_t>(report.argmax_index)];
        record.rejected = true;
        report.rejections = 1;
    }
    return report;
}

/// Pooled-cutoff FDR test: candidate cutoffs are the observed scores; the
/// estimated FDR at c is the pooled null exceedance fraction over the
/// observed exceedance fraction.  Rejects at the smallest qualifying cutoff.
inline DecisionReport fdr_cutoff_from_scores(const ScoreBattery& battery, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0, 1)");
    DecisionReport report;
    report.procedure = Procedure::fdr_cutoff;
    report.alpha = alpha;

    const auto st = detail::studentize_battery(battery, report);
    const double k_count = static_cast<double>(st.x.size());

    std::vector<double> pooled;
    for (const auto& zn : st.z_nulls)
        for (const auto& v : zn)
            if (v.has_value()) pooled.push_back(*v);
    if (pooled.empty()) throw parameter_error("no usable simulation rounds");
    std::sort(pooled.begin(), pooled.end());
    const double pool_size = static_cast<double>(pooled.size());

    std::vector<double> candidates = st.x;
    std::sort(candidates.begin(), candidates.end());

    double chosen = kNaN;
    report.min_qhat = kInf;
    for (double c : candidates) {
        const double v_frac =
            static_cast<double>(pooled.end() -
                                std::lower_bound(pooled.begin(), pooled.end(), c)) /
            pool_size;
        const double r_frac = static_cast<double>(std::count_if(
                                  st.x.begin(), st.x.end(), [&](double x) { return x >= c; })) /
                              k_count;
        const double qhat = v_frac / r_frac;
        if (qhat < report.min_qhat) report.min_qhat = qhat;
        if (std::isnan(chosen) && qhat <= alpha) {
            chosen = c;
            report.achieved_qhat = qhat;
        }
    }

    if (!std::isnan(chosen)) {
        report.cutoff = chosen;
        for (std::size_t k = 0; k < st.kept.size(); ++k) {
            auto& record = report.hypotheses[st.kept[k]];
            record.rejected = st.x[k] >= chosen;
            report.rejections += record.rejected;
        }
    }
    return report;
}

/// Builds a battery from 2-D clouds: each cloud's statistic plus rounds - 1
/// null draws from its own estimated box, all through the alpha pipeline.
inline ScoreBattery build_score_battery(const std::vector<PointCloud>& clouds,
                                        const InvariantSpec& invariant, std::size_t n_sims,
                                        std::uint64_t seed_root) {
    if (clouds.empty()) throw parameter_error("battery needs at least one cloud");
    if (n_sims < 2) throw parameter_error("battery needs a simulation count of at least 2");

    ScoreBattery battery;
    battery.invariant = invariant;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        const auto& cloud = clouds[i];
        ScoreEntry entry;
        entry.label = cloud.label.empty() ? "cloud-" + std::to_string(i) : cloud.label;

        const PersistenceDiagram diagram = reduce(alpha_filtration_2d(cloud));
        entry.observed = invariant_value(diagram, invariant);

        NullModelSpec spec;
        spec.box = estimate_box(cloud);
        spec.n = cloud.size();
        spec.seed_root = rng::derive(seed_root, {kStreamBattery, i});
        entry.nulls.reserve(n_sims - 1);
        for (std::size_t j = 0; j + 1 < n_sims; ++j) {
            const PointCloud draw = sample_uniform(spec, j);
            entry.nulls.push_back(invariant_value(reduce(alpha_filtration_2d(draw)), invariant));
        }
        battery.entries.push_back(std::move(entry));
    }
    return battery;
}

inline DecisionReport fwer_max_test(const std::vector<PointCloud>& clouds,
                                    const InvariantSpec& invariant, double alpha,
                                    std::size_t n_sims, std::uint64_t seed_root) {
    return fwer_max_from_scores(build_score_battery(clouds, invariant, n_sims, seed_root), alpha);
}

inline DecisionReport fdr_cutoff_test(const std::vector<PointCloud>& clouds,
                                      const InvariantSpec& invariant, double alpha,
                                      std::size_t n_sims, std::uint64_t seed_root) {
    return fdr_cutoff_from_scores(build_score_battery(clouds, invariant, n_sims, seed_root),
                                  alpha);
}

enum class ClassicalMethod { bonferroni, holm, hochberg };

/// Standard p-value adjustments used as comparison baselines.
inline std::vector<bool> classical_adjust(const std::vector<double>& p_values,
                                          ClassicalMethod method, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw parameter_error("alpha must lie in (0, 1)");
    const std::size_t m = p_values.size();
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0)) throw input_error("p-values must lie in [0, 1]");
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    switch (method) {
        case ClassicalMethod::bonferroni:
            for (std::size_t i = 0; i < m; ++i)
                reject[i] = p_values[i] <= alpha / static_cast<double>(m);
            break;
        case ClassicalMethod::holm:
            for (std::size_t k = 0; k < m; ++k) {
                if (p_values[order[k]] > alpha / static_cast<double>(m - k)) break;
                reject[order[k]] = true;
            }
            break;
        case ClassicalMethod::hochberg: {
            std::size_t top = 0;  // one past the largest qualifying sorted index
            for (std::size_t k = m; k-- > 0;) {
                if (p_values[order[k]] <= alpha / static_cast<double>(m - k)) {
                    top = k + 1;
                    break;
                }
            }
            for (std::size_t k = 0; k < top; ++k) reject[order[k]] = true;
            break;
        }
    }
    return reject;
}

struct PermutationScheme {
    std::size_t count = 999;   // sampled relabelings when not exhaustive
    std::uint64_t seed = 0;
    bool exhaustive = false;
};

struct TwoSampleResult {
    double observed = kNaN;
    double p_value = kNaN;
    std::size_t total = 0;  // relabelings evaluated (identity included if exhaustive)
    bool exhaustive = false;
    std::vector<double> permuted;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kExhaustiveGuard = 1'000'000;

namespace detail {

inline std::size_t binomial_or_guard(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        c *= static_cast<double>(n - k + i) / static_cast<double>(i);
        if (c > static_cast<double>(kExhaustiveGuard))
            throw guard_error("exhaustive permutation count exceeds the budget; use sampling");
    }
    return static_cast<std::size_t>(c + 0.5);
}

/// In-group losses over relabelings of a pooled distance matrix.  Exhaustive
/// mode enumerates every size-n subset (identity included); sampled mode
/// draws scheme.count relabelings keyed by (seed, pair_index, draw).
inline std::vector<double> permuted_losses(const std::vector<std::vector<double>>& dm,
                                           std::size_t n, std::size_t m, double q_exp,
                                           const PermutationScheme& scheme,
                                           std::uint64_t pair_index) {
    std::vector<double> losses;
    const std::size_t total = n + m;
    if (scheme.exhaustive) {
        binomial_or_guard(total, n);
        std::vector<int> pick(n);
        for (std::size_t i = 0; i < n; ++i) pick[i] = static_cast<int>(i);
        std::vector<int> g1(n), g2(m);
        for (;;) {
            std::size_t a = 0, b = 0;
            std::size_t next = 0;
            for (std::size_t v = 0; v < total; ++v) {
                if (next < n && pick[next] == static_cast<int>(v)) {
                    g1[a++] = static_cast<int>(v);
                    ++next;
                } else {
                    g2[b++] = static_cast<int>(v);
                }
            }
            losses.push_back(rt_loss_from_matrix(dm, g1, g2, q_exp));
            // advance to the next combination
            std::size_t i = n;
            while (i-- > 0) {
                if (pick[i] < static_cast<int>(total - n + i)) {
                    ++pick[i];
                    for (std::size_t j = i + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
                    break;
                }
                if (i == 0) return losses;
            }
        }
    }

    if (scheme.count < 19)
        throw parameter_error("permutation scheme needs at least 19 relabelings");
    losses.reserve(scheme.count);
    std::vector<int> g1(n), g2(m);
    for (std::size_t draw = 0; draw < scheme.count; ++draw) {
        rng::Stream stream(rng::derive(scheme.seed, {kStreamPermutation, pair_index, draw}));
        const auto idx = stream.sample_without_replacement(static_cast<std::uint32_t>(total),
                                                           static_cast<std::uint32_t>(total));
        for (std::size_t i = 0; i < n; ++i) g1[i] = static_cast<int>(idx[i]);
        for (std::size_t j = 0; j < m; ++j) g2[j] = static_cast<int>(idx[n + j]);
        losses.push_back(rt_loss_from_matrix(dm, g1, g2, q_exp));
    }
    return losses;
}

}  // namespace detail

/// Lower-tail permutation test on the two-group in-group loss: small observed
/// loss (groups internally tight) is the signal.  Exhaustive mode reports the
/// exact rank over all relabelings; sampled mode uses the add-one estimator.
inline TwoSampleResult two_sample_perm_test(const std::vector<PersistenceDiagram>& group1,
                                            const std::vector<PersistenceDiagram>& group2,
                                            int dim, const MatchingCost& cost,
                                            const PermutationScheme& scheme) {
    if (group1.size() < 2 || group2.size() < 2)
        throw parameter_error("two-sample test needs at least 2 diagrams per group");
    const std::size_t n = group1.size(), m = group2.size();

    std::vector<PersistenceDiagram> all;
    all.reserve(n + m);
    for (const auto& d : group1) all.push_back(d);
    for (const auto& d : group2) all.push_back(d);
    const auto dm = pairwise_wasserstein(all, dim, cost);

    std::vector<int> idx1(n), idx2(m);
    for (std::size_t i = 0; i < n; ++i) idx1[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < m; ++j) idx2[j] = static_cast<int>(n + j);

    TwoSampleResult result;
    result.observed = rt_loss_from_matrix(dm, idx1, idx2, cost.q_exp);
    result.exhaustive = scheme.exhaustive;
    result.permuted = detail::permuted_losses(dm, n, m, cost.q_exp, scheme, 0);
    result.total = result.permuted.size();

    const auto hits = static_cast<std::size_t>(
        std::count_if(result.permuted.begin(), result.permuted.end(),
                      [&](double f) { return f <= result.observed; }));
    if (scheme.exhaustive) {
        result.p_value = static_cast<double>(hits) / static_cast<double>(result.total);
    } else {
        result.p_value =
            static_cast<double>(1 + hits) / static_cast<double>(1 + result.total);
    }

    const auto [lo, hi] = std::minmax_element(result.permuted.begin(), result.permuted.end());
    if (*hi - *lo == 0.0 && *lo == result.observed)
        result.warnings.push_back("all relabelings give the same loss; groups carry no signal");
    return result;
}

/// FDR over h two-sample tests: observed losses are cutoff candidates, the
/// estimated FDR at X is the per-pool-normalized permuted fraction <= X over
/// the observed fraction <= X.  Rejects everything at or below the largest
/// qualifying cutoff (lower tail).
inline DecisionReport two_sample_fdr(
    const std::vector<std::pair<std::vector<PersistenceDiagram>,
                                std::vector<PersistenceDiagram>>>& pairs,
    int dim, const MatchingCost& cost, const PermutationScheme& scheme, double q) {
    if (pairs.empty()) throw parameter_error("two-sample FDR needs at least one test pair");
    if (!(q > 0.0 && q < 1.0)) throw parameter_error("target FDR must lie in (0, 1)");

    DecisionReport report;
    report.procedure = Procedure::two_sample_fdr;
    report.alpha = q;

    const std::size_t h = pairs.size();
    std::vector<double> observed(h);
    std::vector<std::vector<double>> pools(h);
    for (std::size_t k = 0; k < h; ++k) {
        const auto& [g1, g2] = pairs[k];
        if (g1.size() < 2 || g2.size() < 2)
            throw parameter_error("two-sample FDR: every pair needs 2 diagrams per group");
        std::vector<PersistenceDiagram> all;
        all.reserve(g1.size() + g2.size());
        for (const auto& d : g1) all.push_back(d);
        for (const auto& d : g2) all.push_back(d);
        const auto dm = pairwise_wasserstein(all, dim, cost);
        std::vector<int> idx1(g1.size()), idx2(g2.size());
        for (std::size_t i = 0; i < idx1.size(); ++i) idx1[i] = static_cast<int>(i);
        for (std::size_t j = 0; j < idx2.size(); ++j)
            idx2[j] = static_cast<int>(g1.size() + j);
        observed[k] = rt_loss_from_matrix(dm, idx1, idx2, cost.q_exp);
        pools[k] = detail::permuted_losses(dm, g1.size(), g2.size(), cost.q_exp, scheme, k);
        std::sort(pools[k].begin(), pools[k].end());

        HypothesisRecord record;
        record.label = "pair-" + std::to_string(k);
        record.raw = observed[k];
        report.hypotheses.push_back(std::move(record));
    }

    std::vector<double> candidates = observed;
    std::sort(candidates.begin(), candidates.end());

    double chosen = kNaN;
    report.min_qhat = kInf;
    for (std::size_t c = candidates.size(); c-- > 0;) {
        const double x = candidates[c];
        double v_frac = 0.0;
        for (const auto& pool : pools) {
            const auto le = std::upper_bound(pool.begin(), pool.end(), x) - pool.begin();
            v_frac += static_cast<double>(le) / static_cast<double>(pool.size());
        }
        v_frac /= static_cast<double>(h);
        const double r_frac = static_cast<double>(std::count_if(
                                  observed.begin(), observed.end(),
                                  [&](double o) { return o <= x; })) /
                              static_cast<double>(h);
        const double qhat = v_frac / r_frac;
        if (qhat < report.min_qhat) report.min_qhat = qhat;
        if (std::isnan(chosen) && qhat <= q) {
            chosen = x;
            report.achieved_qhat = qhat;
        }
    }

    if (!std::isnan(chosen)) {
        report.cutoff = chosen;
        for (std::size_t k = 0; k < h; ++k) {
            report.hypotheses[k].rejected = observed[k] <= chosen;
            report.rejections += report.hypotheses[k].rejected;
        }
    }
    return report;
}

}  // namespace phtest
