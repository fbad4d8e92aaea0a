#pragma once

#include "phtest/core.hpp"
#include "phtest/diagram_metrics.hpp"
#include "phtest/fixtures.hpp"
#include "phtest/io.hpp"
#include "phtest/limit_checks.hpp"
#include "phtest/mht.hpp"
#include "phtest/rng.hpp"
#include "phtest/standardization.hpp"
#include "phtest/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phtest {

inline constexpr std::uint64_t kStreamLevel = 8;
inline constexpr std::uint64_t kStreamPower = 9;
inline constexpr std::uint64_t kStreamQQ = 10;
inline constexpr std::uint64_t kStreamLimitRun = 11;
inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
    FixtureGrid grid;
    std::size_t n_sims = 100;  // clouds per unit, observed included
    std::size_t k_min = 2;
    std::size_t k_max = 50;
    std::size_t reps = 200;
    std::vector<double> alphas{0.01, 0.05, 0.10};
    int dim = 1;  // homological dimension tested by level/power
    std::size_t qq_pairs = 10;
    std::vector<double> limit_scales{2.0, 4.0, 8.0, 16.0};
    std::size_t limit_reps = 200;
    double clt_scale = 8.0;
    double limit_intensity = 1.0;
    int limit_dim = 1;
    std::vector<std::array<double, 2>> limit_queries{{0.55, 0.55}, {0.7, 0.7}, {0.8, 0.8}};
    std::uint64_t seed = 0;
};

inline void validate_config(const ExperimentConfig& cfg) {
    validate_grid(cfg.grid);
    if (cfg.n_sims < 2) throw parameter_error("config: n_sims must be >= 2");
    if (cfg.k_min < 1 || cfg.k_min > cfg.k_max)
        throw parameter_error("config: need 1 <= k_min <= k_max");
    if (cfg.reps < 1) throw parameter_error("config: reps must be >= 1");
    if (cfg.alphas.empty()) throw parameter_error("config: alphas must be nonempty");
    for (double a : cfg.alphas)
        if (!(a > 0.0 && a < 1.0)) throw parameter_error("config: alphas must lie in (0, 1)");
    if (cfg.dim != 0 && cfg.dim != 1)
        throw parameter_error("config: dim must be 0 or 1 for planar clouds");
    if (cfg.limit_dim < 0) throw parameter_error("config: limit_dim must be >= 0");
    if (!(cfg.clt_scale > 0.0)) throw parameter_error("config: clt_scale must be positive");
    for (const auto& q : cfg.limit_queries)
        validate_query(PersistentBettiQuery{cfg.limit_dim, q[0], q[1]});
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["seed"] = cfg.seed;
    j["box_sides"] = cfg.grid.box_sides;
    j["counts"] = cfg.grid.counts;
    j["sigmas"] = cfg.grid.sigmas;
    j["pool_size"] = cfg.grid.pool_size;
    j["n_sims"] = cfg.n_sims;
    j["k_min"] = cfg.k_min;
    j["k_max"] = cfg.k_max;
    j["reps"] = cfg.reps;
    j["alphas"] = cfg.alphas;
    j["dim"] = cfg.dim;
    j["qq_pairs"] = cfg.qq_pairs;
    j["limit_scales"] = cfg.limit_scales;
    j["limit_reps"] = cfg.limit_reps;
    j["clt_scale"] = cfg.clt_scale;
    j["limit_intensity"] = cfg.limit_intensity;
    j["limit_dim"] = cfg.limit_dim;
    j["limit_queries"] = cfg.limit_queries;
    return j;
}

/// Starts from defaults and overrides whatever keys are present; unknown keys
/// are rejected so typos do not silently fall back to defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const char* known[] = {"schema_version", "seed",        "box_sides",
                                  "counts",         "sigmas",      "pool_size",
                                  "n_sims",         "k_min",       "k_max",
                                  "reps",           "alphas",      "dim",
                                  "qq_pairs",       "limit_scales", "limit_reps",
                                  "clt_scale",      "limit_intensity", "limit_dim",
                                  "limit_queries"};
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (item.key() == k) ok = true;
        if (!ok) throw input_error("config: unknown key '" + item.key() + "'");
    }
    ExperimentConfig cfg;
    try {
        if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
            throw input_error("config: unsupported schema version");
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("box_sides")) cfg.grid.box_sides = j.at("box_sides").get<std::vector<double>>();
        if (j.contains("counts")) cfg.grid.counts = j.at("counts").get<std::vector<std::size_t>>();
        if (j.contains("sigmas")) cfg.grid.sigmas = j.at("sigmas").get<std::vector<double>>();
        if (j.contains("pool_size")) cfg.grid.pool_size = j.at("pool_size").get<std::size_t>();
        if (j.contains("n_sims")) cfg.n_sims = j.at("n_sims").get<std::size_t>();
        if (j.contains("k_min")) cfg.k_min = j.at("k_min").get<std::size_t>();
        if (j.contains("k_max")) cfg.k_max = j.at("k_max").get<std::size_t>();
        if (j.contains("reps")) cfg.reps = j.at("reps").get<std::size_t>();
        if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
        if (j.contains("dim")) cfg.dim = j.at("dim").get<int>();
        if (j.contains("qq_pairs")) cfg.qq_pairs = j.at("qq_pairs").get<std::size_t>();
        if (j.contains("limit_scales"))
            cfg.limit_scales = j.at("limit_scales").get<std::vector<double>>();
        if (j.contains("limit_reps")) cfg.limit_reps = j.at("limit_reps").get<std::size_t>();
        if (j.contains("clt_scale")) cfg.clt_scale = j.at("clt_scale").get<double>();
        if (j.contains("limit_intensity"))
            cfg.limit_intensity = j.at("limit_intensity").get<double>();
        if (j.contains("limit_dim")) cfg.limit_dim = j.at("limit_dim").get<int>();
        if (j.contains("limit_queries"))
            cfg.limit_queries = j.at("limit_queries").get<std::vector<std::array<double, 2>>>();
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config: " + std::string(e.what()));
    }
    cfg.grid.seed_root = cfg.seed;
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Level and power experiments

struct RateCell {
    Procedure procedure = Procedure::fwer_max;
    InvariantKind invariant = InvariantKind::max_bar_length;
    double alpha = 0.0;
    double sigma = kNaN;  // NaN on null-model (level) rows
    double rate = 0.0;
    std::size_t reps = 0;     // reps that produced a decision
    std::size_t skipped = 0;  // reps with no testable unit
};

struct LevelResult {
    std::vector<RateCell> cells;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    int dim = 1;
};

struct PowerRepRow {
    double sigma = 0.0;
    std::size_t rep = 0;
    std::size_t k = 0;
    std::size_t circle_n = 0;
    InvariantKind invariant = InvariantKind::max_bar_length;
    bool circle_excluded = false;
    bool argmax_is_circle = false;
    double global_p = kNaN;
};

struct PowerResult {
    std::vector<RateCell> cells;
    std::vector<PowerRepRow> rep_rows;  // max-statistic test, one row per rep
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    int dim = 1;
};

namespace detail {

struct RawUnit {
    std::string label;
    double observed = 0.0;
    std::vector<double> nulls;
};

/// Observed value from one pool and null rounds from another (the same pool
/// for null units); draws are without replacement within each pool.
inline RawUnit draw_unit(const FixtureStore& store, const CloudKey& observed_key,
                         const CloudKey& null_key, int dim, std::size_t n_sims,
                         rng::Stream& stream, std::string label) {
    RawUnit unit;
    unit.label = std::move(label);
    const auto& null_values = store.values(null_key, dim);
    if (observed_key == null_key) {
        if (null_values.size() < n_sims)
            throw parameter_error("fixture pool " + to_string(null_key) +
                                  " smaller than n_sims");
        const auto slots = stream.sample_without_replacement(
            static_cast<std::uint32_t>(null_values.size()), static_cast<std::uint32_t>(n_sims));
        unit.observed = null_values[slots[0]];
        unit.nulls.reserve(n_sims - 1);
        for (std::size_t i = 1; i < slots.size(); ++i) unit.nulls.push_back(null_values[slots[i]]);
        return unit;
    }
    const auto& observed_values = store.values(observed_key, dim);
    if (observed_values.empty() || null_values.size() < n_sims - 1)
        throw parameter_error("fixture pools too small for key " + to_string(observed_key));
    unit.observed = observed_values[stream.below(observed_values.size())];
    const auto slots = stream.sample_without_replacement(
        static_cast<std::uint32_t>(null_values.size()), static_cast<std::uint32_t>(n_sims - 1));
    unit.nulls.reserve(slots.size());
    for (auto s : slots) unit.nulls.push_back(null_values[s]);
    return unit;
}

inline ScoreEntry unit_to_entry(const RawUnit& unit, InvariantKind kind) {
    const auto convert = [kind](double v) -> std::optional<double> {
        if (kind == InvariantKind::max_bar_length) return v;
        if (v <= 0.0) return std::nullopt;
        return std::log(v);
    };
    ScoreEntry entry;
    entry.label = unit.label;
    entry.observed = convert(unit.observed);
    entry.nulls.reserve(unit.nulls.size());
    for (double v : unit.nulls) entry.nulls.push_back(convert(v));
    return entry;
}

inline ScoreBattery units_to_battery(const std::vector<RawUnit>& units, InvariantKind kind,
                                     int dim) {
    ScoreBattery battery;
    battery.invariant = InvariantSpec{kind, dim};
    battery.entries.reserve(units.size());
    for (const auto& u : units) battery.entries.push_back(unit_to_entry(u, kind));
    return battery;
}

/// nullopt when every unit was excluded or a null pool degenerated; those
/// reps carry no decision and are counted separately.
inline std::optional<DecisionReport> try_procedure(const ScoreBattery& battery,
                                                   Procedure procedure, double alpha,
                                                   std::vector<std::string>& warnings,
                                                   const std::string& context) {
    try {
        if (procedure == Procedure::fwer_max) return fwer_max_from_scores(battery, alpha);
        return fdr_cutoff_from_scores(battery, alpha);
    } catch (const degenerate_pool_error& e) {
        warnings.push_back(context + ": " + e.what());
        return std::nullopt;
    } catch (const parameter_error& e) {
        warnings.push_back(context + ": " + e.what());
        return std::nullopt;
    }
}

inline std::vector<CloudKey> null_keys_of(const FixtureGrid& grid) {
    std::vector<CloudKey> keys;
    for (const auto& key : cloud_keys(grid))
        if (key.source == "null") keys.push_back(key);
    if (keys.empty()) throw parameter_error("experiments need at least one null fixture key");
    return keys;
}

constexpr std::array<InvariantKind, 2> kBothInvariants{InvariantKind::max_bar_length,
                                                       InvariantKind::log_max_bar_length};
constexpr std::array<Procedure, 2> kBothProcedures{Procedure::fwer_max, Procedure::fdr_cutoff};

}  // namespace detail

/// Null-model rejection rates: per rep, K units drawn from random null pools,
/// each with n_sims - 1 matched null rounds, pushed through the max-statistic
/// and cutoff procedures at every alpha.
inline LevelResult run_level_experiment(const ExperimentConfig& cfg, const FixtureStore& store) {
    validate_config(cfg);
    LevelResult result;
    result.seed = cfg.seed;
    result.dim = cfg.dim;
    const auto null_keys = detail::null_keys_of(cfg.grid);

    // counts[procedure][invariant][alpha]
    std::map<std::tuple<Procedure, InvariantKind, double>, std::pair<std::size_t, std::size_t>>
        tally;  // value: {rejections, decided reps}
    std::map<InvariantKind, std::size_t> skipped;

    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        rng::Stream stream(rng::derive(cfg.seed, {kStreamLevel, rep}));
        const std::size_t k =
            cfg.k_min + static_cast<std::size_t>(stream.below(cfg.k_max - cfg.k_min + 1));
        std::vector<detail::RawUnit> units;
        units.reserve(k);
        for (std::size_t u = 0; u < k; ++u) {
            const CloudKey& key = null_keys[stream.below(null_keys.size())];
            units.push_back(detail::draw_unit(store, key, key, cfg.dim, cfg.n_sims, stream,
                                              "u" + std::to_string(u) + "-" + to_string(key)));
        }
        for (InvariantKind kind : detail::kBothInvariants) {
            const ScoreBattery battery = detail::units_to_battery(units, kind, cfg.dim);
            // testability is a property of the battery, not of (procedure, alpha)
            const auto probe = detail::try_procedure(
                battery, Procedure::fwer_max, cfg.alphas.front(), result.warnings,
                "level rep " + std::to_string(rep) + " " + invariant_name(kind));
            if (!probe.has_value()) {
                skipped[kind] += 1;
                continue;
            }
            for (Procedure proc : detail::kBothProcedures) {
                for (double alpha : cfg.alphas) {
                    const DecisionReport report =
                        proc == Procedure::fwer_max && alpha == cfg.alphas.front()
                            ? *probe
                            : (proc == Procedure::fwer_max ? fwer_max_from_scores(battery, alpha)
                                                           : fdr_cutoff_from_scores(battery, alpha));
                    auto& cell = tally[{proc, kind, alpha}];
                    cell.second += 1;
                    if (report.rejections > 0) cell.first += 1;
                }
            }
        }
    }

    for (Procedure proc : detail::kBothProcedures)
        for (InvariantKind kind : detail::kBothInvariants)
            for (double alpha : cfg.alphas) {
                const auto& cell = tally[{proc, kind, alpha}];
                RateCell out;
                out.procedure = proc;
                out.invariant = kind;
                out.alpha = alpha;
                out.reps = cell.second;
                out.skipped = skipped[kind];
                out.rate = cell.second == 0
                               ? 0.0
                               : static_cast<double>(cell.first) / static_cast<double>(cell.second);
                result.cells.push_back(out);
            }
    return result;
}

/// Power against one planted noisy circle per rep: the circle's observed
/// invariant comes from the circle pool, its null rounds from the unit-box
/// pool with the same point count; the remaining K - 1 units are null draws.
inline PowerResult run_power_experiment(const ExperimentConfig& cfg, const FixtureStore& store) {
    validate_config(cfg);
    PowerResult result;
    result.seed = cfg.seed;
    result.dim = cfg.dim;
    const auto null_keys = detail::null_keys_of(cfg.grid);

    std::map<std::tuple<Procedure, InvariantKind, double, double>,
             std::pair<std::size_t, std::size_t>>
        tally;  // key adds sigma; value: {rejections, decided reps}
    std::map<std::pair<InvariantKind, double>, std::size_t> skipped;

    for (std::size_t sigma_index = 0; sigma_index < cfg.grid.sigmas.size(); ++sigma_index) {
        const double sigma = cfg.grid.sigmas[sigma_index];
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            rng::Stream stream(rng::derive(cfg.seed, {kStreamPower, sigma_index, rep}));
            const std::size_t k =
                cfg.k_min + static_cast<std::size_t>(stream.below(cfg.k_max - cfg.k_min + 1));
            const std::size_t circle_n =
                cfg.grid.counts[stream.below(cfg.grid.counts.size())];
            const CloudKey circle_key{"circle", sigma, circle_n};
            const CloudKey matched_null{"null", 1.0, circle_n};

            std::vector<detail::RawUnit> units;
            units.reserve(k);
            units.push_back(detail::draw_unit(store, circle_key, matched_null, cfg.dim,
                                              cfg.n_sims, stream,
                                              "circle-" + to_string(circle_key)));
            for (std::size_t u = 1; u < k; ++u) {
                const CloudKey& key = null_keys[stream.below(null_keys.size())];
                units.push_back(detail::draw_unit(store, key, key, cfg.dim, cfg.n_sims, stream,
                                                  "u" + std::to_string(u) + "-" + to_string(key)));
            }

            for (InvariantKind kind : detail::kBothInvariants) {
                const ScoreBattery battery = detail::units_to_battery(units, kind, cfg.dim);
                const auto probe = detail::try_procedure(
                    battery, Procedure::fwer_max, cfg.alphas.front(), result.warnings,
                    "power sigma " + format_double(sigma) + " rep " + std::to_string(rep) + " " +
                        invariant_name(kind));
                if (!probe.has_value()) {
                    skipped[{kind, sigma}] += 1;
                    continue;
                }
                for (Procedure proc : detail::kBothProcedures) {
                    for (double alpha : cfg.alphas) {
                        const DecisionReport report =
                            proc == Procedure::fwer_max && alpha == cfg.alphas.front()
                                ? *probe
                                : (proc == Procedure::fwer_max
                                       ? fwer_max_from_scores(battery, alpha)
                                       : fdr_cutoff_from_scores(battery, alpha));
                        auto& cell = tally[{proc, kind, alpha, sigma}];
                        cell.second += 1;
                        if (report.rejections > 0) cell.first += 1;

                        if (proc == Procedure::fwer_max && alpha == cfg.alphas.front()) {
                            PowerRepRow row;
                            row.sigma = sigma;
                            row.rep = rep;
                            row.k = k;
                            row.circle_n = circle_n;
                            row.invariant = kind;
                            row.circle_excluded = report.hypotheses.front().excluded;
                            row.argmax_is_circle = report.argmax_index == 0;
                            row.global_p = report.global_p;
                            result.rep_rows.push_back(row);
                        }
                    }
                }
            }
        }
    }

    for (double sigma : cfg.grid.sigmas)
        for (Procedure proc : detail::kBothProcedures)
            for (InvariantKind kind : detail::kBothInvariants)
                for (double alpha : cfg.alphas) {
                    const auto& cell = tally[{proc, kind, alpha, sigma}];
                    RateCell out;
                    out.procedure = proc;
                    out.invariant = kind;
                    out.alpha = alpha;
                    out.sigma = sigma;
                    out.reps = cell.second;
                    out.skipped = skipped[{kind, sigma}];
                    out.rate = cell.second == 0 ? 0.0
                                                : static_cast<double>(cell.first) /
                                                      static_cast<double>(cell.second);
                    result.cells.push_back(out);
                }
    return result;
}

// ---------------------------------------------------------------------------
// Exchangeability

struct ExchangeabilityFamily {
    InvariantKind invariant = InvariantKind::max_bar_length;
    int dim = 0;
    ExchangeabilityReport report;
    std::vector<std::size_t> qq_selection;  // pair indices shown in the QQ figure
};

struct ExchangeabilityResult {
    std::vector<ExchangeabilityFamily> families;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
};

/// Studentizes every null pool and compares them pairwise, one family per
/// (homological dimension, invariant) combination.
inline ExchangeabilityResult run_exchangeability(const ExperimentConfig& cfg,
                                                 const FixtureStore& store) {
    validate_config(cfg);
    ExchangeabilityResult result;
    result.seed = cfg.seed;
    const auto null_keys = detail::null_keys_of(cfg.grid);

    for (int dim = 0; dim < 2; ++dim) {
        for (InvariantKind kind : detail::kBothInvariants) {
            std::vector<NullPool> pools;
            for (const auto& key : null_keys) {
                const auto& raws = store.values(key, dim);
                PoolKey pool_key;
                pool_key.source = key.source;
                pool_key.param = key.param;
                pool_key.n = key.n;
                pool_key.invariant = kind;
                pool_key.dim = dim;
                std::vector<double> values;
                std::size_t absent = 0;
                if (kind == InvariantKind::max_bar_length) {
                    values = raws;
                } else {
                    for (double v : raws)
                        if (v > 0.0)
                            values.push_back(std::log(v));
                        else
                            ++absent;
                }
                try {
                    pools.push_back(build_pool(std::move(values), std::move(pool_key), absent));
                } catch (const degenerate_pool_error& e) {
                    result.warnings.push_back(std::string("pool dropped: ") + e.what());
                }
            }
            ExchangeabilityFamily family;
            family.invariant = kind;
            family.dim = dim;
            family.report = exchangeability_report(pools);

            rng::Stream stream(rng::derive(
                cfg.seed, {kStreamQQ, static_cast<std::uint64_t>(dim),
                           static_cast<std::uint64_t>(kind == InvariantKind::max_bar_length ? 0
                                                                                            : 1)}));
            const std::size_t want = std::min(cfg.qq_pairs, family.report.pairs.size());
            auto picks = stream.sample_without_replacement(
                static_cast<std::uint32_t>(family.report.pairs.size()),
                static_cast<std::uint32_t>(want));
            family.qq_selection.assign(picks.begin(), picks.end());
            std::sort(family.qq_selection.begin(), family.qq_selection.end());
            result.families.push_back(std::move(family));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Limit-theorem experiments

struct LimitsFamily {
    std::string shape;  // "box" or "disk"
    PersistentBettiQuery query;
    std::vector<ScaleRecord> curve;
    NormalityReport clt;
    double clt_scale = 0.0;
    std::size_t clt_reps = 0;
};

struct LimitsResult {
    std::vector<LimitsFamily> families;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
};

/// LLN curves (normalized persistent Betti means across window scales) and a
/// CLT normality check, for a unit box and a diameter-1 disk.
inline LimitsResult run_limits(const ExperimentConfig& cfg) {
    validate_config(cfg);
    LimitsResult result;
    result.seed = cfg.seed;

    std::vector<std::pair<std::string, WindowShape>> shapes;
    shapes.push_back({"box", WindowShape{WindowKind::box, {1.0, 1.0}, 1.0}});
    shapes.push_back({"disk", WindowShape{WindowKind::disk, {0.5}, 1.0}});

    for (std::size_t shape_index = 0; shape_index < shapes.size(); ++shape_index) {
        for (std::size_t query_index = 0; query_index < cfg.limit_queries.size(); ++query_index) {
            const auto& rs = cfg.limit_queries[query_index];
            LimitsFamily family;
            family.shape = shapes[shape_index].first;
            family.query = PersistentBettiQuery{cfg.limit_dim, rs[0], rs[1]};

            ScalingExperiment exp;
            exp.shape = shapes[shape_index].second;
            exp.scales = cfg.limit_scales;
            exp.intensity = cfg.limit_intensity;
            exp.query = family.query;
            exp.reps = cfg.limit_reps;
            exp.seed = rng::derive(cfg.seed, {kStreamLimitRun, shape_index, query_index});

            BuildDiagnostics diag;
            family.curve = lln_curve(exp, &diag);
            for (const auto& w : diag.warnings)
                result.warnings.push_back(family.shape + " q" + std::to_string(cfg.limit_dim) +
                                          ": " + w);

            ScalingExperiment clt_exp = exp;
            clt_exp.scales.clear();
            for (double s : cfg.limit_scales)
                if (s <= cfg.clt_scale) clt_exp.scales.push_back(s);
            if (clt_exp.scales.size() >= 3 && clt_exp.reps >= 100) {
                family.clt = clt_check(clt_exp);
                family.clt_scale = clt_exp.scales.back();
                family.clt_reps = clt_exp.reps;
            } else {
                result.warnings.push_back(family.shape +
                                          ": CLT check skipped (needs >= 3 scales up to "
                                          "clt_scale and >= 100 reps)");
            }
            result.families.push_back(std::move(family));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report and table serialization

inline nlohmann::json report_to_json(const DecisionReport& report) {
    nlohmann::json j;
    j["procedure"] = procedure_name(report.procedure);
    j["alpha"] = report.alpha;
    j["rejections"] = report.rejections;
    j["global_p"] = report.global_p;
    j["rank"] = report.rank;
    j["argmax_index"] = report.argmax_index;
    j["cutoff"] = report.cutoff;
    j["min_qhat"] = report.min_qhat;
    j["achieved_qhat"] = report.achieved_qhat;
    nlohmann::json hyps = nlohmann::json::array();
    for (const auto& h : report.hypotheses) {
        nlohmann::json hj;
        hj["label"] = h.label;
        hj["raw"] = h.raw;
        hj["z"] = h.z;
        hj["rejected"] = h.rejected;
        hj["excluded"] = h.excluded;
        hj["flagged_post_hoc"] = h.flagged_post_hoc;
        hyps.push_back(std::move(hj));
    }
    j["hypotheses"] = std::move(hyps);
    j["warnings"] = report.warnings;
    return j;
}

inline std::string report_to_csv(const DecisionReport& report) {
    std::string out =
        "label,raw,z,rejected,excluded,flagged_post_hoc,procedure,alpha,global_p,rank,"
        "rejections,cutoff,min_qhat,achieved_qhat\n";
    for (const auto& h : report.hypotheses) {
        out += h.label + "," + format_double(h.raw) + "," + format_double(h.z) + "," +
               (h.rejected ? "1" : "0") + "," + (h.excluded ? "1" : "0") + "," +
               (h.flagged_post_hoc ? "1" : "0") + "," + procedure_name(report.procedure) + "," +
               format_double(report.alpha) + "," + format_double(report.global_p) + "," +
               std::to_string(report.rank) + "," + std::to_string(report.rejections) + "," +
               format_double(report.cutoff) + "," + format_double(report.min_qhat) + "," +
               format_double(report.achieved_qhat) + "\n";
    }
    return out;
}

namespace detail {

inline const RateCell* find_cell(const std::vector<RateCell>& cells, Procedure proc,
                                 InvariantKind kind, double alpha, double sigma) {
    for (const auto& c : cells) {
        const bool sigma_match =
            (std::isnan(sigma) && std::isnan(c.sigma)) || c.sigma == sigma;
        if (c.procedure == proc && c.invariant == kind && c.alpha == alpha && sigma_match)
            return &c;
    }
    return nullptr;
}

}  // namespace detail

/// Alpha rows by invariant columns, one block per procedure.
inline std::string level_csv(const LevelResult& result, const ExperimentConfig& cfg) {
    std::string out =
        "procedure,alpha,length,log-length,reps,length_skipped,log_length_skipped,seed\n";
    for (Procedure proc : detail::kBothProcedures) {
        for (double alpha : cfg.alphas) {
            const auto* len = detail::find_cell(result.cells, proc,
                                                InvariantKind::max_bar_length, alpha, kNaN);
            const auto* lg = detail::find_cell(result.cells, proc,
                                               InvariantKind::log_max_bar_length, alpha, kNaN);
            if (!len || !lg) continue;
            out += std::string(procedure_name(proc)) + "," + format_double(alpha) + "," +
                   format_double(len->rate) + "," + format_double(lg->rate) + "," +
                   std::to_string(len->reps) + "," + std::to_string(len->skipped) + "," +
                   std::to_string(lg->skipped) + "," + std::to_string(result.seed) + "\n";
        }
    }
    return out;
}

inline std::string power_csv(const PowerResult& result, const ExperimentConfig& cfg) {
    std::string out =
        "procedure,sigma,alpha,length,log-length,reps,length_skipped,log_length_skipped,seed\n";
    for (Procedure proc : detail::kBothProcedures) {
        for (double sigma : cfg.grid.sigmas) {
            for (double alpha : cfg.alphas) {
                const auto* len = detail::find_cell(result.cells, proc,
                                                    InvariantKind::max_bar_length, alpha, sigma);
                const auto* lg = detail::find_cell(
                    result.cells, proc, InvariantKind::log_max_bar_length, alpha, sigma);
                if (!len || !lg) continue;
                out += std::string(procedure_name(proc)) + "," + format_double(sigma) + "," +
                       format_double(alpha) + "," + format_double(len->rate) + "," +
                       format_double(lg->rate) + "," + std::to_string(len->reps) + "," +
                       std::to_string(len->skipped) + "," + std::to_string(lg->skipped) + "," +
                       std::to_string(result.seed) + "\n";
            }
        }
    }
    return out;
}

inline std::string power_reps_csv(const PowerResult& result) {
    std::string out = "sigma,rep,k,circle_n,invariant,circle_excluded,argmax_is_circle,global_p,seed\n";
    for (const auto& r : result.rep_rows)
        out += format_double(r.sigma) + "," + std::to_string(r.rep) + "," + std::to_string(r.k) +
               "," + std::to_string(r.circle_n) + "," + invariant_name(r.invariant) + "," +
               (r.circle_excluded ? "1" : "0") + "," + (r.argmax_is_circle ? "1" : "0") + "," +
               format_double(r.global_p) + "," + std::to_string(result.seed) + "\n";
    return out;
}

inline std::string exchangeability_ecdf_csv(const ExchangeabilityResult& result) {
    std::string out = "invariant,dim,pool,value,ecdf\n";
    for (const auto& family : result.families) {
        for (std::size_t p = 0; p < family.report.studentized.size(); ++p) {
            const auto& values = family.report.studentized[p];
            const double n = static_cast<double>(values.size());
            for (std::size_t i = 0; i < values.size(); ++i)
                out += std::string(invariant_name(family.invariant)) + "," +
                       std::to_string(family.dim) + "," + family.report.pool_keys[p] + "," +
                       format_double(values[i]) + "," +
                       format_double(static_cast<double>(i + 1) / n) + "\n";
        }
    }
    return out;
}

inline std::string exchangeability_pairs_csv(const ExchangeabilityResult& result) {
    std::string out = "invariant,dim,pool_a,pool_b,ks,qq_correlation\n";
    for (const auto& family : result.families)
        for (const auto& pair : family.report.pairs)
            out += std::string(invariant_name(family.invariant)) + "," +
                   std::to_string(family.dim) + "," + family.report.pool_keys[pair.i] + "," +
                   family.report.pool_keys[pair.j] + "," + format_double(pair.ks) + "," +
                   format_double(pair.qq_correlation) + "\n";
    return out;
}

inline std::string exchangeability_qq_csv(const ExchangeabilityResult& result) {
    std::string out = "invariant,dim,pool_a,pool_b,quantile_a,quantile_b\n";
    for (const auto& family : result.families)
        for (std::size_t idx : family.qq_selection) {
            const auto& pair = family.report.pairs[idx];
            for (const auto& pt : pair.qq)
                out += std::string(invariant_name(family.invariant)) + "," +
                       std::to_string(family.dim) + "," + family.report.pool_keys[pair.i] + "," +
                       family.report.pool_keys[pair.j] + "," + format_double(pt[0]) + "," +
                       format_double(pt[1]) + "\n";
        }
    return out;
}

inline std::string limits_csv(const LimitsResult& result) {
    std::string out = "shape,q,r,s,scale,volume,reps,mean,sd,seed\n";
    for (const auto& family : result.families)
        for (const auto& rec : family.curve)
            out += family.shape + "," + std::to_string(family.query.q) + "," +
                   format_double(family.query.r) + "," + format_double(family.query.s) + "," +
                   format_double(rec.scale) + "," + format_double(rec.volume) + "," +
                   std::to_string(rec.reps) + "," + format_double(rec.mean) + "," +
                   format_double(rec.sd) + "," + std::to_string(result.seed) + "\n";
    return out;
}

inline std::string clt_csv(const LimitsResult& result) {
    std::string out =
        "shape,q,r,s,scale,reps,mean,sd,qq_correlation,skewness,excess_kurtosis,degenerate,seed\n";
    for (const auto& family : result.families) {
        if (family.clt_reps == 0) continue;
        out += family.shape + "," + std::to_string(family.query.q) + "," +
               format_double(family.query.r) + "," + format_double(family.query.s) + "," +
               format_double(family.clt_scale) + "," + std::to_string(family.clt_reps) + "," +
               format_double(family.clt.mean) + "," + format_double(family.clt.sd) + "," +
               format_double(family.clt.qq_correlation) + "," +
               format_double(family.clt.skewness) + "," +
               format_double(family.clt.excess_kurtosis) + "," +
               (family.clt.degenerate ? "1" : "0") + "," + std::to_string(result.seed) + "\n";
    }
    return out;
}

namespace detail {

inline nlohmann::json cell_json(const RateCell& c) {
    nlohmann::json j;
    j["procedure"] = procedure_name(c.procedure);
    j["invariant"] = invariant_name(c.invariant);
    j["alpha"] = c.alpha;
    if (!std::isnan(c.sigma)) j["sigma"] = c.sigma;
    j["rate"] = c.rate;
    j["reps"] = c.reps;
    j["skipped"] = c.skipped;
    return j;
}

}  // namespace detail

inline nlohmann::json level_json(const LevelResult& result) {
    nlohmann::json j;
    j["seed"] = result.seed;
    j["dim"] = result.dim;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : result.cells) j["cells"].push_back(detail::cell_json(c));
    j["warnings"] = result.warnings;
    return j;
}

inline nlohmann::json power_json(const PowerResult& result) {
    nlohmann::json j;
    j["seed"] = result.seed;
    j["dim"] = result.dim;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : result.cells) j["cells"].push_back(detail::cell_json(c));
    j["reps"] = nlohmann::json::array();
    for (const auto& r : result.rep_rows) {
        nlohmann::json rj;
        rj["sigma"] = r.sigma;
        rj["rep"] = r.rep;
        rj["k"] = r.k;
        rj["circle_n"] = r.circle_n;
        rj["invariant"] = invariant_name(r.invariant);
        rj["circle_excluded"] = r.circle_excluded;
        rj["argmax_is_circle"] = r.argmax_is_circle;
        rj["global_p"] = r.global_p;
        j["reps"].push_back(std::move(rj));
    }
    j["warnings"] = result.warnings;
    return j;
}

inline nlohmann::json exchangeability_json(const ExchangeabilityResult& result) {
    nlohmann::json j;
    j["seed"] = result.seed;
    j["families"] = nlohmann::json::array();
    for (const auto& family : result.families) {
        nlohmann::json fj;
        fj["invariant"] = invariant_name(family.invariant);
        fj["dim"] = family.dim;
        fj["pools"] = family.report.pool_keys;
        fj["pairs"] = nlohmann::json::array();
        for (const auto& pair : family.report.pairs) {
            nlohmann::json pj;
            pj["pool_a"] = family.report.pool_keys[pair.i];
            pj["pool_b"] = family.report.pool_keys[pair.j];
            pj["ks"] = pair.ks;
            pj["qq_correlation"] = pair.qq_correlation;
            fj["pairs"].push_back(std::move(pj));
        }
        fj["qq_selection"] = family.qq_selection;
        fj["warnings"] = family.report.warnings;
        j["families"].push_back(std::move(fj));
    }
    j["warnings"] = result.warnings;
    return j;
}

inline nlohmann::json limits_json(const LimitsResult& result) {
    nlohmann::json j;
    j["seed"] = result.seed;
    j["families"] = nlohmann::json::array();
    for (const auto& family : result.families) {
        nlohmann::json fj;
        fj["shape"] = family.shape;
        fj["q"] = family.query.q;
        fj["r"] = family.query.r;
        fj["s"] = family.query.s;
        fj["curve"] = nlohmann::json::array();
        for (const auto& rec : family.curve) {
            nlohmann::json rj;
            rj["scale"] = rec.scale;
            rj["volume"] = rec.volume;
            rj["reps"] = rec.reps;
            rj["mean"] = rec.mean;
            rj["sd"] = rec.sd;
            fj["curve"].push_back(std::move(rj));
        }
        if (family.clt_reps > 0) {
            nlohmann::json cj;
            cj["scale"] = family.clt_scale;
            cj["reps"] = family.clt_reps;
            cj["mean"] = family.clt.mean;
            cj["sd"] = family.clt.sd;
            cj["qq_correlation"] = family.clt.qq_correlation;
            cj["skewness"] = family.clt.skewness;
            cj["excess_kurtosis"] = family.clt.excess_kurtosis;
            cj["degenerate"] = family.clt.degenerate;
            fj["clt"] = std::move(cj);
        }
        j["families"].push_back(std::move(fj));
    }
    j["warnings"] = result.warnings;
    return j;
}

// ---------------------------------------------------------------------------
// Figures

inline std::string exchangeability_ecdf_svg(const ExchangeabilityResult& result) {
    std::vector<svg::Panel> panels;
    for (const auto& family : result.families) {
        svg::Panel panel;
        panel.title = std::string("H") + std::to_string(family.dim) + " studentized " +
                      invariant_name(family.invariant) + " ECDFs";
        for (std::size_t p = 0; p < family.report.studentized.size(); ++p) {
            svg::Series series;
            series.line = true;
            series.color = svg::palette()[p % svg::palette().size()];
            const auto& values = family.report.studentized[p];
            const double n = static_cast<double>(values.size());
            series.points.reserve(values.size());
            for (std::size_t i = 0; i < values.size(); ++i)
                series.points.push_back({values[i], static_cast<double>(i + 1) / n});
            panel.series.push_back(std::move(series));
        }
        panels.push_back(std::move(panel));
    }
    return svg::render_grid(panels, 2);
}

inline std::string exchangeability_qq_svg(const ExchangeabilityResult& result) {
    std::vector<svg::Panel> panels;
    std::size_t columns = 1;
    for (const auto& family : result.families)
        columns = std::max(columns, family.qq_selection.size());
    for (const auto& family : result.families) {
        std::size_t emitted = 0;
        for (std::size_t idx : family.qq_selection) {
            const auto& pair = family.report.pairs[idx];
            svg::Panel panel;
            panel.title = std::string("H") + std::to_string(family.dim) + " " +
                          invariant_name(family.invariant) + " " + std::to_string(pair.i) +
                          " vs " + std::to_string(pair.j);
            panel.diagonal = true;
            svg::Series series;
            series.line = false;
            series.points = pair.qq;
            panel.series.push_back(std::move(series));
            panels.push_back(std::move(panel));
            ++emitted;
        }
        // pad the row so every family starts a fresh row
        for (; emitted < columns; ++emitted) panels.push_back(svg::Panel{});
    }
    return svg::render_grid(panels, columns, 180, 180);
}

inline std::string limits_svg(const LimitsResult& result) {
    std::vector<svg::Panel> panels;
    std::map<std::string, std::vector<const LimitsFamily*>> by_shape;
    for (const auto& family : result.families) by_shape[family.shape].push_back(&family);
    for (const auto& [shape, families] : by_shape) {
        svg::Panel panel;
        panel.title = shape + " window: mean persistent Betti / volume vs scale";
        std::size_t color = 0;
        for (const auto* family : families) {
            svg::Series series;
            series.color = svg::palette()[color++ % svg::palette().size()];
            for (const auto& rec : family->curve) series.points.push_back({rec.scale, rec.mean});
            panel.series.push_back(std::move(series));
        }
        panels.push_back(std::move(panel));
    }
    return svg::render_grid(panels, 2);
}

}  // namespace phtest
