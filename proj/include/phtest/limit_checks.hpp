#pragma once

#include "phtest/complexes.hpp"
#include "phtest/core.hpp"
#include "phtest/null_model.hpp"
#include "phtest/persistence.hpp"
#include "phtest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace phtest {

inline constexpr std::uint64_t kStreamLimit = 6;

struct ScalingExperiment {
    WindowShape shape;           // base window; its scale field is overridden per entry
    std::vector<double> scales;  // increasing rescaling factors
    double intensity = 1.0;
    PersistentBettiQuery query;
    std::size_t reps = 100;
    std::uint64_t seed = 0;
};

struct ScaleRecord {
    double scale = 0.0;
    double volume = 0.0;
    std::size_t reps = 0;
    double mean = 0.0;  // of beta / volume
    double sd = 0.0;
};

/// Acklam's rational approximation of the standard normal quantile
/// (relative error below 1.2e-9).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw parameter_error("inverse_normal_cdf: p must lie strictly in (0, 1)");
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

struct NormalityReport {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double qq_correlation = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    bool degenerate = false;  // no spread; moments and correlation not meaningful
};

/// Moment and QQ diagnostics of a sample against the standard normal (after
/// centering and scaling by the sample's own mean and sd).
inline NormalityReport normality_check(std::vector<double> values) {
    if (values.size() < 3) throw parameter_error("normality check needs at least 3 values");
    NormalityReport report;
    report.n = values.size();
    const double n = static_cast<double>(values.size());

    double sum = 0.0;
    for (double v : values) sum += v;
    report.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - report.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    report.sd = std::sqrt(m2 / (n - 1.0));
    if (!(report.sd > 0.0)) {
        report.degenerate = true;
        return report;
    }
    const double s2 = m2 / n;
    report.skewness = (m3 / n) / std::pow(s2, 1.5);
    report.excess_kurtosis = (m4 / n) / (s2 * s2) - 3.0;

    std::sort(values.begin(), values.end());
    double sxy = 0.0, sxx = 0.0, syy = 0.0, mx = 0.0, my = 0.0;
    std::vector<double> qs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        qs[i] = inverse_normal_cdf((static_cast<double>(i) + 0.5) / n);
        mx += qs[i];
        my += values[i];
    }
    mx /= n;
    my /= n;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sxy += (qs[i] - mx) * (values[i] - my);
        sxx += (qs[i] - mx) * (qs[i] - mx);
        syy += (values[i] - my) * (values[i] - my);
    }
    report.qq_correlation = sxy / std::sqrt(sxx * syy);
    return report;
}

namespace detail {

/// Persistent Betti count of one Poisson draw at the given scale.
inline double sample_beta(const ScalingExperiment& exp, double scale, std::size_t scale_index,
                          std::size_t rep) {
    WindowShape window = exp.shape;
    window.scale = scale;
    const PointCloud cloud = sample_poisson_window(
        window, exp.intensity, rng::derive(exp.seed, {kStreamLimit, scale_index, rep}));
    if (cloud.size() == 0) return 0.0;
    const auto diagram = reduce(alpha_filtration_2d(cloud));
    return static_cast<double>(persistent_betti(diagram, exp.query));
}

}  // namespace detail

inline void validate_experiment(const ScalingExperiment& exp) {
    validate_window(exp.shape);
    validate_query(exp.query);
    if (exp.scales.size() < 3) throw parameter_error("scaling experiment needs >= 3 scales");
    if (!std::is_sorted(exp.scales.begin(), exp.scales.end()))
        throw parameter_error("scaling experiment scales must be increasing");
    for (double s : exp.scales)
        if (!(s > 0.0)) throw parameter_error("scaling experiment scales must be positive");
    if (exp.reps < 30) throw parameter_error("scaling experiment needs >= 30 reps");
    if (!(exp.intensity > 0.0)) throw parameter_error("scaling experiment needs intensity > 0");
}

/// Mean and sd of beta / volume at each scale; scales whose complexes trip a
/// size guard truncate the curve with a warning.
inline std::vector<ScaleRecord> lln_curve(const ScalingExperiment& exp,
                                          BuildDiagnostics* diag = nullptr) {
    validate_experiment(exp);
    std::vector<ScaleRecord> records;
    for (std::size_t si = 0; si < exp.scales.size(); ++si) {
        WindowShape window = exp.shape;
        window.scale = exp.scales[si];
        ScaleRecord rec;
        rec.scale = exp.scales[si];
        rec.volume = window_area(window);
        double sum = 0.0, sumsq = 0.0;
        try {
            for (std::size_t rep = 0; rep < exp.reps; ++rep) {
                const double normalized =
                    detail::sample_beta(exp, exp.scales[si], si, rep) / rec.volume;
                sum += normalized;
                sumsq += normalized * normalized;
                ++rec.reps;
            }
        } catch (const guard_error& e) {
            if (diag)
                diag->warn("scale " + std::to_string(rec.scale) +
                           " truncated by size guard: " + e.what());
            break;
        }
        const double n = static_cast<double>(rec.reps);
        rec.mean = sum / n;
        const double var = (sumsq - n * rec.mean * rec.mean) / (n - 1.0);
        rec.sd = var > 0.0 ? std::sqrt(var) : 0.0;
        records.push_back(rec);
    }
    return records;
}

/// Normality diagnostics of the beta sample at the largest scale.
inline NormalityReport clt_check(const ScalingExperiment& exp) {
    validate_experiment(exp);
    if (exp.reps < 100) throw parameter_error("CLT check needs >= 100 reps");
    const std::size_t si = exp.scales.size() - 1;
    std::vector<double> betas;
    betas.reserve(exp.reps);
    for (std::size_t rep = 0; rep < exp.reps; ++rep)
        betas.push_back(detail::sample_beta(exp, exp.scales[si], si, rep));
    return normality_check(std::move(betas));
}

}  // namespace phtest
