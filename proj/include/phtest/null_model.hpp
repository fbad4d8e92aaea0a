#pragma once

#include "phtest/core.hpp"
#include "phtest/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace phtest {

// Stream tags keeping the seed derivations of the samplers disjoint.
inline constexpr std::uint64_t kStreamUniform = 1;
inline constexpr std::uint64_t kStreamPoisson = 2;
inline constexpr std::uint64_t kStreamCircle = 3;

/// Unbiased minimum-variance endpoints of a uniform support interval, per
/// coordinate: [min - (max-min)/(n-1), max + (max-min)/(n-1)].  A coordinate
/// with zero spread is inflated by a machine-scale margin and reported.
inline Box estimate_box(const PointCloud& cloud, BuildDiagnostics* diag = nullptr) {
    validate_cloud(cloud);
    const std::size_t n = cloud.size();
    if (n < 2) throw parameter_error("estimate_box: needs at least 2 points");

    Box box;
    box.lower.resize(static_cast<std::size_t>(cloud.dim));
    box.upper.resize(static_cast<std::size_t>(cloud.dim));
    for (int k = 0; k < cloud.dim; ++k) {
        double lo = cloud(0, k), hi = cloud(0, k);
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, cloud(i, k));
            hi = std::max(hi, cloud(i, k));
        }
        if (lo == hi) {
            const double margin = std::max(std::abs(lo), 1.0) * 1e-9;
            lo -= margin;
            hi += margin;
            if (diag)
                diag->warn("estimate_box: coordinate " + std::to_string(k) +
                           " has zero spread; inflated by machine-scale margin");
        }
        const double stretch = (hi - lo) / static_cast<double>(n - 1);
        box.lower[static_cast<std::size_t>(k)] = lo - stretch;
        box.upper[static_cast<std::size_t>(k)] = hi + stretch;
    }
    return box;
}

struct NullModelSpec {
    Box box;
    std::size_t n = 0;
    std::uint64_t seed_root = 0;
};

inline void validate_spec(const NullModelSpec& spec) {
    validate_box(spec.box);
    if (spec.n < 1) throw parameter_error("null model: point count must be >= 1");
}

/// n i.i.d. uniform points in the box (the fixed-count Poisson process);
/// a pure function of (seed_root, replicate_index).
inline PointCloud sample_uniform(const NullModelSpec& spec, std::uint64_t replicate_index) {
    validate_spec(spec);
    rng::Stream stream(rng::derive(spec.seed_root, {kStreamUniform, replicate_index}));
    PointCloud cloud;
    cloud.dim = spec.box.dim();
    cloud.coords.reserve(spec.n * static_cast<std::size_t>(cloud.dim));
    for (std::size_t i = 0; i < spec.n; ++i)
        for (int k = 0; k < cloud.dim; ++k)
            cloud.coords.push_back(stream.uniform(spec.box.lower[static_cast<std::size_t>(k)],
                                                  spec.box.upper[static_cast<std::size_t>(k)]));
    return cloud;
}

enum class WindowKind { box, disk, polygon };

/// Convex planar window: a base shape times a scale factor.
/// params - box: {width, height}; disk: {radius}; polygon: flat CCW x,y list.
struct WindowShape {
    WindowKind kind = WindowKind::box;
    std::vector<double> params{1.0, 1.0};
    double scale = 1.0;
};

inline void validate_window(const WindowShape& w) {
    if (!(w.scale > 0.0) || !std::isfinite(w.scale))
        throw parameter_error("window: scale must be positive and finite");
    for (double v : w.params)
        if (!std::isfinite(v)) throw parameter_error("window: parameters must be finite");
    switch (w.kind) {
        case WindowKind::box:
            if (w.params.size() != 2 || !(w.params[0] > 0.0) || !(w.params[1] > 0.0))
                throw parameter_error("window: box needs positive width and height");
            break;
        case WindowKind::disk:
            if (w.params.size() != 1 || !(w.params[0] > 0.0))
                throw parameter_error("window: disk needs a positive radius");
            break;
        case WindowKind::polygon: {
            if (w.params.size() < 6 || w.params.size() % 2 != 0)
                throw parameter_error("window: polygon needs >= 3 x,y vertex pairs");
            const std::size_t m = w.params.size() / 2;
            double area2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = (i + 1) % m;
                const std::size_t k = (i + 2) % m;
                const double cross =
                    (w.params[2 * j] - w.params[2 * i]) * (w.params[2 * k + 1] - w.params[2 * j + 1]) -
                    (w.params[2 * j + 1] - w.params[2 * i + 1]) * (w.params[2 * k] - w.params[2 * j]);
                if (cross < 0.0)
                    throw parameter_error("window: polygon must be convex and CCW");
                area2 += w.params[2 * i] * w.params[2 * j + 1] - w.params[2 * j] * w.params[2 * i + 1];
            }
            if (!(area2 > 0.0)) throw parameter_error("window: polygon has no area");
            break;
        }
    }
}

inline double window_area(const WindowShape& w) {
    validate_window(w);
    double base = 0.0;
    switch (w.kind) {
        case WindowKind::box:
            base = w.params[0] * w.params[1];
            break;
        case WindowKind::disk:
            base = std::numbers::pi * w.params[0] * w.params[0];
            break;
        case WindowKind::polygon: {
            const std::size_t m = w.params.size() / 2;
            double area2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = (i + 1) % m;
                area2 += w.params[2 * i] * w.params[2 * j + 1] - w.params[2 * j] * w.params[2 * i + 1];
            }
            base = area2 / 2.0;
            break;
        }
    }
    return base * w.scale * w.scale;
}

/// Axis-aligned box enclosing the scaled window.
inline Box window_bounding_box(const WindowShape& w) {
    validate_window(w);
    Box b;
    switch (w.kind) {
        case WindowKind::box:
            b.lower = {0.0, 0.0};
            b.upper = {w.params[0] * w.scale, w.params[1] * w.scale};
            break;
        case WindowKind::disk: {
            const double r = w.params[0] * w.scale;
            b.lower = {-r, -r};
            b.upper = {r, r};
            break;
        }
        case WindowKind::polygon: {
            double lx = kInf, ly = kInf, hx = -kInf, hy = -kInf;
            for (std::size_t i = 0; i + 1 < w.params.size(); i += 2) {
                lx = std::min(lx, w.params[i] * w.scale);
                hx = std::max(hx, w.params[i] * w.scale);
                ly = std::min(ly, w.params[i + 1] * w.scale);
                hy = std::max(hy, w.params[i + 1] * w.scale);
            }
            b.lower = {lx, ly};
            b.upper = {hx, hy};
            break;
        }
    }
    return b;
}

inline bool window_contains(const WindowShape& w, double x, double y) {
    switch (w.kind) {
        case WindowKind::box:
            return x >= 0.0 && x <= w.params[0] * w.scale && y >= 0.0 &&
                   y <= w.params[1] * w.scale;
        case WindowKind::disk: {
            const double r = w.params[0] * w.scale;
            return x * x + y * y <= r * r;
        }
        case WindowKind::polygon: {
            const std::size_t m = w.params.size() / 2;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = (i + 1) % m;
                const double ax = w.params[2 * i] * w.scale, ay = w.params[2 * i + 1] * w.scale;
                const double bx = w.params[2 * j] * w.scale, by = w.params[2 * j + 1] * w.scale;
                if ((bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0.0) return false;
            }
            return true;
        }
    }
    return false;
}

/// Homogeneous Poisson process on the window: Poisson(intensity * area) count,
/// then uniform placement (rejection from the bounding box).  May be empty.
inline PointCloud sample_poisson_window(const WindowShape& shape, double intensity,
                                        std::uint64_t seed) {
    if (!(intensity > 0.0) || !std::isfinite(intensity))
        throw parameter_error("poisson window: intensity must be positive and finite");
    const double area = window_area(shape);
    const Box bb = window_bounding_box(shape);

    rng::Stream stream(rng::derive(seed, {kStreamPoisson}));
    const std::uint64_t count = stream.poisson(intensity * area);
    PointCloud cloud;
    cloud.dim = 2;
    cloud.coords.reserve(count * 2);
    for (std::uint64_t i = 0; i < count; ++i) {
        for (;;) {
            const double x = stream.uniform(bb.lower[0], bb.upper[0]);
            const double y = stream.uniform(bb.lower[1], bb.upper[1]);
            if (window_contains(shape, x, y)) {
                cloud.coords.push_back(x);
                cloud.coords.push_back(y);
                break;
            }
        }
    }
    return cloud;
}

/// n points at uniform angles on the circle of radius 0.5 centred in the unit
/// square, plus isotropic Gaussian noise of standard deviation sigma.
inline PointCloud sample_noisy_circle(std::size_t n, double sigma, std::uint64_t seed) {
    if (n < 1) throw parameter_error("noisy circle: point count must be >= 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw parameter_error("noisy circle: sigma must be nonnegative and finite");

    rng::Stream stream(rng::derive(seed, {kStreamCircle}));
    PointCloud cloud;
    cloud.dim = 2;
    cloud.coords.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double angle = stream.uniform(0.0, 2.0 * std::numbers::pi);
        const double x = 0.5 + 0.5 * std::cos(angle) + sigma * stream.normal();
        const double y = 0.5 + 0.5 * std::sin(angle) + sigma * stream.normal();
        cloud.coords.push_back(x);
        cloud.coords.push_back(y);
    }
    return cloud;
}

}  // namespace phtest
