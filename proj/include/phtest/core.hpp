#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace phtest {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Bad user-supplied data (malformed files, non-finite coordinates, ...).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Arguments outside an operation's contract (negative radius, r > s, ...).
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Internal size guard tripped (oracle over budget, complex blowup, ...).
struct guard_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A statistic pool whose values carry no spread (all equal) or too few entries.
struct degenerate_pool_error : input_error {
    using input_error::input_error;
};

/// Non-fatal observations accumulated while building an object.
struct BuildDiagnostics {
    std::size_t duplicates_merged = 0;
    std::vector<std::string> warnings;

    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

/// Finite set of points in R^d, stored row-major.
struct PointCloud {
    std::vector<double> coords;  // size() == n * dim
    int dim = 0;
    std::string label;

    std::size_t size() const { return dim > 0 ? coords.size() / dim : 0; }

    double operator()(std::size_t i, int k) const { return coords[i * dim + k]; }

    std::span<const double> point(std::size_t i) const {
        return std::span<const double>(coords.data() + i * dim, static_cast<std::size_t>(dim));
    }

    void push_back(std::span<const double> p) {
        coords.insert(coords.end(), p.begin(), p.end());
    }

    static PointCloud from_rows(const std::vector<std::vector<double>>& rows,
                                std::string label = {}) {
        PointCloud c;
        c.label = std::move(label);
        if (rows.empty()) return c;
        c.dim = static_cast<int>(rows.front().size());
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != c.dim)
                throw input_error("point cloud rows have inconsistent dimension");
            c.coords.insert(c.coords.end(), r.begin(), r.end());
        }
        return c;
    }
};

/// Throws input_error unless the cloud is non-empty with finite coordinates.
inline void validate_cloud(const PointCloud& cloud) {
    if (cloud.dim <= 0 || cloud.size() == 0)
        throw input_error("point cloud must contain at least one point");
    if (cloud.coords.size() % static_cast<std::size_t>(cloud.dim) != 0)
        throw input_error("point cloud storage is not a multiple of its dimension");
    for (double v : cloud.coords)
        if (!std::isfinite(v)) throw input_error("point cloud contains non-finite coordinate");
}

// ---------------------------------------------------------------------------
// Filtered complexes
// ---------------------------------------------------------------------------

struct Simplex {
    std::vector<int> vertices;  // strictly increasing
    double value = 0.0;         // filtration value, >= 0

    int dim() const { return static_cast<int>(vertices.size()) - 1; }
};

inline bool simplex_order(const Simplex& a, const Simplex& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.vertices.size() != b.vertices.size()) return a.vertices.size() < b.vertices.size();
    return a.vertices < b.vertices;
}

/// Simplices ordered by (value, dimension, lexicographic vertices).
struct Filtration {
    std::vector<Simplex> simplices;
    int max_dim = 0;

    std::size_t size() const { return simplices.size(); }
};

/// Sorts into canonical order and recomputes max_dim.
inline void canonicalize(Filtration& f) {
    std::sort(f.simplices.begin(), f.simplices.end(), simplex_order);
    f.max_dim = 0;
    for (const auto& s : f.simplices) f.max_dim = std::max(f.max_dim, s.dim());
}

// ---------------------------------------------------------------------------
// Persistence diagrams
// ---------------------------------------------------------------------------

struct DiagramPoint {
    double birth = 0.0;
    double death = kInf;  // kInf encodes an essential class
    int dim = 0;

    bool finite() const { return std::isfinite(death); }
    double length() const { return death - birth; }
};

/// Multiset of (birth, death, dim) triples; zero-length points are kept.
struct PersistenceDiagram {
    std::vector<DiagramPoint> points;
    std::string source_label;

    std::size_t count_in_dim(int q) const {
        std::size_t c = 0;
        for (const auto& p : points) c += (p.dim == q);
        return c;
    }
};

// ---------------------------------------------------------------------------
// Boxes
// ---------------------------------------------------------------------------

/// Axis-aligned box [lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}].
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    int dim() const { return static_cast<int>(lower.size()); }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
        return v;
    }
};

inline void validate_box(const Box& box) {
    if (box.lower.size() != box.upper.size() || box.lower.empty())
        throw parameter_error("box bounds must be non-empty and of equal dimension");
    for (std::size_t i = 0; i < box.lower.size(); ++i) {
        if (!std::isfinite(box.lower[i]) || !std::isfinite(box.upper[i]))
            throw parameter_error("box bounds must be finite");
        if (!(box.lower[i] < box.upper[i]))
            throw parameter_error("box must have positive extent in every coordinate");
    }
}

}  // namespace phtest
