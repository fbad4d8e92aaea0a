#pragma once

#include "phtest/complexes.hpp"
#include "phtest/core.hpp"
#include "phtest/diagram_metrics.hpp"
#include "phtest/io.hpp"
#include "phtest/null_model.hpp"
#include "phtest/persistence.hpp"
#include "phtest/rng.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace phtest {

inline constexpr std::uint64_t kStreamFixture = 7;
inline constexpr int kFixtureSchemaVersion = 1;

/// One generating configuration of the simulation grid.  source is "null"
/// (uniform points, param = box side) or "circle" (noisy circle, param =
/// noise sigma, bounding box 1x1).
struct CloudKey {
    std::string source;
    double param = 1.0;
    std::size_t n = 0;

    friend bool operator==(const CloudKey&, const CloudKey&) = default;

    friend bool operator<(const CloudKey& a, const CloudKey& b) {
        return std::tie(a.source, a.param, a.n) < std::tie(b.source, b.param, b.n);
    }
};

inline std::string to_string(const CloudKey& key) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s-%g-n%zu", key.source.c_str(), key.param, key.n);
    return buf;
}

struct FixtureGrid {
    std::vector<double> box_sides{0.1, 1.0, 10.0};
    std::vector<std::size_t> counts{10, 50, 100, 500};
    std::vector<double> sigmas{0.1, 0.25};
    std::size_t pool_size = 1000;
    std::uint64_t seed_root = 0;
};

inline void validate_grid(const FixtureGrid& grid) {
    if (grid.box_sides.empty() || grid.counts.empty())
        throw parameter_error("fixture grid: box sides and point counts must be nonempty");
    if (grid.pool_size < 2) throw parameter_error("fixture grid: pool size must be >= 2");
    for (double s : grid.box_sides)
        if (!(s > 0.0) || !std::isfinite(s))
            throw parameter_error("fixture grid: box sides must be positive and finite");
    for (double s : grid.sigmas)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw parameter_error("fixture grid: sigmas must be nonnegative and finite");
    for (std::size_t n : grid.counts)
        if (n < 3) throw parameter_error("fixture grid: point counts must be >= 3");
}

inline std::vector<CloudKey> cloud_keys(const FixtureGrid& grid) {
    std::vector<CloudKey> keys;
    for (double side : grid.box_sides)
        for (std::size_t n : grid.counts) keys.push_back({"null", side, n});
    for (double sigma : grid.sigmas)
        for (std::size_t n : grid.counts) keys.push_back({"circle", sigma, n});
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

namespace detail {

inline PointCloud fixture_cloud(const CloudKey& key, std::size_t replicate,
                                std::uint64_t seed_root) {
    const std::uint64_t tag = key.source == "circle" ? 1 : 0;
    const std::uint64_t seed = rng::derive(
        seed_root, {kStreamFixture, tag, std::bit_cast<std::uint64_t>(key.param),
                    static_cast<std::uint64_t>(key.n), static_cast<std::uint64_t>(replicate)});
    if (key.source == "circle") return sample_noisy_circle(key.n, key.param, seed);
    NullModelSpec spec;
    spec.box = Box{{0.0, 0.0}, {key.param, key.param}};
    spec.n = key.n;
    spec.seed_root = seed;
    return sample_uniform(spec, 0);
}

/// Raw longest-bar lengths for H_0 and H_1 from one cloud.
inline std::array<double, 2> fixture_lengths(const PointCloud& cloud) {
    const PersistenceDiagram diagram = reduce(alpha_filtration_2d(cloud));
    return {max_bar_length(diagram, 0), max_bar_length(diagram, 1)};
}

}  // namespace detail

/// Precomputed invariant pools, persisted as a columnar float64 file plus a
/// JSON manifest.  Values are raw bar lengths; the log invariant is derived
/// at draw time (length <= 0 means the log statistic is absent).
class FixtureStore {
  public:
    struct Entry {
        CloudKey key;
        int dim = 0;
        std::vector<double> values;
    };

    FixtureStore() = default;

    std::uint64_t seed_root() const { return seed_root_; }
    std::size_t pool_size() const { return pool_size_; }
    const std::vector<Entry>& entries() const { return entries_; }

    const Entry& entry(const CloudKey& key, int dim) const {
        for (const auto& e : entries_)
            if (e.dim == dim && e.key == key) return e;
        throw input_error("fixture pool missing for key " + to_string(key) + "-h" +
                          std::to_string(dim));
    }

    const std::vector<double>& values(const CloudKey& key, int dim) const {
        return entry(key, dim).values;
    }

    /// Number of pool values the log invariant cannot use.
    static std::size_t absent_log_count(const Entry& e) {
        std::size_t c = 0;
        for (double v : e.values)
            if (v <= 0.0) ++c;
        return c;
    }

    static FixtureStore compute(const FixtureGrid& grid, std::size_t threads) {
        validate_grid(grid);
        FixtureStore store;
        store.seed_root_ = grid.seed_root;
        store.pool_size_ = grid.pool_size;
        const std::vector<CloudKey> keys = cloud_keys(grid);
        store.entries_.resize(keys.size() * 2);
        for (std::size_t k = 0; k < keys.size(); ++k) {
            for (int dim = 0; dim < 2; ++dim) {
                auto& e = store.entries_[2 * k + static_cast<std::size_t>(dim)];
                e.key = keys[k];
                e.dim = dim;
                e.values.assign(grid.pool_size, 0.0);
            }
        }

        const std::size_t total = keys.size() * grid.pool_size;
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr first_error;
        std::mutex error_mutex;

        auto worker = [&]() {
            for (;;) {
                const std::size_t task = next.fetch_add(1);
                if (task >= total || failed.load()) return;
                const std::size_t k = task / grid.pool_size;
                const std::size_t i = task % grid.pool_size;
                try {
                    const PointCloud cloud = detail::fixture_cloud(keys[k], i, grid.seed_root);
                    const auto lengths = detail::fixture_lengths(cloud);
                    store.entries_[2 * k].values[i] = lengths[0];
                    store.entries_[2 * k + 1].values[i] = lengths[1];
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        };

        const std::size_t n_threads = std::max<std::size_t>(1, threads);
        if (n_threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(n_threads);
            for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (first_error) std::rethrow_exception(first_error);
        return store;
    }

    /// Writes values.bin first and manifest.json last, so an interrupted save
    /// leaves no manifest and load() reports the store as incomplete.
    void save(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        const fs::path bin_path = fs::path(dir) / "values.bin";
        {
            std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
            if (!bin) throw input_error("cannot open fixture file: " + bin_path.string());
            for (const auto& e : entries_) {
                static_assert(sizeof(double) == 8);
                bin.write(reinterpret_cast<const char*>(e.values.data()),
                          static_cast<std::streamsize>(e.values.size() * sizeof(double)));
            }
            if (!bin) throw input_error("write failed: " + bin_path.string());
        }

        nlohmann::json manifest;
        manifest["schema_version"] = kFixtureSchemaVersion;
        manifest["value_format"] = "float64-le";
        manifest["seed_root"] = seed_root_;
        manifest["pool_size"] = pool_size_;
        manifest["complete"] = true;
        nlohmann::json entry_list = nlohmann::json::array();
        std::size_t offset = 0;
        for (const auto& e : entries_) {
            nlohmann::json j;
            j["source"] = e.key.source;
            j["param"] = e.key.param;
            j["n"] = e.key.n;
            j["dim"] = e.dim;
            j["offset"] = offset;
            j["count"] = e.values.size();
            j["absent_log"] = absent_log_count(e);
            entry_list.push_back(std::move(j));
            offset += e.values.size();
        }
        manifest["entries"] = std::move(entry_list);

        const fs::path manifest_path = fs::path(dir) / "manifest.json";
        std::ofstream out(manifest_path, std::ios::trunc);
        if (!out) throw input_error("cannot open fixture manifest: " + manifest_path.string());
        out << manifest.dump(2) << '\n';
        if (!out) throw input_error("write failed: " + manifest_path.string());
    }

    static FixtureStore load(const std::string& dir) {
        namespace fs = std::filesystem;
        const fs::path manifest_path = fs::path(dir) / "manifest.json";
        std::ifstream in(manifest_path);
        if (!in)
            throw input_error("fixture manifest not found (incomplete precompute?): " +
                              manifest_path.string());
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw input_error("fixture manifest parse error: " + std::string(e.what()));
        }
        try {
            if (manifest.at("schema_version").get<int>() != kFixtureSchemaVersion)
                throw input_error("fixture manifest: unsupported schema version");
            if (!manifest.at("complete").get<bool>())
                throw input_error("fixture manifest marks the store incomplete");

            FixtureStore store;
            store.seed_root_ = manifest.at("seed_root").get<std::uint64_t>();
            store.pool_size_ = manifest.at("pool_size").get<std::size_t>();

            const fs::path bin_path = fs::path(dir) / "values.bin";
            std::ifstream bin(bin_path, std::ios::binary);
            if (!bin) throw input_error("cannot open fixture file: " + bin_path.string());

            for (const auto& j : manifest.at("entries")) {
                Entry e;
                e.key.source = j.at("source").get<std::string>();
                e.key.param = j.at("param").get<double>();
                e.key.n = j.at("n").get<std::size_t>();
                e.dim = j.at("dim").get<int>();
                const auto offset = j.at("offset").get<std::size_t>();
                const auto count = j.at("count").get<std::size_t>();
                e.values.resize(count);
                bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
                bin.read(reinterpret_cast<char*>(e.values.data()),
                         static_cast<std::streamsize>(count * sizeof(double)));
                if (!bin)
                    throw input_error("fixture file truncated at key " + to_string(e.key));
                store.entries_.push_back(std::move(e));
            }
            return store;
        } catch (const nlohmann::json::exception& e) {
            throw input_error("fixture manifest field error: " + std::string(e.what()));
        }
    }

  private:
    std::uint64_t seed_root_ = 0;
    std::size_t pool_size_ = 0;
    std::vector<Entry> entries_;
};

}  // namespace phtest
