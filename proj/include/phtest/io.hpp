#pragma once

#include "phtest/core.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace phtest {

/// Shortest round-trip decimal form; the same value always prints the same
/// bytes, which is what makes report files byte-reproducible.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline bool parse_double(const std::string& field, double& out) {
    const char* begin = field.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto first = field.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            fields.emplace_back();
            continue;
        }
        const auto last = field.find_last_not_of(" \t\r");
        fields.push_back(field.substr(first, last - first + 1));
    }
    return fields;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    return out;
}

}  // namespace detail

/// One point per row, columns = coordinates; a single leading header row is
/// tolerated and skipped.
inline PointCloud read_cloud_csv(const std::string& path) {
    auto in = detail::open_input(path);
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = detail::split_csv_line(line);
        if (fields.empty()) continue;
        std::vector<double> row;
        row.reserve(fields.size());
        bool ok = true;
        for (const auto& f : fields) {
            double v = 0.0;
            if (!detail::parse_double(f, v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) {
            if (first_data) continue;  // header row
            throw input_error(path + ":" + std::to_string(lineno) + ": not a number");
        }
        if (first_data) {
            cloud.dim = static_cast<int>(row.size());
            first_data = false;
        } else if (static_cast<int>(row.size()) != cloud.dim) {
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": row has wrong number of coordinates");
        }
        cloud.coords.insert(cloud.coords.end(), row.begin(), row.end());
    }
    validate_cloud(cloud);
    return cloud;
}

inline void write_cloud_csv(const std::string& path, const PointCloud& cloud) {
    auto out = detail::open_output(path);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < cloud.dim; ++k) {
            if (k > 0) out << ',';
            out << format_double(cloud(i, k));
        }
        out << '\n';
    }
}

/// One cloud per line: {"label": "...", "points": [[x, y], ...]}.
inline std::vector<PointCloud> read_clouds_jsonl(const std::string& path) {
    auto in = detail::open_input(path);
    std::vector<PointCloud> clouds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw input_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("points") || !j["points"].is_array())
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": expected an object with a 'points' array");
        std::vector<std::vector<double>> rows;
        for (const auto& p : j["points"]) {
            if (!p.is_array())
                throw input_error(path + ":" + std::to_string(lineno) +
                                  ": points must be coordinate arrays");
            rows.emplace_back();
            for (const auto& c : p) rows.back().push_back(c.get<double>());
        }
        PointCloud cloud = PointCloud::from_rows(rows, j.value("label", std::string{}));
        validate_cloud(cloud);
        clouds.push_back(std::move(cloud));
    }
    if (clouds.empty()) throw input_error(path + ": no clouds found");
    return clouds;
}

inline void write_clouds_jsonl(const std::string& path, const std::vector<PointCloud>& clouds) {
    auto out = detail::open_output(path);
    for (const auto& cloud : clouds) {
        nlohmann::json j;
        j["label"] = cloud.label;
        auto& pts = j["points"] = nlohmann::json::array();
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            auto& row = pts.emplace_back(nlohmann::json::array());
            for (int k = 0; k < cloud.dim; ++k) row.push_back(cloud(i, k));
        }
        out << j.dump() << '\n';
    }
}

/// Columns (dim, birth, death); "inf" encodes an essential class.
inline std::string diagram_csv(const PersistenceDiagram& diagram) {
    std::string out = "dim,birth,death\n";
    for (const auto& p : diagram.points)
        out += std::to_string(p.dim) + "," + format_double(p.birth) + "," +
               format_double(p.death) + "\n";
    return out;
}

inline void write_diagram_csv(const std::string& path, const PersistenceDiagram& diagram) {
    auto out = detail::open_output(path);
    out << diagram_csv(diagram);
}

inline PersistenceDiagram read_diagram_csv(const std::string& path) {
    auto in = detail::open_input(path);
    PersistenceDiagram diagram;
    std::string line;
    std::size_t lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = detail::split_csv_line(line);
        if (fields.empty()) continue;
        if (fields.size() != 3)
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": expected 'dim,birth,death'");
        double dv = 0.0, birth = 0.0, death = 0.0;
        if (!detail::parse_double(fields[0], dv) || !detail::parse_double(fields[1], birth) ||
            !detail::parse_double(fields[2], death)) {
            if (first_data) {
                first_data = false;  // header row
                continue;
            }
            throw input_error(path + ":" + std::to_string(lineno) + ": not a number");
        }
        first_data = false;
        if (dv < 0 || dv != std::floor(dv))
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": dimension must be a nonnegative integer");
        if (std::isnan(birth) || std::isnan(death) || !std::isfinite(birth) || death < birth)
            throw input_error(path + ":" + std::to_string(lineno) +
                              ": need finite birth <= death");
        diagram.points.push_back(DiagramPoint{birth, death, static_cast<int>(dv)});
    }
    return diagram;
}

}  // namespace phtest
