#include "phtest/experiments.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace phtest;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
    std::string out_dir = ".";
    std::size_t threads = 1;
    std::string format = "csv";
    bool format_given = false;
    std::string fixtures_dir;
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    if (g.seed_given || g.config_path.empty()) {
        cfg.seed = g.seed;
        cfg.grid.seed_root = g.seed;
    }
    validate_config(cfg);
    return cfg;
}

std::string fixtures_dir_of(const GlobalOpts& g) {
    if (!g.fixtures_dir.empty()) return g.fixtures_dir;
    return (fs::path(g.out_dir) / "fixtures").string();
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto out = detail::open_output(path.string());
    out << content;
    if (!out) throw input_error("write failed: " + path.string());
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::vector<PointCloud> load_clouds_path(const std::string& path) {
    std::vector<PointCloud> clouds;
    auto load_one = [&](const fs::path& p) {
        if (p.extension() == ".jsonl") {
            auto batch = read_clouds_jsonl(p.string());
            for (auto& c : batch) clouds.push_back(std::move(c));
        } else {
            PointCloud cloud = read_cloud_csv(p.string());
            if (cloud.label.empty()) cloud.label = p.stem().string();
            clouds.push_back(std::move(cloud));
        }
    };
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (!entry.is_regular_file()) continue;
            const auto ext = entry.path().extension();
            if (ext == ".csv" || ext == ".jsonl") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) load_one(f);
    } else if (fs::is_regular_file(path)) {
        load_one(path);
    } else {
        throw input_error("no such file or directory: " + path);
    }
    if (clouds.empty()) throw input_error("no point clouds found under " + path);
    return clouds;
}

std::vector<PersistenceDiagram> load_diagrams_path(const std::string& path) {
    std::vector<PersistenceDiagram> diagrams;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto d = read_diagram_csv(f.string());
            d.source_label = f.stem().string();
            diagrams.push_back(std::move(d));
        }
    } else if (fs::is_regular_file(path)) {
        diagrams.push_back(read_diagram_csv(path));
    } else {
        throw input_error("no such file or directory: " + path);
    }
    if (diagrams.empty()) throw input_error("no diagrams found under " + path);
    return diagrams;
}

InvariantKind parse_invariant(const std::string& name) {
    if (name == "length") return InvariantKind::max_bar_length;
    if (name == "log-length") return InvariantKind::log_max_bar_length;
    throw input_error("unknown invariant '" + name + "' (expected length or log-length)");
}

void emit_report(const DecisionReport& report, const GlobalOpts& g) {
    const std::string fmt = g.format_given ? g.format : "json";
    print_warnings(report.warnings);
    if (fmt == "json")
        std::cout << report_to_json(report).dump(2) << "\n";
    else
        std::cout << report_to_csv(report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple-hypothesis acyclicity testing for planar point clouds"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    auto* seed_opt = app.add_option("--seed", g.seed, "root RNG seed");
    app.add_option("--config", g.config_path, "JSON experiment config");
    app.add_option("--out-dir", g.out_dir, "directory for emitted files")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for precompute");
    auto* fmt_opt =
        app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--fixtures", g.fixtures_dir, "fixture store directory (default <out-dir>/fixtures)");

    auto* cmd_fixtures =
        app.add_subcommand("fixtures", "precompute the invariant pools for the config grid");
    auto* cmd_level = app.add_subcommand("level", "null-model rejection rates");
    auto* cmd_power = app.add_subcommand("power", "planted-circle rejection rates");
    auto* cmd_exch =
        app.add_subcommand("exchangeability", "pairwise pool comparisons with figures");
    auto* cmd_limits =
        app.add_subcommand("limits", "scaling-window law-of-large-numbers and CLT checks");

    auto* cmd_fwer = app.add_subcommand("test-fwer", "max-statistic family-wise test on user clouds");
    auto* cmd_fdr = app.add_subcommand("test-fdr", "simulated-cutoff FDR test on user clouds");
    std::string clouds_path;
    double test_alpha = 0.05;
    std::size_t null_sims = 99;
    std::string invariant_name_arg = "length";
    int test_dim = 1;
    for (CLI::App* cmd : {cmd_fwer, cmd_fdr}) {
        cmd->add_option("--clouds", clouds_path, "point-cloud file or directory")->required();
        cmd->add_option("--alpha", test_alpha, "test level")->capture_default_str();
        cmd->add_option("--null-sims", null_sims, "simulated null rounds per cloud")
            ->capture_default_str();
        cmd->add_option("--invariant", invariant_name_arg, "length or log-length")
            ->capture_default_str();
        cmd->add_option("--dim", test_dim, "homological dimension")->capture_default_str();
    }

    auto* cmd_two = app.add_subcommand("test-two-sample",
                                       "permutation test of group separation on diagrams");
    std::string two_a, two_b, two_input = "clouds";
    int two_dim = 1;
    double two_p = 2.0;
    double two_qexp = 2.0;
    std::size_t two_count = 999;
    bool two_exhaustive = false;
    cmd_two->add_option("--a", two_a, "first group: file or directory")->required();
    cmd_two->add_option("--b", two_b, "second group: file or directory")->required();
    cmd_two->add_option("--input", two_input, "clouds or diagrams")
        ->check(CLI::IsMember({"clouds", "diagrams"}))
        ->capture_default_str();
    cmd_two->add_option("--dim", two_dim, "homological dimension")->capture_default_str();
    cmd_two->add_option("--wasserstein-p", two_p, "matching norm exponent")->capture_default_str();
    cmd_two->add_option("--q-exp", two_qexp, "loss exponent")->capture_default_str();
    cmd_two->add_option("--permutations", two_count, "sampled relabelings")->capture_default_str();
    cmd_two->add_flag("--exhaustive", two_exhaustive, "enumerate all relabelings");

    auto* cmd_diagram = app.add_subcommand("diagram", "persistence diagram of one point cloud");
    std::string diagram_cloud, diagram_complex = "alpha", diagram_out;
    int diagram_max_dim = 2;
    double diagram_max_radius = kInf;
    cmd_diagram->add_option("--cloud", diagram_cloud, "point-cloud CSV")->required();
    cmd_diagram->add_option("--complex", diagram_complex, "alpha or rips")
        ->check(CLI::IsMember({"alpha", "rips"}))
        ->capture_default_str();
    cmd_diagram->add_option("--max-dim", diagram_max_dim, "largest simplex dimension (rips)")
        ->capture_default_str();
    cmd_diagram->add_option("--max-radius", diagram_max_radius, "radius cutoff (rips)");
    cmd_diagram->add_option("--out", diagram_out, "output CSV (default stdout)");

    auto* cmd_distance = app.add_subcommand("distance", "distance between two diagram files");
    std::string dist_a, dist_b, dist_metric = "bottleneck";
    double dist_p = 2.0;
    int dist_dim = 1;
    cmd_distance->add_option("--a", dist_a, "first diagram CSV")->required();
    cmd_distance->add_option("--b", dist_b, "second diagram CSV")->required();
    cmd_distance->add_option("--metric", dist_metric, "bottleneck or wasserstein")
        ->check(CLI::IsMember({"bottleneck", "wasserstein"}))
        ->capture_default_str();
    cmd_distance->add_option("--p", dist_p, "wasserstein exponent")->capture_default_str();
    cmd_distance->add_option("--dim", dist_dim, "homological dimension")->capture_default_str();

    try {
        app.parse(argc, argv);
        g.seed_given = seed_opt->count() > 0;
        g.format_given = fmt_opt->count() > 0;

        if (cmd_fixtures->parsed()) {
            const ExperimentConfig cfg = resolve_config(g);
            const FixtureStore store = FixtureStore::compute(cfg.grid, g.threads);
            store.save(fixtures_dir_of(g));
            std::cout << "fixtures: " << store.entries().size() << " pools x "
                      << store.pool_size() << " values -> " << fixtures_dir_of(g) << "\n";
        } else if (cmd_level->parsed()) {
            const ExperimentConfig cfg = resolve_config(g);
            const FixtureStore store = FixtureStore::load(fixtures_dir_of(g));
            const LevelResult result = run_level_experiment(cfg, store);
            print_warnings(result.warnings);
            const fs::path out = fs::path(g.out_dir) /
                                 (g.format == "json" ? "level.json" : "level.csv");
            write_text(out, g.format == "json" ? level_json(result).dump(2) + "\n"
                                               : level_csv(result, cfg));
            std::cout << "level rates -> " << out.string() << "\n";
        } else if (cmd_power->parsed()) {
            const ExperimentConfig cfg = resolve_config(g);
            const FixtureStore store = FixtureStore::load(fixtures_dir_of(g));
            const PowerResult result = run_power_experiment(cfg, store);
            print_warnings(result.warnings);
            if (g.format == "json") {
                const fs::path out = fs::path(g.out_dir) / "power.json";
                write_text(out, power_json(result).dump(2) + "\n");
                std::cout << "power rates -> " << out.string() << "\n";
            } else {
                const fs::path out = fs::path(g.out_dir) / "power.csv";
                const fs::path reps_out = fs::path(g.out_dir) / "power_reps.csv";
                write_text(out, power_csv(result, cfg));
                write_text(reps_out, power_reps_csv(result));
                std::cout << "power rates -> " << out.string() << " and "
                          << reps_out.string() << "\n";
            }
        } else if (cmd_exch->parsed()) {
            const ExperimentConfig cfg = resolve_config(g);
            const FixtureStore store = FixtureStore::load(fixtures_dir_of(g));
            const ExchangeabilityResult result = run_exchangeability(cfg, store);
            print_warnings(result.warnings);
            const fs::path dir(g.out_dir);
            if (g.format == "json") {
                write_text(dir / "exchangeability.json",
                           exchangeability_json(result).dump(2) + "\n");
            } else {
                write_text(dir / "exchangeability_ecdf.csv", exchangeability_ecdf_csv(result));
                write_text(dir / "exchangeability_pairs.csv", exchangeability_pairs_csv(result));
                write_text(dir / "exchangeability_qq.csv", exchangeability_qq_csv(result));
            }
            write_text(dir / "exchangeability_ecdf.svg", exchangeability_ecdf_svg(result));
            write_text(dir / "exchangeability_qq.svg", exchangeability_qq_svg(result));
            std::cout << "exchangeability report -> " << dir.string() << "\n";
        } else if (cmd_limits->parsed()) {
            const ExperimentConfig cfg = resolve_config(g);
            const LimitsResult result = run_limits(cfg);
            print_warnings(result.warnings);
            const fs::path dir(g.out_dir);
            if (g.format == "json") {
                write_text(dir / "limits.json", limits_json(result).dump(2) + "\n");
            } else {
                write_text(dir / "limits.csv", limits_csv(result));
                write_text(dir / "limits_clt.csv", clt_csv(result));
            }
            write_text(dir / "limits.svg", limits_svg(result));
            std::cout << "limit checks -> " << dir.string() << "\n";
        } else if (cmd_fwer->parsed() || cmd_fdr->parsed()) {
            const auto clouds = load_clouds_path(clouds_path);
            const InvariantSpec spec{parse_invariant(invariant_name_arg), test_dim};
            const DecisionReport report =
                cmd_fwer->parsed()
                    ? fwer_max_test(clouds, spec, test_alpha, null_sims + 1, g.seed)
                    : fdr_cutoff_test(clouds, spec, test_alpha, null_sims + 1, g.seed);
            emit_report(report, g);
        } else if (cmd_two->parsed()) {
            std::vector<PersistenceDiagram> a, b;
            if (two_input == "clouds") {
                for (const auto& c : load_clouds_path(two_a))
                    a.push_back(reduce(alpha_filtration_2d(c)));
                for (const auto& c : load_clouds_path(two_b))
                    b.push_back(reduce(alpha_filtration_2d(c)));
            } else {
                a = load_diagrams_path(two_a);
                b = load_diagrams_path(two_b);
            }
            PermutationScheme scheme;
            scheme.count = two_count;
            scheme.seed = g.seed;
            scheme.exhaustive = two_exhaustive;
            const TwoSampleResult result =
                two_sample_perm_test(a, b, two_dim, MatchingCost{two_p, two_qexp}, scheme);
            print_warnings(result.warnings);
            const std::string fmt = g.format_given ? g.format : "json";
            if (fmt == "json") {
                nlohmann::json j;
                j["observed"] = result.observed;
                j["p_value"] = result.p_value;
                j["relabelings"] = result.total;
                j["exhaustive"] = result.exhaustive;
                j["warnings"] = result.warnings;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "observed,p_value,relabelings,exhaustive\n"
                          << format_double(result.observed) << ","
                          << format_double(result.p_value) << "," << result.total << ","
                          << (result.exhaustive ? "1" : "0") << "\n";
            }
        } else if (cmd_diagram->parsed()) {
            PointCloud cloud = read_cloud_csv(diagram_cloud);
            if (cloud.label.empty()) cloud.label = fs::path(diagram_cloud).stem().string();
            BuildDiagnostics diag;
            PersistenceDiagram diagram;
            if (diagram_complex == "alpha") {
                diagram = reduce(alpha_filtration_2d(cloud, &diag));
            } else {
                diagram = reduce(vietoris_rips(build_distance_matrix(cloud), diagram_max_dim,
                                               diagram_max_radius));
            }
            print_warnings(diag.warnings);
            if (diagram_out.empty())
                std::cout << diagram_csv(diagram);
            else {
                write_text(diagram_out, diagram_csv(diagram));
                std::cout << "diagram -> " << diagram_out << "\n";
            }
        } else if (cmd_distance->parsed()) {
            const PersistenceDiagram a = read_diagram_csv(dist_a);
            const PersistenceDiagram b = read_diagram_csv(dist_b);
            const double value =
                dist_metric == "bottleneck"
                    ? bottleneck_distance(a, b, dist_dim)
                    : wasserstein_distance(a, b, dist_dim, MatchingCost{dist_p, 2.0});
            std::cout << format_double(value) << "\n";
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const guard_error& e) {
        std::cerr << "guard tripped: " << e.what() << "\n";
        return 2;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const parameter_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
