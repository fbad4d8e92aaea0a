#include <catch2/catch_amalgamated.hpp>

#include "phtest/experiments.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using namespace phtest;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args, bool merge_stderr = false) {
    const std::string cmd = std::string(PHTEST_CLI_PATH) + " " + args +
                            (merge_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("phtest-" + tag + "-" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_square_cloud(const fs::path& p) {
    std::ofstream out(p);
    out << "x,y\n0,0\n1,0\n1,1\n0,1\n";
}

/// Directory of one noisy circle plus null clouds, written as CSV files.
void write_test_clouds(const fs::path& dir, std::size_t nulls) {
    fs::create_directories(dir);
    write_cloud_csv((dir / "a-circle.csv").string(), sample_noisy_circle(60, 0.05, 21));
    NullModelSpec spec;
    spec.box.lower = {0.0, 0.0};
    spec.box.upper = {1.0, 1.0};
    spec.n = 60;
    spec.seed_root = 22;
    for (std::size_t i = 0; i < nulls; ++i)
        write_cloud_csv((dir / ("null" + std::to_string(i) + ".csv")).string(),
                        sample_uniform(spec, i));
}

std::string tiny_config_json(std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    j["box_sides"] = std::vector<double>{1.0};
    j["counts"] = std::vector<std::size_t>{15, 30};
    j["sigmas"] = std::vector<double>{0.1};
    j["pool_size"] = 60;
    j["n_sims"] = 15;
    j["k_min"] = 2;
    j["k_max"] = 3;
    j["reps"] = 8;
    j["alphas"] = std::vector<double>{0.05, 0.2};
    j["qq_pairs"] = 2;
    j["limit_scales"] = std::vector<double>{2.0, 3.0, 4.0};
    j["limit_reps"] = 30;
    j["clt_scale"] = 4.0;
    j["limit_queries"] = std::vector<std::array<double, 2>>{{0.7, 0.7}};
    return j.dump(2);
}

}  // namespace

TEST_CASE("help and argument errors", "[cli]") {
    const auto help = run_cli("--help");
    CHECK(help.code == 0);
    for (const char* name : {"fixtures", "level", "power", "exchangeability", "limits",
                             "test-fwer", "test-fdr", "test-two-sample", "diagram", "distance"})
        CHECK(help.out.find(name) != std::string::npos);

    CHECK(run_cli("").code == 1);                       // subcommand required
    CHECK(run_cli("level --bogus-flag").code == 1);     // unknown flag
    CHECK(run_cli("test-fwer").code == 1);              // missing required --clouds
    CHECK(run_cli("distance --a x.csv").code == 1);     // missing required --b
    CHECK(run_cli("diagram --cloud /nonexistent-cloud.csv").code == 1);
    CHECK(run_cli("test-fwer --clouds /nonexistent-dir").code == 1);

    const auto err = run_cli("diagram --cloud /nonexistent-cloud.csv", true);
    CHECK(err.out.find("error:") != std::string::npos);
}

TEST_CASE("diagram emission and self-distance", "[cli]") {
    const TempDir dir("cli-diagram");
    write_square_cloud(dir.path / "square.csv");
    const std::string d1 = (dir.path / "d1.csv").string();

    const auto emit = run_cli("diagram --cloud " + (dir.path / "square.csv").string() +
                              " --out " + d1);
    REQUIRE(emit.code == 0);
    CHECK(emit.out.find("diagram -> ") != std::string::npos);

    // The written file matches the in-process pipeline exactly.
    PointCloud square;
    square.dim = 2;
    square.coords = {0, 0, 1, 0, 1, 1, 0, 1};
    const auto expect = reduce(alpha_filtration_2d(square));
    const auto loaded = read_diagram_csv(d1);
    REQUIRE(loaded.points.size() == expect.points.size());
    for (std::size_t i = 0; i < expect.points.size(); ++i) {
        CHECK(loaded.points[i].dim == expect.points[i].dim);
        CHECK(loaded.points[i].birth == expect.points[i].birth);
        CHECK(loaded.points[i].death == expect.points[i].death);
    }

    const auto self_bn = run_cli("distance --a " + d1 + " --b " + d1 + " --metric bottleneck");
    CHECK(self_bn.code == 0);
    CHECK(self_bn.out == "0\n");
    const auto self_w = run_cli("distance --a " + d1 + " --b " + d1 +
                                " --metric wasserstein --p 2");
    CHECK(self_w.code == 0);
    CHECK(self_w.out == "0\n");

    // Stdout emission carries the header and the square's loop bar.
    const auto to_stdout =
        run_cli("diagram --cloud " + (dir.path / "square.csv").string());
    REQUIRE(to_stdout.code == 0);
    CHECK(to_stdout.out.rfind("dim,birth,death\n", 0) == 0);
    CHECK(to_stdout.out.find("1,0.5,0.7071067811865476\n") != std::string::npos);

    const auto rips = run_cli("diagram --cloud " + (dir.path / "square.csv").string() +
                              " --complex rips --max-dim 2 --max-radius 2");
    REQUIRE(rips.code == 0);
    CHECK(rips.out.find("1,1,1.4142135623730951\n") != std::string::npos);
}

TEST_CASE("family-wise and fdr tests on user clouds", "[cli]") {
    const TempDir dir("cli-tests");
    write_test_clouds(dir.path / "clouds", 3);
    const std::string base = " --clouds " + (dir.path / "clouds").string() +
                             " --alpha 0.1 --null-sims 19 --dim 1 --seed 7";

    const auto fwer = run_cli("test-fwer" + base);
    REQUIRE(fwer.code == 0);
    const auto j = nlohmann::json::parse(fwer.out);
    CHECK(j.at("procedure").get<std::string>() == "fwer-max");
    REQUIRE(j.at("hypotheses").size() == 4);
    // Directory listing is sorted, so the circle cloud is the first unit.
    CHECK(j.at("hypotheses")[0].at("label").get<std::string>() == "a-circle");
    CHECK(j.at("hypotheses")[0].at("rejected").get<bool>());
    const double p = j.at("global_p").get<double>();
    CHECK(p == 1.0 / 20.0);
    CHECK(j.at("rejections").get<int>() >= 1);

    const auto rerun = run_cli("test-fwer" + base);
    CHECK(rerun.out == fwer.out);

    const auto fdr = run_cli("test-fdr" + base);
    REQUIRE(fdr.code == 0);
    const auto jf = nlohmann::json::parse(fdr.out);
    CHECK(jf.at("procedure").get<std::string>() == "fdr-cutoff");
    CHECK(jf.at("hypotheses")[0].at("rejected").get<bool>());

    const auto csv = run_cli("test-fwer" + base + " --format csv");
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("label,raw,z,rejected,excluded,flagged_post_hoc,procedure,alpha,"
                        "global_p,rank,rejections,cutoff,min_qhat,achieved_qhat\n", 0) == 0);
    CHECK(csv.out.find("a-circle,") != std::string::npos);
}

TEST_CASE("two-sample test from cloud and diagram inputs", "[cli]") {
    const TempDir dir("cli-two");
    fs::create_directories(dir.path / "a");
    fs::create_directories(dir.path / "b");
    for (int i = 0; i < 3; ++i)
        write_cloud_csv((dir.path / "a" / ("c" + std::to_string(i) + ".csv")).string(),
                        sample_noisy_circle(50, 0.05, 30 + static_cast<std::uint64_t>(i)));
    NullModelSpec spec;
    spec.box.lower = {0.0, 0.0};
    spec.box.upper = {1.0, 1.0};
    spec.n = 50;
    spec.seed_root = 31;
    for (int i = 0; i < 3; ++i)
        write_cloud_csv((dir.path / "b" / ("n" + std::to_string(i) + ".csv")).string(),
                        sample_uniform(spec, static_cast<std::uint64_t>(i)));

    const auto result = run_cli("test-two-sample --a " + (dir.path / "a").string() + " --b " +
                                (dir.path / "b").string() + " --exhaustive --dim 1");
    REQUIRE(result.code == 0);
    const auto j = nlohmann::json::parse(result.out);
    CHECK(j.at("exhaustive").get<bool>());
    CHECK(j.at("relabelings").get<int>() == 20);
    // Equal group sizes make the mirror relabeling tie the identity.
    CHECK(j.at("p_value").get<double>() == 2.0 / 20.0);

    // Same decision from pre-built diagram files.
    fs::create_directories(dir.path / "da");
    fs::create_directories(dir.path / "db");
    for (const char* group : {"a", "b"}) {
        for (const auto& entry : fs::directory_iterator(dir.path / group)) {
            const auto out_path = dir.path / (std::string("d") + group) /
                                  (entry.path().stem().string() + ".csv");
            const auto r = run_cli("diagram --cloud " + entry.path().string() + " --out " +
                                   out_path.string());
            REQUIRE(r.code == 0);
        }
    }
    const auto from_diagrams =
        run_cli("test-two-sample --a " + (dir.path / "da").string() + " --b " +
                (dir.path / "db").string() + " --exhaustive --dim 1 --input diagrams");
    REQUIRE(from_diagrams.code == 0);
    const auto jd = nlohmann::json::parse(from_diagrams.out);
    CHECK(jd.at("p_value").get<double>() == j.at("p_value").get<double>());
    CHECK(jd.at("observed").get<double>() == Catch::Approx(j.at("observed").get<double>()));

    const auto csv = run_cli("test-two-sample --a " + (dir.path / "a").string() + " --b " +
                             (dir.path / "b").string() + " --exhaustive --dim 1 --format csv");
    REQUIRE(csv.code == 0);
    CHECK(csv.out.rfind("observed,p_value,relabelings,exhaustive\n", 0) == 0);
}

TEST_CASE("oversized exhaustive enumeration exits with the guard code", "[cli]") {
    const TempDir dir("cli-guard");
    fs::create_directories(dir.path / "a");
    fs::create_directories(dir.path / "b");
    PointCloud tiny;
    tiny.dim = 2;
    tiny.coords = {0, 0, 1, 0, 0.5, 1, 0.5, 0.4};
    for (int i = 0; i < 15; ++i) {
        write_cloud_csv((dir.path / "a" / ("a" + std::to_string(i) + ".csv")).string(), tiny);
        write_cloud_csv((dir.path / "b" / ("b" + std::to_string(i) + ".csv")).string(), tiny);
    }
    const auto r = run_cli("test-two-sample --a " + (dir.path / "a").string() + " --b " +
                           (dir.path / "b").string() + " --exhaustive", true);
    CHECK(r.code == 2);
    CHECK(r.out.find("guard") != std::string::npos);
}

TEST_CASE("experiment pipeline runs end to end from a config file", "[cli]") {
    const TempDir dir("cli-pipeline");
    const std::string cfg_path = (dir.path / "config.json").string();
    {
        std::ofstream out(cfg_path);
        out << tiny_config_json(5);
    }
    const std::string g = " --config " + cfg_path + " --out-dir " + dir.str();

    const auto fx = run_cli("fixtures" + g + " --threads 2");
    REQUIRE(fx.code == 0);
    CHECK(fx.out.find("fixtures: 8 pools x 60 values") != std::string::npos);
    REQUIRE(fs::exists(dir.path / "fixtures" / "manifest.json"));
    REQUIRE(fs::exists(dir.path / "fixtures" / "values.bin"));

    const auto level = run_cli("level" + g);
    REQUIRE(level.code == 0);
    REQUIRE(fs::exists(dir.path / "level.csv"));
    const auto level_bytes = slurp(dir.path / "level.csv");
    CHECK(level_bytes.rfind("procedure,alpha,length,log-length,reps,length_skipped,"
                            "log_length_skipped,seed\n", 0) == 0);

    // Reruns are byte-identical.
    REQUIRE(run_cli("level" + g).code == 0);
    CHECK(slurp(dir.path / "level.csv") == level_bytes);

    const auto level_json_run = run_cli("level" + g + " --format json");
    REQUIRE(level_json_run.code == 0);
    const auto lj = nlohmann::json::parse(slurp(dir.path / "level.json"));
    CHECK(lj.at("cells").size() == 8);
    CHECK(lj.at("seed").get<std::uint64_t>() == 5);

    const auto power = run_cli("power" + g);
    REQUIRE(power.code == 0);
    CHECK(slurp(dir.path / "power.csv")
              .rfind("procedure,sigma,alpha,length,log-length,reps,length_skipped,"
                     "log_length_skipped,seed\n", 0) == 0);
    CHECK(slurp(dir.path / "power_reps.csv")
              .rfind("sigma,rep,k,circle_n,invariant,circle_excluded,argmax_is_circle,"
                     "global_p,seed\n", 0) == 0);

    const auto exch = run_cli("exchangeability" + g);
    REQUIRE(exch.code == 0);
    for (const char* name : {"exchangeability_ecdf.csv", "exchangeability_pairs.csv",
                             "exchangeability_qq.csv", "exchangeability_ecdf.svg",
                             "exchangeability_qq.svg"})
        REQUIRE(fs::exists(dir.path / name));
    CHECK(slurp(dir.path / "exchangeability_ecdf.svg").rfind("<svg", 0) == 0);

    const auto limits = run_cli("limits" + g);
    REQUIRE(limits.code == 0);
    for (const char* name : {"limits.csv", "limits_clt.csv", "limits.svg"})
        REQUIRE(fs::exists(dir.path / name));
    CHECK(slurp(dir.path / "limits.csv").rfind("shape,q,r,s,scale,volume,reps,mean,sd,seed\n",
                                               0) == 0);
}

TEST_CASE("missing fixtures and broken configs fail cleanly", "[cli]") {
    const TempDir dir("cli-errors");
    const auto no_fixtures = run_cli("level --out-dir " + dir.str(), true);
    CHECK(no_fixtures.code == 1);
    CHECK(no_fixtures.out.find("error:") != std::string::npos);

    const std::string bad_cfg = (dir.path / "bad.json").string();
    {
        std::ofstream out(bad_cfg);
        out << "{\"sims\": 4}";
    }
    CHECK(run_cli("fixtures --config " + bad_cfg + " --out-dir " + dir.str()).code == 1);

    const std::string garbled = (dir.path / "garbled.json").string();
    {
        std::ofstream out(garbled);
        out << "{not json";
    }
    CHECK(run_cli("fixtures --config " + garbled + " --out-dir " + dir.str()).code == 1);
}
