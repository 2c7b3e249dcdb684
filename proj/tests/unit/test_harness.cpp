#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mojet/errors.hpp"
#include "mojet/experiments.hpp"
#include "mojet/mojet.hpp"
#include "mojet/serialization.hpp"

using namespace mojet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mojet_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& json) {
    const auto p = dir / "config.json";
    std::ofstream(p) << json;
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MOJET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Median by linear interpolation of the sorted sample.
double median_oracle(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double pos = 0.5 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

const char* kSmallClassification = R"({
  "experiment": "pipeline_classification",
  "seed": 4,
  "sizes": {"n_train": 300, "n_test": 150, "S": 8, "J": 24},
  "training": {"logistic": {"epochs": 300}}
})";

}  // namespace

TEST(Config, StrictParsing) {
    EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"experiment": "linreg", "bogus": 1})")),
                 ValidationError);
    EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"sizes": {"S": -3}})")), ValidationError);
    EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"sizes": {"J": "many"}})")), ValidationError);
    EXPECT_THROW(ExperimentConfig::from_json(Json::parse(R"({"training": {"mlp": {"momentum": 0.9}}})")),
                 ValidationError);
    ExperimentConfig bad;
    bad.experiment = "nope";
    EXPECT_THROW(bad.validate(), ValidationError);
    const auto c = ExperimentConfig::from_json(Json::parse(
        R"({"experiment": "digits", "seed": 7, "sizes": {"S": 5}, "probes": {"sigma": 0.05},
            "training": {"mlp": {"epochs": 3, "l2": 0.1}}, "sweep": {"values": [0.1, 0.01]}})"));
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.S, 5u);
    EXPECT_EQ(c.probe_sigma, 0.05);
    EXPECT_EQ(c.mlp.epochs, 3u);
    EXPECT_EQ(c.mlp.l2, 0.1);
    EXPECT_EQ(c.sweep_values, (std::vector<double>{0.1, 0.01}));
    EXPECT_NO_THROW(c.validate());
}

TEST(Csv, QuotingRenderingAndRoundTrip) {
    EXPECT_EQ(CsvWriter::quote("plain"), "plain");
    EXPECT_EQ(CsvWriter::quote("a,b"), "\"a,b\"");
    EXPECT_EQ(CsvWriter::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(CsvWriter::quote("two\nlines"), "\"two\nlines\"");
    EXPECT_EQ(CsvWriter::render({std::string("x"), 0.1, std::int64_t{-3}, std::uint64_t{7}}),
              "x,0.10000000000000001,-3,7\r\n");

    const auto dir = scratch("csv");
    {
        CsvWriter w(dir / "t.csv");
        w.row({std::string("name"), std::string("value")});
        w.row({std::string("a,\"b\"\r\nc"), 1.0 / 3.0});
    }
    const auto rows = read_csv(dir / "t.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "a,\"b\"\r\nc");
    EXPECT_EQ(std::strtod(rows[1][1].c_str(), nullptr), 1.0 / 3.0);
}

TEST(Report, StripTimingRemovesNestedWallTimes) {
    const Json j = Json::parse(R"({"wall_time_s": 1, "a": {"wall_time_s": 2, "b": [{"wall_time_s": 3, "c": 4}]}})");
    EXPECT_EQ(strip_timing(j).dump(), R"({"a":{"b":[{"c":4}]}})");
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("linreg --out " + (dir / "ok").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "ok" / "ranks.csv"));
    EXPECT_TRUE(fs::exists(dir / "ok" / "jetsim.csv"));
    EXPECT_TRUE(fs::exists(dir / "ok" / "cost.csv"));

    EXPECT_EQ(run_cli("nosuch --out " + (dir / "x").string()), 2);
    EXPECT_EQ(run_cli("linreg"), 2);
    EXPECT_EQ(run_cli("linreg --config " + (dir / "missing.json").string() + " --out " + (dir / "x").string()), 2);
    const auto unknown = write_config(scratch("cli_unknown"), R"({"experiment": "linreg", "colour": "red"})");
    EXPECT_EQ(run_cli("linreg --config " + unknown.string() + " --out " + (dir / "x").string()), 2);
    const auto mismatch = write_config(scratch("cli_mismatch"), R"({"experiment": "digits"})");
    EXPECT_EQ(run_cli("linreg --config " + mismatch.string() + " --out " + (dir / "x").string()), 2);

    const auto no_data =
        write_config(scratch("cli_data"), R"({"experiment": "digits", "data": {"digits_csv": "/nonexistent/d.csv"}})");
    EXPECT_EQ(run_cli("digits --config " + no_data.string() + " --out " + (dir / "x").string()), 4);

    // J = 5 probes in d = 10 with no ridge: the probe Gram matrix is singular.
    const auto thin = write_config(scratch("cli_numeric"),
                                   R"({"experiment": "linreg", "sizes": {"J": 5}, "ridge": {"policy": "zero"}})");
    EXPECT_EQ(run_cli("linreg --config " + thin.string() + " --out " + (dir / "x").string()), 3);
}

TEST(Cli, SeedFlagAndPlotData) {
    const auto dir = scratch("cli_seed");
    ASSERT_EQ(run_cli("linreg --seed 11 --plot-data --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli("linreg --seed 11 --plot-data --parallel --out " + (dir / "b").string()), 0);
    ASSERT_EQ(run_cli("linreg --seed 12 --out " + (dir / "c").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "a" / "plot_data.csv"));
    EXPECT_FALSE(fs::exists(dir / "c" / "plot_data.csv"));
    EXPECT_EQ(read_json_file(dir / "a" / "report.json").at("seed"), 11);
    EXPECT_EQ(slurp(dir / "a" / "ranks.csv"), slurp(dir / "b" / "ranks.csv"));
    EXPECT_EQ(slurp(dir / "a" / "plot_data.csv"), slurp(dir / "b" / "plot_data.csv"));
    EXPECT_NE(slurp(dir / "a" / "ranks.csv"), slurp(dir / "c" / "ranks.csv"));
}

TEST(Report, SummariesMatchPerBaseCsv) {
    const auto cfg = ExperimentConfig::from_json(Json::parse(kSmallClassification));
    const auto out = run_experiment(cfg);
    const auto dir = scratch("summaries");
    write_outputs(out, dir, false);
    const Json report = read_json_file(dir / "report.json");

    std::map<std::pair<std::string, std::string>, std::vector<double>> ranks, scores;
    const auto rank_rows = read_csv(dir / "ranks.csv");
    ASSERT_EQ(rank_rows[0], (std::vector<std::string>{"run", "base_id", "tap", "rank", "s1", "s_k"}));
    for (std::size_t i = 1; i < rank_rows.size(); ++i) {
        ranks[{rank_rows[i][0], rank_rows[i][2]}].push_back(std::strtod(rank_rows[i][3].c_str(), nullptr));
    }
    const auto sim_rows = read_csv(dir / "jetsim.csv");
    for (std::size_t i = 1; i < sim_rows.size(); ++i) {
        if (sim_rows[i][3].empty()) continue;
        scores[{sim_rows[i][0], sim_rows[i][2]}].push_back(std::strtod(sim_rows[i][3].c_str(), nullptr));
    }

    std::size_t checked = 0;
    for (const auto& run : report.at("runs")) {
        const std::string label = run.at("label");
        const auto& diag = run.at("diagnostics");
        for (const auto& rs : diag.at("rank_summary")) {
            const auto& v = ranks.at({label, rs.at("channel").get<std::string>()});
            EXPECT_EQ(rs.at("rank").at("count").get<std::size_t>(), v.size());
            EXPECT_DOUBLE_EQ(rs.at("rank").at("median").get<double>(), median_oracle(v));
            ++checked;
        }
        for (const auto& ps : diag.at("jetsim_summary")) {
            const auto& v = scores.at({label, ps.at("pair").get<std::string>()});
            double mean = 0.0;
            for (double s : v) mean += s;
            mean /= static_cast<double>(v.size());
            EXPECT_NEAR(ps.at("score").at("mean").get<double>(), mean, 1e-14);
            EXPECT_DOUBLE_EQ(ps.at("score").at("median").get<double>(), median_oracle(v));
            EXPECT_DOUBLE_EQ(ps.at("score").at("max").get<double>(), *std::max_element(v.begin(), v.end()));
            ++checked;
        }
    }
    EXPECT_GE(checked, 6u);
}

TEST(Report, DeterministicAcrossRunsAndParallelism) {
    auto cfg = ExperimentConfig::from_json(Json::parse(kSmallClassification));
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    cfg.parallel = true;
    const auto c = run_experiment(cfg);
    // The parallel switch itself is echoed; everything else must match.
    const auto strip = [](const ExperimentOutput& o) {
        std::string s = strip_timing(o.report).dump();
        for (std::size_t at; (at = s.find("\"parallel\":true")) != std::string::npos;) {
            s.replace(at, 15, "\"parallel\":false");
        }
        return s;
    };
    EXPECT_EQ(strip(a), strip(b));
    EXPECT_EQ(strip(a), strip(c));
    const auto da = scratch("det_a"), dc = scratch("det_c");
    write_outputs(a, da, true);
    write_outputs(c, dc, true);
    for (const char* f : {"ranks.csv", "jetsim.csv", "plot_data.csv"}) EXPECT_EQ(slurp(da / f), slurp(dc / f)) << f;
}

TEST(Cost, ForwardPassesAreLinearInBasesProbesAndModels) {
    RngStream rng(1, StreamId::kData);
    std::vector<Pipeline> pipes;
    for (int m = 0; m < 2; ++m) pipes.push_back(compose_two_module_linear(gaussian_matrix(rng, 2, 4), Vector{1, 1}));
    for (std::size_t S : {3u, 6u}) {
        for (std::size_t J : {5u, 10u}) {
            for (std::size_t M : {1u, 2u}) {
                std::vector<TappedModel> models;
                for (std::size_t m = 0; m < M; ++m) {
                    pipes[m].reset_counter();
                    models.push_back({"m" + std::to_string(m), &pipes[m], {"bottleneck"}});
                }
                std::vector<Vector> bases;
                for (std::size_t s = 0; s < S; ++s) bases.push_back(gaussian(rng, 4));
                MojetOptions opt;
                opt.design = ProbeDesign::isotropic(1e-2, J);
                const auto res = run_mojet(models, bases, opt, RngStream(1, StreamId::kProbes));
                std::uint64_t counted = 0;
                for (std::size_t m = 0; m < M; ++m) counted += pipes[m].read_counter();
                EXPECT_EQ(res.report.cost.probe_passes, S * J * M);
                EXPECT_EQ(res.report.cost.base_passes, S * M);
                EXPECT_EQ(counted, S * (J + 1) * M);
            }
        }
    }
}
