#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "krvortex/cli.hpp"

namespace fs = std::filesystem;
using krv::io::json;

namespace {

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("krv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string &name, const std::string &text) {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }
    int run(std::vector<std::string> args) {
        std::vector<const char *> argv{"krvortex"};
        for (const auto &a : args) argv.push_back(a.c_str());
        std::ostringstream err;
        const int code = krv::cli::run(static_cast<int>(argv.size()), argv.data(), err);
        last_err_ = err.str();
        return code;
    }
    static std::string slurp(const fs::path &p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    static std::vector<std::string> lines(const std::string &text) {
        std::vector<std::string> out;
        std::istringstream in(text);
        for (std::string l; std::getline(in, l);) out.push_back(l);
        return out;
    }

    fs::path dir_;
    std::string last_err_;
};

} // namespace

TEST_F(CliTest, CritFindSingleVortexAtTheOrigin) {
    const auto cfg = write("c.json", R"({"domain": {"variant": "unit_disk"}, "circulations": [1.0], "search": {"starts": 20}})");
    const auto out = dir_ / "out";
    ASSERT_EQ(run({"crit-find", "--config", cfg.string(), "--out", out.string(), "--threads", "1"}), 0) << last_err_;
    const auto j = json::parse(slurp(out / "critical_points.json"));
    ASSERT_EQ(j["points"].size(), 1u);
    const auto p = j["points"][0]["configuration"][0]["point"];
    EXPECT_LT(std::hypot(p[0].get<double>(), p[1].get<double>()), 1e-8);
    EXPECT_EQ(j["points"][0]["classification"], "minimum");
    const auto m = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["subcommand"], "crit-find");
    EXPECT_EQ(m["outputs"].size(), 2u);
    EXPECT_EQ(m["exit_code"], 0);
}

TEST_F(CliTest, MalformedConfigWritesNothing) {
    const auto cfg = write("bad.json", R"({"domain": {"variant": "unit_disk"}, "circulations": [1.0)");
    const auto out = dir_ / "out";
    EXPECT_EQ(run({"crit-find", "--config", cfg.string(), "--out", out.string()}), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(run({"crit-find", "--config", (dir_ / "missing.json").string(), "--out", out.string()}), 2);
    EXPECT_FALSE(fs::exists(out));
    const auto wrong = write("wrong.json", R"({"domain": {"variant": "square"}, "circulations": [1.0]})");
    EXPECT_EQ(run({"crit-find", "--config", wrong.string(), "--out", out.string()}), 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, UsageErrorsAreInputErrors) {
    EXPECT_EQ(run({"no-such-command", "--config", "x.json"}), 2);
    EXPECT_EQ(run({"kr-eval"}), 2);
    const auto cfg = write("c.json", R"({"domain": {"variant": "unit_disk"}, "configuration": [{"point": [1.5, 0], "kappa": 1}]})");
    EXPECT_EQ(run({"kr-eval", "--config", cfg.string(), "--out", (dir_ / "o").string()}), 2);
    EXPECT_NE(last_err_.find("outside"), std::string::npos);
    EXPECT_EQ(run({"kr-eval", "--config", cfg.string(), "--tol", "-1"}), 2);
}

TEST_F(CliTest, KrEvalMatchesTheLibrary) {
    const auto cfg = write("c.json", R"({"domain": {"variant": "unit_disk"}, "configuration": [{"point": [0.5, 0], "kappa": 1}]})");
    const auto out = dir_ / "out";
    ASSERT_EQ(run({"kr-eval", "--config", cfg.string(), "--out", out.string()}), 0) << last_err_;
    const auto rows = lines(slurp(out / "kr_eval.csv"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(std::stod(rows[1]), -std::log(0.75) / (4.0 * krv::pi));
}

TEST_F(CliTest, CollisionLeavesAnIncompleteCsv) {
    const auto cfg = write("c.json", R"({"domain": {"variant": "unit_disk"},
        "configuration": [{"point": [0.0, 0.0], "kappa": 1}, {"point": [0.0, 5e-7], "kappa": 1}], "pv": {"T": 1}})");
    const auto out = dir_ / "out";
    EXPECT_EQ(run({"pv-sim", "--config", cfg.string(), "--out", out.string()}), 3);
    const auto rows = lines(slurp(out / "trajectory.csv"));
    ASSERT_GE(rows.size(), 3u);
    EXPECT_EQ(rows.back(), "# INCOMPLETE");
    const auto m = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["exit_code"], 3);
}

TEST_F(CliTest, ConcentrateWritesOneRowPerEpsilonAndBlob) {
    const auto cfg = write("c.json", R"({"domain": {"variant": "unit_disk"}, "search": {"starts": 10},
        "concentrate": {"circulations": [1.0, -1.0], "schedule": [0.1, 0.07, 0.05, 0.04]}})");
    const auto out = dir_ / "out";
    ASSERT_EQ(run({"concentrate", "--config", cfg.string(), "--out", out.string(), "--seed", "7"}), 0) << last_err_;
    const auto rows = lines(slurp(out / "concentration.csv"));
    ASSERT_EQ(rows.size(), 1u + 4u * 2u);
    EXPECT_EQ(rows[0], "epsilon,lambda,blob_index,centroid_x1,centroid_x2,dist_to_critical,residual,iterations,converged");
    const auto m = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["seed"], 7u);
}

TEST_F(CliTest, ResidualOfDumpedFieldsMatchesInlineBuild) {
    const auto cfg = write("s.json", R"({"domain": {"variant": "unit_disk"},
        "steady": {"centers": [[0.1, 0.05]], "circulations": [1.0], "epsilon": 0.1, "delta": 0.3},
        "residual": {"test_functions": [{"center": [0.1, 0.05], "radius": 0.3}]}})");
    ASSERT_EQ(run({"steady-build", "--config", cfg.string(), "--out", (dir_ / "b").string()}), 0) << last_err_;
    const auto meta = json::parse(slurp(dir_ / "b" / "blob_0.json"));
    EXPECT_TRUE(meta["solution"]["converged"].get<bool>());
    ASSERT_EQ(run({"residual", "--config", cfg.string(), "--out", (dir_ / "r1").string()}), 0) << last_err_;

    const auto cfg2 = write("r.json", R"({"domain": {"variant": "unit_disk"},
        "residual": {"fields": ["b/blob_0.bin"], "test_functions": [{"center": [0.1, 0.05], "radius": 0.3}]}})");
    ASSERT_EQ(run({"residual", "--config", cfg2.string(), "--out", (dir_ / "r2").string()}), 0) << last_err_;
    EXPECT_EQ(slurp(dir_ / "r1" / "residual.csv"), slurp(dir_ / "r2" / "residual.csv"));
}

TEST_F(CliTest, NumbersRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(krv::io::fmt(v)), v);
    EXPECT_EQ(krv::io::fmt(-0.0), "0");
    krv::io::CsvWriter w({"a", "b"});
    w.row(1, std::string("x,y"));
    EXPECT_EQ(w.finish(false), "a,b\n1,\"x,y\"\n# INCOMPLETE\n");
}
