// Copyright 2026 The lavish Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "process_util.hpp"

namespace lavish {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::read_file;
using testing::run_cli;
using testing::snapshot;
using testing::write_file;

json small_config() {
    return {{"d", 16},          {"heads", 2},       {"layers", 1},      {"patch", 8},  {"mode", "bidirectional"},
            {"m", 2},           {"rho", 4},         {"groups", 2},      {"steps", 6},  {"batch_size", 8},
            {"eval_every", 3},  {"train_count", 16}, {"test_count", 8}, {"seeds", {0, 1}},
            {"m_values", {2, 4, 8}}};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("lavish_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        config_ = dir_ / "config.json";
        write_file(config_, small_config().dump(2));
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& sub, const std::string& extra = "", const std::string& env = "") {
        return run_cli(sub + " --config '" + config_.string() + "' --out '" + (dir_ / "out").string() + "' " + extra,
                       dir_ / "log.txt", env);
    }
    std::string log() const { return read_file(dir_ / "log.txt"); }
    std::string out(const std::string& name) const { return read_file(dir_ / "out" / name); }

    fs::path dir_;
    fs::path config_;
};

TEST_F(Cli, MissingRequiredFieldExitsTwoAndNamesIt) {
    json j = small_config();
    j.erase("d");
    write_file(config_, j.dump());
    EXPECT_EQ(run("train"), 2);
    EXPECT_NE(log().find("d: required field is missing"), std::string::npos) << log();
}

TEST_F(Cli, InvalidConfigurationsExitTwo) {
    for (const json& patch : {json{{"rho", 5}}, json{{"groups", 3}}, json{{"mode", "sideways"}}, json{{"bogus", 1}},
                              json{{"noise", 1.5}}, json{{"d", "wide"}}}) {
        json j = small_config();
        j.update(patch);
        write_file(config_, j.dump());
        EXPECT_EQ(run("train"), 2) << patch.dump() << "\n" << log();
        EXPECT_NE(log().find(patch.begin().key()), std::string::npos) << log();
    }
    write_file(config_, "{ not json");
    EXPECT_EQ(run("cost-report"), 2);
    EXPECT_EQ(run_cli("train --config '" + (dir_ / "absent.json").string() + "'", dir_ / "log.txt"), 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli("train", dir_ / "log.txt"), 2);
    EXPECT_EQ(run_cli("", dir_ / "log.txt"), 2);
    EXPECT_EQ(run_cli("fly --config x", dir_ / "log.txt"), 2);
    EXPECT_EQ(run("latent-sweep", "--m-values 0"), 2);
}

TEST_F(Cli, RuntimeFailureExitsThree) {
    write_file(dir_ / "out", "a file where the output directory should be");
    EXPECT_EQ(run("cost-report"), 3) << log();
}

TEST_F(Cli, ZeroStepsWritesOneEvaluationRow) {
    json j = small_config();
    j["steps"] = 0;
    write_file(config_, j.dump());
    ASSERT_EQ(run("train", "--quiet"), 0) << log();
    const std::string csv = out("metrics.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_NE(csv.find("\n0,"), std::string::npos);
}

TEST_F(Cli, TrainWritesResolvedConfigAndWeights) {
    ASSERT_EQ(run("train", "--quiet --seed 7"), 0) << log();
    const json resolved = json::parse(out("config.resolved.json"));
    EXPECT_EQ(resolved["seed"], 7);
    EXPECT_EQ(resolved["seeds"], json::array({7}));
    EXPECT_EQ(resolved["adapter_activation"], "relu");
    EXPECT_TRUE(fs::exists(dir_ / "out" / "weights.json"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "weights.bin"));
    const json w = json::parse(out("weights.json"));
    EXPECT_EQ(w["meta"]["frozen_sha256"].get<std::string>().size(), 64u);
    EXPECT_EQ(read_file(config_), small_config().dump(2));
}

TEST_F(Cli, QuietSuppressesProgress) {
    ASSERT_EQ(run("train", "--quiet"), 0);
    EXPECT_TRUE(log().empty()) << log();
    ASSERT_EQ(run("train"), 0);
    EXPECT_FALSE(log().empty());
}

TEST_F(Cli, EverySubcommandIsByteIdenticalAcrossRuns) {
    for (const std::string sub : {"train", "ablation", "latent-sweep", "cost-report"}) {
        fs::remove_all(dir_ / "out");
        ASSERT_EQ(run(sub, "--quiet"), 0) << sub << log();
        const auto first = snapshot(dir_ / "out");
        fs::remove_all(dir_ / "out");
        ASSERT_EQ(run(sub, "--quiet"), 0) << sub << log();
        EXPECT_FALSE(first.empty());
        EXPECT_EQ(snapshot(dir_ / "out"), first) << sub;
    }
}

TEST_F(Cli, AblationGridShape) {
    ASSERT_EQ(run("ablation", "--quiet"), 0) << log();
    const std::string csv = out("ablation.csv");
    std::vector<std::string> lines;
    std::istringstream is(csv);
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 9u);
    EXPECT_EQ(lines[0], "method,a2v,v2a,accuracy");
    EXPECT_EQ(lines[1].substr(0, 10), "avish,0,0,");
    EXPECT_EQ(lines[5].substr(0, 11), "lavish,0,0,");
    EXPECT_EQ(lines[1].substr(9), lines[5].substr(10));
    const std::string runs = out("ablation_runs.csv");
    EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 1 + 8 * 2);
}

TEST_F(Cli, LatentSweepSingleValueAndAffineMacs) {
    ASSERT_EQ(run("latent-sweep", "--quiet --m-values 2"), 0) << log();
    std::string csv = out("latent_sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_EQ(csv.rfind("m,accuracy,fusion_macs\n2,", 0), 0u);

    ASSERT_EQ(run("latent-sweep", "--quiet"), 0) << log();
    csv = out("latent_sweep.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    std::vector<std::pair<long long, long long>> pts;
    while (std::getline(is, line)) {
        const auto c1 = line.find(','), c2 = line.rfind(',');
        pts.emplace_back(std::stoll(line.substr(0, c1)), std::stoll(line.substr(c2 + 1)));
    }
    ASSERT_EQ(pts.size(), 3u);
    // m = 2, 4, 8: equal MAC increments per unit of m.
    EXPECT_EQ((pts[1].second - pts[0].second) * (pts[2].first - pts[1].first),
              (pts[2].second - pts[1].second) * (pts[1].first - pts[0].first));
    EXPECT_GT(pts[1].second, pts[0].second);
}

TEST_F(Cli, CostReportFrozenOnlyAndGroupedRatio) {
    config_ = fs::path(LAVISH_CONFIG_DIR) / "frozen_only.json";
    const std::string before = read_file(config_);
    ASSERT_EQ(run("cost-report", "--quiet"), 0) << log();
    EXPECT_EQ(read_file(config_), before);
    const json rep = json::parse(out("cost_report.json"));
    EXPECT_EQ(rep["variants"]["lavish"]["trainable_params"], 0);
    EXPECT_EQ(rep["variants"]["avish"]["trainable_params"], 0);
    EXPECT_TRUE(rep["fusion_mac_ratio_avish_over_lavish"].is_null());

    config_ = fs::path(LAVISH_CONFIG_DIR) / "reference.json";
    ASSERT_EQ(run("cost-report", "--quiet"), 0) << log();
    const json ref = json::parse(out("cost_report.json"));
    EXPECT_EQ(ref["grouped_adapter"]["ratio"], 0.5);
    EXPECT_EQ(read_file(dir_ / "out" / "cost_lavish.csv").rfind("name,frozen,trainable,macs\n", 0), 0u);
}

TEST_F(Cli, TrainMetricsMatchGolden) {
    ASSERT_EQ(run("train", "--quiet", "LAVISH_SIMD=scalar"), 0) << log();
    const fs::path golden = fs::path(LAVISH_GOLDEN_DIR) / "train_small_metrics.csv";
    ASSERT_TRUE(fs::exists(golden)) << golden;
    EXPECT_EQ(out("metrics.csv"), read_file(golden));
}

}  // namespace
}  // namespace lavish
