#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "semaudit/report.hpp"
#include "support.hpp"

using namespace semaudit;
using testing_support::read_file;
using testing_support::run_cli;
using testing_support::scratch_dir;
using testing_support::source_path;
using testing_support::write_text;

namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const fs::path kScores = source_path("data/scores.csv");
const fs::path kTaxonomy = source_path("data/taxonomy.json");

constexpr const char* kSmallTaxonomy =
    R"({"constructs": [{"id": "A", "indicators": ["a1", "a2"]}, {"id": "B", "indicators": ["b1", "b2"]}], "paths": [["A", "B"]]})";

std::string small_scores(bool constant_b2) {
    std::string s = "model_id,a1,a2,b1,b2\n";
    for (int i = 0; i < 8; ++i) {
        const double a = i, b = (i * 5) % 8;
        s += "m" + std::to_string(i) + "," + std::to_string(a) + "," + std::to_string(a + (i % 3)) + "," +
             std::to_string(b) + "," + (constant_b2 ? std::string("4") : std::to_string(b + (i % 2))) + "\n";
    }
    return s;
}

} // namespace

TEST(Cli, AnalyzeIsByteDeterministic) {
    const auto dir = scratch_dir("cli_analyze");
    const std::string base = "analyze --scores " + q(kScores) + " --taxonomy " + q(kTaxonomy) + " --human " +
                             q(source_path("data/human.csv"));
    ASSERT_EQ(run_cli(base + " -o " + q(dir / "a.json") + " --plot-data " + q(dir / "plots")), 0);
    ASSERT_EQ(run_cli(base + " -o " + q(dir / "b.json")), 0);
    const std::string a = read_file(dir / "a.json");
    EXPECT_EQ(a, read_file(dir / "b.json"));
    const auto doc = nlohmann::json::parse(a);
    EXPECT_EQ(testing_support::load_schema("diagnostics_report.schema.json").check(doc), "");
    EXPECT_TRUE(doc["diagnostics"]["human_alignment"]["pearson"].is_number());
    for (const char* f : {"htmt.csv", "indicators.csv", "reliability.csv", "benchmark.csv"})
        EXPECT_TRUE(fs::exists(dir / "plots" / f)) << f;
}

TEST(Cli, PruneIsByteDeterministicAndWritesTaxonomy) {
    const auto dir = scratch_dir("cli_prune");
    const std::string base = "prune --scores " + q(kScores) + " --taxonomy " + q(kTaxonomy);
    ASSERT_EQ(run_cli(base + " -o " + q(dir / "a.json")), 0);
    ASSERT_EQ(run_cli(base + " -o " + q(dir / "b.json") + " --refined-taxonomy " + q(dir / "refined.json")), 0);
    EXPECT_EQ(read_file(dir / "a.json"), read_file(dir / "b.json"));
    EXPECT_TRUE(fs::exists(dir / "a.taxonomy.json"));
    const auto trace = nlohmann::json::parse(read_file(dir / "a.json"));
    ASSERT_EQ(trace["termination"], "clean");
    EXPECT_TRUE(trace["steps"].empty());
    // no removals: the refined taxonomy is the input in canonical form
    EXPECT_EQ(read_file(dir / "refined.json"), canonical_json(taxonomy_to_json(parse_taxonomy(read_file(kTaxonomy)))));
}

TEST(Cli, SimulateThenAnalyzeRoundTrip) {
    const auto dir = scratch_dir("cli_sim");
    ASSERT_EQ(run_cli("simulate --spec " + q(source_path("data/demo_spec.json")) + " --seed 3 -o " + q(dir / "s.csv") +
                      " --taxonomy-out " + q(dir / "t.json")),
              0);
    EXPECT_TRUE(fs::exists(dir / "s.truth.json"));
    const ScoreMatrix m = parse_scores(read_file(dir / "s.csv"));
    EXPECT_EQ(m.rows(), 150);
    EXPECT_EQ(run_cli("analyze --scores " + q(dir / "s.csv") + " --taxonomy " + q(dir / "t.json") + " -o " +
                      q(dir / "r.json")),
              0);
    ASSERT_EQ(run_cli("simulate --spec " + q(source_path("data/demo_spec.json")) + " --seed 3 -o " + q(dir / "s2.csv")), 0);
    EXPECT_EQ(read_file(dir / "s.csv"), read_file(dir / "s2.csv"));
}

TEST(Cli, RankWithSubsets) {
    const auto dir = scratch_dir("cli_rank");
    write_text(dir / "o.csv", "model_id,score\na,1\nb,2\nc,3\nd,4\ne,5\n");
    write_text(dir / "r.csv", "model_id,score\na,1\nb,3\nc,2\nd,4\ne,5\nf,9\n");
    write_text(dir / "h.csv", "model_id,score\na,1\nb,2\nc,3\nd,5\ne,4\n");
    ASSERT_EQ(run_cli("rank --original " + q(dir / "o.csv") + " --refined " + q(dir / "r.csv") + " --human " +
                      q(dir / "h.csv") + " --subset top:3 --subset bottom:2 -o " + q(dir / "rank.json")),
              0);
    const auto doc = nlohmann::json::parse(read_file(dir / "rank.json"));
    EXPECT_EQ(testing_support::load_schema("rank_report.schema.json").check(doc), "");
    EXPECT_EQ(doc["n_joined"], 5);
    EXPECT_EQ(doc["dropped_models"], nlohmann::json::array({"f"}));
    ASSERT_EQ(doc["subsets"].size(), 2u);
    EXPECT_EQ(doc["subsets"][0]["n"], 3);
    EXPECT_TRUE(doc["subsets"][1]["origin_vs_human"].is_null());
}

TEST(Cli, UsageErrorsExitOne) {
    const auto dir = scratch_dir("cli_usage");
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("analyze --scores " + q(kScores)), 1);
    EXPECT_EQ(run_cli("analyze --bogus-flag"), 1);
    EXPECT_EQ(run_cli("prune --scores " + q(kScores) + " --taxonomy " + q(kTaxonomy) + " --loading-threshold 1.5 -o " +
                      q(dir / "x.json")),
              1);
    EXPECT_EQ(run_cli("rank --original a --refined b --human c -o x --subset middle:3"), 1);
}

TEST(Cli, MissingFileExitsTwoAndNamesPath) {
    const auto dir = scratch_dir("cli_missing");
    const fs::path missing = dir / "no_such_taxonomy.json";
    EXPECT_EQ(run_cli("analyze --scores " + q(kScores) + " --taxonomy " + q(missing) + " -o " + q(dir / "r.json"),
                      dir / "err.txt"),
              2);
    EXPECT_NE(read_file(dir / "err.txt").find("no_such_taxonomy.json"), std::string::npos);
}

TEST(Cli, ParseErrorExitsTwo) {
    const auto dir = scratch_dir("cli_parse");
    write_text(dir / "s.csv", "model_id,a1,a2\nm1,1,oops\n");
    write_text(dir / "t.json", kSmallTaxonomy);
    EXPECT_EQ(run_cli("analyze --scores " + q(dir / "s.csv") + " --taxonomy " + q(dir / "t.json") + " -o " +
                      q(dir / "r.json")),
              2);
}

TEST(Cli, ZeroVarianceExitsThreeAndNamesColumn) {
    const auto dir = scratch_dir("cli_validate");
    write_text(dir / "s.csv", small_scores(true));
    write_text(dir / "t.json", kSmallTaxonomy);
    EXPECT_EQ(run_cli("analyze --scores " + q(dir / "s.csv") + " --taxonomy " + q(dir / "t.json") + " -o " +
                          q(dir / "r.json"),
                      dir / "err.txt"),
              3);
    EXPECT_NE(read_file(dir / "err.txt").find("b2"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "r.json"));
}

TEST(Cli, EstimationFailureExitsFour) {
    const auto dir = scratch_dir("cli_estimate");
    std::string s = "model_id,a1,a2,a3,b1,b2\n";
    for (int i = 0; i < 10; ++i) {
        const int a = (i * 7) % 10, b = (i * 3) % 10;
        s += "m" + std::to_string(i) + "," + std::to_string(a) + "," + std::to_string(a) + "," +
             std::to_string(a + i % 3) + "," + std::to_string(b) + "," + std::to_string(b + i % 2) + "\n";
    }
    write_text(dir / "s.csv", s);
    write_text(dir / "t.json", R"({"constructs": [{"id": "A", "indicators": ["a1", "a2", "a3"], "mode": "regression"},
                                                  {"id": "B", "indicators": ["b1", "b2"]}], "paths": [["A", "B"]]})");
    EXPECT_EQ(run_cli("analyze --scores " + q(dir / "s.csv") + " --taxonomy " + q(dir / "t.json") + " -o " +
                      q(dir / "r.json")),
              4);
    EXPECT_EQ(run_cli("prune --scores " + q(dir / "s.csv") + " --taxonomy " + q(dir / "t.json") + " -o " +
                      q(dir / "p.json")),
              4);
    const auto trace = nlohmann::json::parse(read_file(dir / "p.json"));
    EXPECT_EQ(trace["termination"], "error");
}

TEST(Cli, ConfigFileSitsBetweenFlagsAndDefaults) {
    const auto dir = scratch_dir("cli_config");
    write_text(dir / "cfg.toml", "[prune]\nvif-threshold = 3.5\nloading-threshold = 0.6\n");
    const std::string base = "--config " + q(dir / "cfg.toml") + " prune --scores " + q(kScores) + " --taxonomy " + q(kTaxonomy);
    ASSERT_EQ(run_cli(base + " --loading-threshold 0.7 -o " + q(dir / "p.json")), 0);
    const auto cfg = nlohmann::json::parse(read_file(dir / "p.json"))["config"];
    EXPECT_EQ(cfg["vif_threshold"], 3.5);
    EXPECT_EQ(cfg["loading_threshold"], 0.7);
    ASSERT_EQ(run_cli("prune --scores " + q(kScores) + " --taxonomy " + q(kTaxonomy) + " -o " + q(dir / "d.json")), 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(dir / "d.json"))["config"]["vif_threshold"], 5.0);
}
