#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "semaudit/report.hpp"
#include "semaudit/simulator.hpp"
#include "support.hpp"

using namespace semaudit;
using testing_support::load_schema;

namespace {

ValidatedDataset demo_dataset(std::size_t n = 80, std::uint64_t seed = 9) {
    SimSpec spec;
    spec.constructs = {{"A", {0.85, 0.8, 0.7}, {}, Level::first},
                       {"B", {0.9, 0.75}, {}, Level::first},
                       {"G", {0.9}, {}, Level::second}};
    spec.paths = {{"A", "G", 0.5}, {"B", "G", 0.4}};
    spec.n_models = n;
    spec.seed = seed;
    return validate(generate(spec).scores, taxonomy_for(spec));
}

} // namespace

TEST(FormatNumber, SixSignificantDigits) {
    EXPECT_EQ(format_number(0.123456789), "0.123457");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(-1e-300 * 1e-300), "0");
    EXPECT_EQ(format_number(123456789.0), "1.23457e+08");
    EXPECT_EQ(format_number(-2.5), "-2.5");
    EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "null");
}

TEST(CanonicalJson, SortedKeysAndStableLayout) {
    const auto j = nlohmann::json::parse(R"({"b": [1, 2.5, {"z": null, "a": "x"}], "a": true, "c": {}, "d": []})");
    EXPECT_EQ(canonical_json(j),
              "{\n  \"a\": true,\n  \"b\": [\n    1,\n    2.5,\n    {\n      \"a\": \"x\",\n      \"z\": null\n    }\n  ],\n"
              "  \"c\": {},\n  \"d\": []\n}\n");
}

TEST(CanonicalJson, ReparseIsFixedPoint) {
    const auto d = demo_dataset();
    const FittedModel f = fit(d);
    const auto doc = analysis_report_json(d, f, benchmark_report(f, d), composite_score(f, d), {});
    const std::string once = canonical_json(doc);
    EXPECT_EQ(canonical_json(nlohmann::json::parse(once)), once);
}

TEST(PutNumber, NonFiniteBecomesNullWithReason) {
    nlohmann::json j;
    put_number(j, "vif", std::numeric_limits<double>::infinity());
    put_number(j, "x", std::nan(""), "single-indicator construct");
    put_number(j, "ok", 2.0);
    EXPECT_TRUE(j["vif"].is_null());
    EXPECT_EQ(j["vif_reason"], "infinite");
    EXPECT_EQ(j["x_reason"], "single-indicator construct");
    EXPECT_EQ(j["ok"], 2.0);
    EXPECT_FALSE(j.contains("ok_reason"));
    put_metric(j, "m", MetricValue::undefined("fewer than three models"));
    EXPECT_TRUE(j["m"].is_null());
    EXPECT_EQ(j["m_reason"], "fewer than three models");
}

TEST(Schema, DiagnosticsReportConforms) {
    const auto d = demo_dataset();
    const FittedModel f = fit(d);
    const auto doc = analysis_report_json(d, f, benchmark_report(f, d), composite_score(f, d), {});
    EXPECT_EQ(load_schema("diagnostics_report.schema.json").check(doc), "");
    EXPECT_EQ(doc["kind"], "diagnostics_report");
    EXPECT_EQ(doc["schema_version"], "1.0");
}

TEST(Schema, PruneTraceConformsIncludingErrorCase) {
    const auto d = demo_dataset();
    const auto schema = load_schema("prune_trace.schema.json");
    EXPECT_EQ(schema.check(prune_trace_json(prune(d), d)), "");

    PruneTrace failed;
    failed.termination = Termination::error;
    failed.error_message = "SingularDesign: design matrix is rank deficient";
    failed.error_iteration = 1;
    failed.final_taxonomy = d.taxonomy;
    const auto doc = prune_trace_json(failed, d);
    EXPECT_EQ(schema.check(doc), "");
    EXPECT_TRUE(doc["final_model"].is_null());
    EXPECT_EQ(doc["error"]["iteration"], 1);
}

TEST(Schema, RankReportConforms) {
    const ModelScores a{{"a", "b", "c", "d"}, {1, 2, 3, 4}};
    const ModelScores b{{"a", "b", "c", "d"}, {2, 1, 3, 4}};
    const auto doc = rank_report_json(rank_report(a, b, a, {{"top2", SubsetKind::top, 2, SubsetKey::human}}));
    EXPECT_EQ(load_schema("rank_report.schema.json").check(doc), "");
    EXPECT_TRUE(doc["subsets"][0]["origin_vs_human"].is_null());
}

TEST(Schema, CheckerRejectsBrokenDocuments) {
    const auto schema = load_schema("rank_report.schema.json");
    const ModelScores a{{"a", "b", "c"}, {1, 2, 3}};
    auto doc = rank_report_json(rank_report(a, a, a));
    doc.erase("spearman");
    EXPECT_NE(schema.check(doc), "");
    doc = rank_report_json(rank_report(a, a, a));
    doc["unexpected"] = 1;
    EXPECT_NE(schema.check(doc), "");
}

TEST(ScoresCsv, RoundTripsThroughParser) {
    const auto sim = generate([] {
        SimSpec s;
        s.constructs = {{"A", {0.8, 0.7}, {}, Level::first}};
        s.n_models = 12;
        s.seed = 2;
        return s;
    }());
    std::ostringstream os;
    write_scores_csv(os, sim.scores);
    const ScoreMatrix back = parse_scores(os.str());
    EXPECT_EQ(back.model_ids, sim.scores.model_ids);
    EXPECT_EQ(back.values, sim.scores.values);
}

TEST(PlotTables, HeadersAndRows) {
    const auto d = demo_dataset();
    const FittedModel f = fit(d);
    const auto tables = plot_tables(benchmark_report(f, d));
    ASSERT_EQ(tables.size(), 4u);
    EXPECT_EQ(tables[0].first, "htmt.csv");
    EXPECT_EQ(tables[0].second.substr(0, tables[0].second.find('\n')), "construct,A,B");
    EXPECT_EQ(std::count(tables[1].second.begin(), tables[1].second.end(), '\n'), 6);
}
