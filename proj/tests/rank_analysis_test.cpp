#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "semaudit/rank_analysis.hpp"
#include "semaudit/simulator.hpp"
#include "support.hpp"

using namespace semaudit;

namespace {

double closed_form_rho(const std::vector<int>& perm) {
    const double n = static_cast<double>(perm.size());
    double d2 = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) d2 += std::pow(static_cast<double>(perm[i]) - static_cast<double>(i), 2);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

ModelScores scores(std::vector<std::string> ids, std::vector<double> v) { return {std::move(ids), std::move(v)}; }

} // namespace

TEST(Spearman, ClosedFormForEveryPermutation) {
    for (int n = 3; n <= 5; ++n) {
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<double> x(perm.begin(), perm.end());
        do {
            std::vector<double> y;
            for (int p : perm) y.push_back(10.0 * p + 0.5);
            EXPECT_NEAR(spearman(x, y), closed_form_rho(perm), 1e-12);
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST(Spearman, ClosedFormOnRandomPermutations) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 6 + trial % 5;
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<double> x, y;
        for (int i = 0; i < n; ++i) {
            x.push_back(std::exp(0.1 * i));
            y.push_back(-3.0 + perm[static_cast<std::size_t>(i)]);
        }
        EXPECT_NEAR(spearman(x, y), closed_form_rho(perm), 1e-12);
    }
}

TEST(RankReport, JoinDropsUnmatchedModels) {
    const auto o = scores({"a", "b", "c", "d", "x"}, {1, 2, 3, 4, 9});
    const auto r = scores({"d", "c", "b", "a"}, {4, 3, 2, 1});
    const auto h = scores({"a", "b", "c", "d", "y"}, {1, 2, 4, 3, 0});
    const RankReport rep = rank_report(o, r, h);
    EXPECT_EQ(rep.n_joined, 4u);
    EXPECT_EQ(rep.dropped_models, (std::vector<std::string>{"x", "y"}));
    EXPECT_NEAR(*rep.overall.origin_vs_refined, 1.0, 1e-12);
    EXPECT_NEAR(*rep.overall.refined_vs_human, 0.8, 1e-12);
}

TEST(RankReport, InputOrderDoesNotMatter) {
    const auto o = scores({"a", "b", "c", "d", "e"}, {5, 3, 4, 1, 2});
    const auto r = scores({"a", "b", "c", "d", "e"}, {2, 3, 5, 1, 4});
    const auto h = scores({"a", "b", "c", "d", "e"}, {1, 2, 3, 4, 5});
    const RankReport a = rank_report(o, r, h);
    const auto rev = [](ModelScores s) {
        std::reverse(s.model_ids.begin(), s.model_ids.end());
        std::reverse(s.values.begin(), s.values.end());
        return s;
    };
    const RankReport b = rank_report(rev(o), rev(r), rev(h));
    EXPECT_EQ(*a.overall.origin_vs_refined, *b.overall.origin_vs_refined);
    EXPECT_EQ(*a.overall.origin_vs_human, *b.overall.origin_vs_human);
    EXPECT_EQ(*a.pearson_refined_vs_human, *b.pearson_refined_vs_human);
}

TEST(RankReport, FewerThanThreeModelsIsUndefined) {
    const auto s = scores({"a", "b"}, {1, 2});
    const RankReport rep = rank_report(s, s, s);
    EXPECT_FALSE(rep.overall.origin_vs_refined.defined());
    EXPECT_FALSE(rep.overall.origin_vs_refined.reason.empty());
    EXPECT_FALSE(rep.pearson_refined_vs_human.defined());
}

TEST(RankReport, TopAndBottomSubsets) {
    std::vector<std::string> ids;
    std::vector<double> h, o, r;
    for (int i = 0; i < 10; ++i) {
        ids.push_back("m" + std::to_string(i));
        h.push_back(i);
        // original agrees with human on the top half only, refined everywhere
        o.push_back(i >= 5 ? i : 4 - i);
        r.push_back(i);
    }
    const RankReport rep = rank_report(scores(ids, o), scores(ids, r), scores(ids, h),
                                       {{"top5", SubsetKind::top, 5, SubsetKey::human},
                                        {"bottom5", SubsetKind::bottom, 5, SubsetKey::human},
                                        {"top2", SubsetKind::top, 2, SubsetKey::human}});
    ASSERT_EQ(rep.subsets.size(), 3u);
    EXPECT_EQ(rep.subsets[0].first, "top5");
    EXPECT_EQ(rep.subsets[0].second.n, 5u);
    EXPECT_NEAR(*rep.subsets[0].second.origin_vs_human, 1.0, 1e-12);
    EXPECT_NEAR(*rep.subsets[1].second.origin_vs_human, -1.0, 1e-12);
    EXPECT_NEAR(*rep.subsets[1].second.refined_vs_human, 1.0, 1e-12);
    EXPECT_FALSE(rep.subsets[2].second.origin_vs_human.defined());
}

TEST(RankReport, DuplicateModelIsRejected) {
    const auto s = scores({"a", "b", "c"}, {1, 2, 3});
    EXPECT_THROW(rank_report(scores({"a", "a", "c"}, {1, 2, 3}), s, s), Error);
}

TEST(CompositeScore, HierarchicalUsesTopConstruct) {
    SimSpec spec;
    spec.constructs = {{"A", {0.8, 0.8}, {}, Level::first}, {"B", {0.8, 0.7}, {}, Level::first}, {"G", {0.9}, {}, Level::second}};
    spec.paths = {{"A", "G", 0.5}, {"B", "G", 0.5}};
    spec.n_models = 60;
    spec.seed = 3;
    const auto d = validate(generate(spec).scores, taxonomy_for(spec));
    const FittedModel f = fit(d);
    const CompositeScores c = composite_score(f, d);
    EXPECT_EQ(c.source, "G");
    EXPECT_EQ(c.values, f.score("G"));
}

TEST(CompositeScore, FlatAveragesWeightedByTaskCount) {
    SimSpec spec;
    spec.constructs = {{"A", {0.8, 0.8, 0.7}, {}, Level::first}, {"B", {0.8, 0.7}, {}, Level::first}};
    spec.paths = {{"A", "B", 0.4}};
    spec.n_models = 60;
    spec.seed = 4;
    const auto d = validate(generate(spec).scores, taxonomy_for(spec));
    const FittedModel f = fit(d);
    const CompositeScores c = composite_score(f, d);
    EXPECT_EQ(c.source, "first_order_mean");
    const Eigen::VectorXd raw = 0.6 * f.score("A") + 0.4 * f.score("B");
    const Eigen::VectorXd expect = (raw.array() - raw.mean()) / std::sqrt(variance(as_span(raw)));
    EXPECT_LT((c.values - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LeaderboardMean, SkipsMissingCells) {
    const ScoreMatrix m = parse_scores("model_id,a,b,c\nA,1,2,3\nB,4,,8\nC,,,\n");
    const ModelScores s = leaderboard_mean(m);
    EXPECT_EQ(s.model_ids, (std::vector<std::string>{"A", "B"}));
    EXPECT_DOUBLE_EQ(s.values[0], 2.0);
    EXPECT_DOUBLE_EQ(s.values[1], 6.0);
}
