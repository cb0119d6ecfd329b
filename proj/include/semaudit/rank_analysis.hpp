#pragma once

// Per-model composite scores and ranking-stability comparisons between an
// original leaderboard aggregate, a refined benchmark score and a human
// reference.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "semaudit/error.hpp"
#include "semaudit/estimator.hpp"
#include "semaudit/metric.hpp"
#include "semaudit/model.hpp"
#include "semaudit/numerics.hpp"

namespace semaudit {

struct CompositeScores {
    std::vector<std::string> model_ids;
    Eigen::VectorXd values;
    std::string source; ///< construct id, or "first_order_mean" for flat taxonomies
    bool converged = true;

    ModelScores as_model_scores() const {
        return {model_ids, std::vector<double>(values.data(), values.data() + values.size())};
    }
};

/// The top-level construct: the first declared second-order construct with
/// no second-order successor.
inline std::optional<std::string> top_level_construct(const Taxonomy& t) {
    for (const auto& c : t.constructs) {
        if (c.level != Level::second) continue;
        bool has_second_order_successor = false;
        for (const auto& [src, dst] : t.paths)
            if (src == c.id && t.construct(dst).level == Level::second) has_second_order_successor = true;
        if (!has_second_order_successor) return c.id;
    }
    return std::nullopt;
}

/// Hierarchical taxonomies score each model by the top-level construct.
/// Flat taxonomies average the first-order scores weighted by each
/// construct's task count, then restandardize.
inline CompositeScores composite_score(const FittedModel& fitted, const ValidatedDataset& data) {
    CompositeScores out;
    out.model_ids = data.scores.model_ids;
    out.converged = fitted.converged;
    if (const auto top = top_level_construct(data.taxonomy)) {
        out.values = fitted.score(*top);
        out.source = *top;
        return out;
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(data.n());
    double total = 0.0;
    for (const auto& c : data.taxonomy.constructs) {
        const double w = static_cast<double>(c.indicator_ids.size());
        if (w == 0.0) continue;
        acc += w * fitted.score(c.id);
        total += w;
    }
    if (total == 0.0) throw Error(ErrorCode::StructureError, "taxonomy has no task indicators to aggregate");
    out.values = standardize(acc / total);
    out.source = "first_order_mean";
    return out;
}

/// Unweighted mean of each model's non-missing raw task scores.
inline ModelScores leaderboard_mean(const ScoreMatrix& raw) {
    ModelScores out;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            if (raw.is_missing(r, c)) continue;
            sum += raw.values(r, c);
            ++count;
        }
        if (count == 0) continue;
        out.model_ids.push_back(raw.model_ids[static_cast<std::size_t>(r)]);
        out.values.push_back(sum / count);
    }
    return out;
}

enum class SubsetKind { top, bottom };
enum class SubsetKey { human, original, refined };

struct SubsetDef {
    std::string name;
    SubsetKind kind = SubsetKind::top;
    std::size_t k = 0;
    SubsetKey key = SubsetKey::human;
};

struct RankCells {
    std::size_t n = 0;
    MetricValue origin_vs_refined;
    MetricValue origin_vs_human;
    MetricValue refined_vs_human;
};

struct RankReport {
    std::size_t n_joined = 0;
    std::vector<std::string> dropped_models;
    RankCells overall;
    std::vector<std::pair<std::string, RankCells>> subsets;
    MetricValue pearson_refined_vs_human;
};

namespace detail {

inline MetricValue safe_correlation(const std::vector<double>& x, const std::vector<double>& y, bool rank) {
    if (x.size() < 3) return MetricValue::undefined("fewer than three models");
    try {
        return MetricValue::of(rank ? spearman(x, y) : pearson(x, y));
    } catch (const Error& e) {
        return MetricValue::undefined(e.what());
    }
}

inline RankCells rank_cells(const std::vector<double>& o, const std::vector<double>& r, const std::vector<double>& h) {
    RankCells c;
    c.n = o.size();
    c.origin_vs_refined = safe_correlation(o, r, true);
    c.origin_vs_human = safe_correlation(o, h, true);
    c.refined_vs_human = safe_correlation(r, h, true);
    return c;
}

inline std::map<std::string, double> to_map(const ModelScores& s) {
    if (s.model_ids.size() != s.values.size())
        throw Error(ErrorCode::LengthMismatch, "model id and score counts differ");
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < s.model_ids.size(); ++i)
        if (!m.emplace(s.model_ids[i], s.values[i]).second)
            throw Error(ErrorCode::DuplicateModel, "model '" + s.model_ids[i] + "' appears twice");
    return m;
}

} // namespace detail

/// Inner-joins the three score vectors on model id (sorted by id, so input
/// order never matters) and reports Spearman correlations overall and per
/// subset, plus the refined-vs-human Pearson correlation.
inline RankReport rank_report(const ModelScores& original, const ModelScores& refined, const ModelScores& human,
                              const std::vector<SubsetDef>& subsets = {}) {
    const auto mo = detail::to_map(original);
    const auto mr = detail::to_map(refined);
    const auto mh = detail::to_map(human);

    std::set<std::string> all;
    for (const auto* m : {&mo, &mr, &mh})
        for (const auto& [id, _] : *m) all.insert(id);

    RankReport rep;
    std::vector<std::string> ids;
    std::vector<double> o, r, h;
    for (const auto& id : all) {
        if (mo.count(id) && mr.count(id) && mh.count(id)) {
            ids.push_back(id);
            o.push_back(mo.at(id));
            r.push_back(mr.at(id));
            h.push_back(mh.at(id));
        } else {
            rep.dropped_models.push_back(id);
        }
    }
    rep.n_joined = ids.size();
    rep.overall = detail::rank_cells(o, r, h);
    rep.pearson_refined_vs_human = detail::safe_correlation(r, h, false);

    for (const auto& def : subsets) {
        const auto& key = def.key == SubsetKey::human ? h : (def.key == SubsetKey::original ? o : r);
        std::vector<std::size_t> order(ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (key[a] != key[b]) return def.kind == SubsetKind::top ? key[a] > key[b] : key[a] < key[b];
            return ids[a] < ids[b];
        });
        order.resize(std::min(def.k, order.size()));
        std::vector<double> so, sr, sh;
        for (std::size_t i : order) {
            so.push_back(o[i]);
            sr.push_back(r[i]);
            sh.push_back(h[i]);
        }
        rep.subsets.emplace_back(def.name, detail::rank_cells(so, sr, sh));
    }
    return rep;
}

} // namespace semaudit
