#pragma once

// PLS path-model estimation.
//
// The fixed point alternates three steps per stage:
//   scores  = standardized X_j w_j for every block j
//   proxies = centroid inner approximation, sum_k sgn(corr(s_j, s_k)) s_k
//   weights = corr(x_ij, z_j) (or OLS of z_j on the block), unit-normalized
// until the largest absolute weight change drops below epsilon.
//
// Hierarchies are estimated in two stages. Stage one covers the first-order
// constructs; a second-order construct with external indicators joins stage
// one measured by those externals alone so that its components see it as a
// neighbour. Stage two re-estimates every second-order construct from its
// components' stage-one scores plus its external indicators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semaudit/error.hpp"
#include "semaudit/model.hpp"
#include "semaudit/numerics.hpp"

namespace semaudit {

struct EstimatorConfig {
    double epsilon = 1e-7;
    int max_iter = 300;

    void check() const {
        if (!(epsilon > 0.0)) throw Error(ErrorCode::DomainError, "epsilon must be positive");
        if (max_iter < 1) throw Error(ErrorCode::DomainError, "max_iter must be at least 1");
    }
};

enum class IndicatorKind { task, external, construct_score };

inline std::string_view to_string(IndicatorKind k) {
    switch (k) {
    case IndicatorKind::task: return "task";
    case IndicatorKind::external: return "external";
    case IndicatorKind::construct_score: return "construct_score";
    }
    return "task";
}

struct StageBlock {
    std::string construct;
    std::vector<std::string> indicators;
    std::vector<IndicatorKind> kinds;
    std::vector<Eigen::Index> columns; ///< into StageModel::data
    OuterMode mode = OuterMode::correlation;
};

/// Block layout of one estimation stage over standardized columns.
struct StageModel {
    Eigen::MatrixXd data;
    std::vector<StageBlock> blocks;
    std::vector<std::vector<std::size_t>> neighbors; ///< undirected structural adjacency

    Eigen::MatrixXd block_data(std::size_t j) const {
        const auto& cols = blocks[j].columns;
        Eigen::MatrixXd out(data.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = data.col(cols[k]);
        return out;
    }

    std::optional<std::size_t> block_of(std::string_view construct) const {
        for (std::size_t j = 0; j < blocks.size(); ++j)
            if (blocks[j].construct == construct) return j;
        return std::nullopt;
    }
};

/// One unit-norm weight vector per stage block.
using WeightSet = std::vector<Eigen::VectorXd>;

/// Models x blocks, every column standardized.
using LatentScores = Eigen::MatrixXd;

enum class IsolatedBlocks {
    reject,    ///< a block without structural neighbours is a StructureError
    self_proxy ///< the block's own score serves as its proxy
};

namespace detail {

inline void link_neighbors(StageModel& stage, const Taxonomy& t) {
    stage.neighbors.assign(stage.blocks.size(), {});
    for (const auto& [src, dst] : t.paths) {
        const auto a = stage.block_of(src);
        const auto b = stage.block_of(dst);
        if (!a || !b) continue;
        auto add = [&](std::size_t from, std::size_t to) {
            auto& n = stage.neighbors[from];
            if (std::find(n.begin(), n.end(), to) == n.end()) n.push_back(to);
        };
        add(*a, *b);
        add(*b, *a);
    }
}

} // namespace detail

/// Stage one: first-order constructs over task and external indicators, plus
/// any second-order construct that owns external indicators.
inline StageModel first_stage(const ValidatedDataset& data) {
    const Taxonomy& t = data.taxonomy;
    StageModel stage;
    std::vector<std::string> cols;
    for (const auto& c : t.constructs) {
        const auto externals = t.externals_of(c.id);
        if (c.level == Level::second && externals.empty()) continue;
        StageBlock b;
        b.construct = c.id;
        b.mode = c.mode;
        if (c.level == Level::first) {
            for (const auto& i : c.indicator_ids) {
                b.indicators.push_back(i);
                b.kinds.push_back(IndicatorKind::task);
            }
        }
        for (const auto& e : externals) {
            b.indicators.push_back(e);
            b.kinds.push_back(IndicatorKind::external);
        }
        for (const auto& i : b.indicators) {
            b.columns.push_back(static_cast<Eigen::Index>(cols.size()));
            cols.push_back(i);
        }
        stage.blocks.push_back(std::move(b));
    }
    stage.data = data.columns(cols);
    detail::link_neighbors(stage, t);
    return stage;
}

/// Stage two: second-order constructs over their components' scores and
/// their external indicators. `first_order_scores` maps construct id to the
/// stage-one score column.
inline StageModel second_stage(const ValidatedDataset& data,
                               const std::map<std::string, Eigen::VectorXd>& first_order_scores) {
    const Taxonomy& t = data.taxonomy;
    StageModel stage;
    std::vector<Eigen::VectorXd> cols;
    for (const auto& c : t.constructs) {
        if (c.level != Level::second) continue;
        StageBlock b;
        b.construct = c.id;
        b.mode = c.mode;
        for (const auto& comp : t.components_of(c.id)) {
            b.indicators.push_back(comp);
            b.kinds.push_back(IndicatorKind::construct_score);
            cols.push_back(first_order_scores.at(comp));
        }
        for (const auto& e : t.externals_of(c.id)) {
            b.indicators.push_back(e);
            b.kinds.push_back(IndicatorKind::external);
            cols.push_back(data.scores.values.col(data.column(e)));
        }
        for (std::size_t k = 0; k < b.indicators.size(); ++k)
            b.columns.push_back(static_cast<Eigen::Index>(cols.size() - b.indicators.size() + k));
        stage.blocks.push_back(std::move(b));
    }
    stage.data.resize(data.n(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) stage.data.col(static_cast<Eigen::Index>(k)) = cols[k];
    detail::link_neighbors(stage, t);
    return stage;
}

/// Equal weights 1/sqrt(p_j) per block.
inline WeightSet initialize_weights(const StageModel& stage) {
    WeightSet w;
    w.reserve(stage.blocks.size());
    for (const auto& b : stage.blocks) {
        const auto p = static_cast<Eigen::Index>(b.columns.size());
        w.push_back(Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p))));
    }
    return w;
}

inline LatentScores latent_scores(const WeightSet& weights, const StageModel& stage) {
    if (weights.size() != stage.blocks.size())
        throw Error(ErrorCode::StructureError, "weight set does not match the stage's blocks");
    LatentScores s(stage.data.rows(), static_cast<Eigen::Index>(stage.blocks.size()));
    for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
        if (weights[j].size() != static_cast<Eigen::Index>(stage.blocks[j].columns.size()))
            throw Error(ErrorCode::StructureError, "weight vector size mismatch for '" + stage.blocks[j].construct + "'");
        const Eigen::VectorXd composite = stage.block_data(j) * weights[j];
        try {
            s.col(static_cast<Eigen::Index>(j)) = standardize(composite);
        } catch (const Error&) {
            throw Error(ErrorCode::DegenerateConstruct, "composite for '" + stage.blocks[j].construct + "' has zero variance");
        }
    }
    return s;
}

/// Centroid inner approximation: each proxy is the standardized signed sum of
/// the neighbouring construct scores.
inline Eigen::MatrixXd inner_proxies(const LatentScores& scores, const StageModel& stage,
                                     IsolatedBlocks isolated = IsolatedBlocks::reject) {
    Eigen::MatrixXd z(scores.rows(), scores.cols());
    for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const auto& neigh = stage.neighbors[j];
        if (neigh.empty()) {
            if (isolated == IsolatedBlocks::reject)
                throw Error(ErrorCode::StructureError, "construct '" + stage.blocks[j].construct + "' has no structural neighbours");
            z.col(jj) = scores.col(jj);
            continue;
        }
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(scores.rows());
        for (std::size_t k : neigh) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double r = pearson(column_span(scores, jj), column_span(scores, kk));
            const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            acc += sign * scores.col(kk);
        }
        try {
            z.col(jj) = standardize(acc);
        } catch (const Error&) {
            throw Error(ErrorCode::DegenerateConstruct, "inner proxy for '" + stage.blocks[j].construct + "' vanished");
        }
    }
    return z;
}

/// Outer approximation, before normalization. Correlation mode uses
/// corr(x_ij, z_j); regression mode the OLS coefficients of z_j on the block.
inline Eigen::VectorXd raw_outer_weights(const StageModel& stage, std::size_t j, const Eigen::VectorXd& proxy) {
    const auto& b = stage.blocks[j];
    const Eigen::MatrixXd x = stage.block_data(j);
    if (b.mode == OuterMode::regression) {
        try {
            return ols(x, proxy).slopes;
        } catch (const Error& e) {
            throw Error(ErrorCode::DegenerateConstruct, "regression weights for '" + b.construct + "': " + e.what());
        }
    }
    Eigen::VectorXd w(x.cols());
    for (Eigen::Index i = 0; i < x.cols(); ++i) w(i) = pearson(column_span(x, i), as_span(proxy));
    return w;
}

inline WeightSet update_weights(const StageModel& stage, const Eigen::MatrixXd& proxies) {
    WeightSet w;
    w.reserve(stage.blocks.size());
    for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
        Eigen::VectorXd raw = raw_outer_weights(stage, j, proxies.col(static_cast<Eigen::Index>(j)));
        const double norm = raw.norm();
        if (!(norm > 1e-12))
            throw Error(ErrorCode::DegenerateConstruct, "all outer weights of '" + stage.blocks[j].construct + "' vanished");
        w.push_back(raw / norm);
    }
    return w;
}

struct StageFit {
    WeightSet weights;
    LatentScores scores;
    std::vector<Eigen::VectorXd> loadings;
    int iterations = 0;
    bool converged = false;
};

inline double max_weight_change(const WeightSet& a, const WeightSet& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, (a[j] - b[j]).cwiseAbs().maxCoeff());
    return d;
}

/// Outer loadings corr(x_ij, score_j).
inline std::vector<Eigen::VectorXd> outer_loadings(const StageModel& stage, const LatentScores& scores) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
        const auto& cols = stage.blocks[j].columns;
        Eigen::VectorXd l(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i)
            l(static_cast<Eigen::Index>(i)) =
                pearson(column_span(stage.data, cols[i]), column_span(scores, static_cast<Eigen::Index>(j)));
        out.push_back(std::move(l));
    }
    return out;
}

/// Iterates one stage to its fixed point, then applies the sign convention:
/// every block is oriented so its loadings sum to a nonnegative value, with
/// an exact zero sum resolved by the first loading.
inline StageFit run_stage(const StageModel& stage, const EstimatorConfig& config) {
    config.check();
    StageFit fit;
    fit.weights = initialize_weights(stage);
    for (int it = 1; it <= config.max_iter; ++it) {
        const LatentScores s = latent_scores(fit.weights, stage);
        const Eigen::MatrixXd z = inner_proxies(s, stage, IsolatedBlocks::self_proxy);
        WeightSet next = update_weights(stage, z);
        const double delta = max_weight_change(next, fit.weights);
        fit.weights = std::move(next);
        fit.iterations = it;
        if (delta < config.epsilon) {
            fit.converged = true;
            break;
        }
    }
    fit.scores = latent_scores(fit.weights, stage);
    fit.loadings = outer_loadings(stage, fit.scores);
    for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
        const double sum = fit.loadings[j].sum();
        const bool flip = sum < 0.0 || (sum == 0.0 && fit.loadings[j](0) < 0.0);
        if (flip) {
            fit.weights[j] = -fit.weights[j];
            fit.loadings[j] = -fit.loadings[j];
            fit.scores.col(static_cast<Eigen::Index>(j)) *= -1.0;
        }
    }
    return fit;
}

struct OuterBlock {
    std::string construct;
    std::vector<std::string> indicators;
    std::vector<IndicatorKind> kinds;
    Eigen::VectorXd weights;
    Eigen::VectorXd loadings;
    int stage = 1;
};

struct PathCoefficient {
    std::string source;
    std::string target;
    double value = 0.0;
};

struct FittedModel {
    std::vector<std::string> constructs; ///< taxonomy order
    std::vector<OuterBlock> blocks;      ///< aligned with constructs
    Eigen::MatrixXd scores;              ///< models x constructs
    std::vector<PathCoefficient> paths;  ///< taxonomy path order
    std::map<std::string, double> r_squared;
    std::vector<int> stage_iterations;
    int iterations = 0; ///< largest stage iteration count
    bool converged = false;

    std::size_t index_of(std::string_view construct) const {
        for (std::size_t j = 0; j < constructs.size(); ++j)
            if (constructs[j] == construct) return j;
        throw Error(ErrorCode::UnknownConstruct, "construct '" + std::string(construct) + "' not in fitted model");
    }

    const OuterBlock& block(std::string_view construct) const { return blocks[index_of(construct)]; }

    Eigen::VectorXd score(std::string_view construct) const {
        return scores.col(static_cast<Eigen::Index>(index_of(construct)));
    }

    /// Outer loading of a task or external indicator.
    std::optional<double> loading(std::string_view indicator) const {
        for (const auto& b : blocks)
            for (std::size_t i = 0; i < b.indicators.size(); ++i)
                if (b.kinds[i] != IndicatorKind::construct_score && b.indicators[i] == indicator)
                    return b.loadings(static_cast<Eigen::Index>(i));
        return std::nullopt;
    }
};

/// Full estimation: stage one, stage two for any second-order constructs,
/// then structural OLS for every endogenous construct.
inline FittedModel fit(const ValidatedDataset& data, const EstimatorConfig& config = {}) {
    config.check();
    const Taxonomy& t = data.taxonomy;
    FittedModel model;
    for (const auto& c : t.constructs) model.constructs.push_back(c.id);
    model.blocks.resize(t.constructs.size());
    model.scores.resize(data.n(), static_cast<Eigen::Index>(t.constructs.size()));

    auto store = [&](const StageModel& stage, const StageFit& sf, int stage_no) {
        for (std::size_t j = 0; j < stage.blocks.size(); ++j) {
            const auto& b = stage.blocks[j];
            const std::size_t idx = model.index_of(b.construct);
            model.blocks[idx] = OuterBlock{b.construct, b.indicators, b.kinds, sf.weights[j], sf.loadings[j], stage_no};
            model.scores.col(static_cast<Eigen::Index>(idx)) = sf.scores.col(static_cast<Eigen::Index>(j));
        }
    };

    const StageModel s1 = first_stage(data);
    const StageFit f1 = run_stage(s1, config);
    store(s1, f1, 1);
    model.stage_iterations.push_back(f1.iterations);
    model.converged = f1.converged;

    const bool hierarchical = std::any_of(t.constructs.begin(), t.constructs.end(),
                                          [](const ConstructSpec& c) { return c.level == Level::second; });
    if (hierarchical) {
        std::map<std::string, Eigen::VectorXd> first_scores;
        for (std::size_t j = 0; j < s1.blocks.size(); ++j)
            first_scores[s1.blocks[j].construct] = f1.scores.col(static_cast<Eigen::Index>(j));
        const StageModel s2 = second_stage(data, first_scores);
        const StageFit f2 = run_stage(s2, config);
        store(s2, f2, 2);
        model.stage_iterations.push_back(f2.iterations);
        model.converged = model.converged && f2.converged;
    }
    model.iterations = *std::max_element(model.stage_iterations.begin(), model.stage_iterations.end());

    for (const auto& c : t.constructs) {
        const auto preds = t.predecessors(c.id);
        if (preds.empty()) continue;
        Eigen::MatrixXd x(data.n(), static_cast<Eigen::Index>(preds.size()));
        for (std::size_t k = 0; k < preds.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = model.score(preds[k]);
        const OlsFit o = ols(x, model.score(c.id));
        model.r_squared[c.id] = o.r_squared;
        for (std::size_t k = 0; k < preds.size(); ++k)
            model.paths.push_back({preds[k], c.id, o.slopes(static_cast<Eigen::Index>(k))});
    }
    // report paths in declaration order
    std::vector<PathCoefficient> ordered;
    for (const auto& [src, dst] : t.paths)
        for (const auto& p : model.paths)
            if (p.source == src && p.target == dst) ordered.push_back(p);
    model.paths = std::move(ordered);
    return model;
}

} // namespace semaudit
