#pragma once

// Synthetic score matrices from a planted linear latent structure.
//
//   exogenous construct   xi  ~ N(0, 1)
//   endogenous construct  eta = sum beta_k pred_k + sqrt(1 - R2) zeta
//   indicator             x   = lambda xi + sqrt(1 - lambda^2) e
//
// Population construct variances are all one, so each indicator's population
// correlation with its construct equals the planted loading.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "semaudit/error.hpp"
#include "semaudit/model.hpp"

namespace semaudit {

struct SimConstruct {
    std::string id;
    std::vector<double> loadings;
    std::vector<std::string> indicator_ids; ///< defaults to <id>_1, <id>_2, ...
    Level level = Level::first;             ///< second-order indicators become external indicators
};

struct SimPath {
    std::string source;
    std::string target;
    double beta = 0.0;
};

struct SimSpec {
    std::vector<SimConstruct> constructs;
    std::vector<SimPath> paths;
    std::size_t n_models = 0;
    std::uint64_t seed = 0;
};

struct SimTruth {
    std::vector<std::string> construct_ids;
    Eigen::MatrixXd construct_scores;              ///< models x constructs, spec order
    std::map<std::string, double> planted_r_squared; ///< per endogenous construct
};

struct Simulation {
    ScoreMatrix scores;
    SimTruth truth;
};

/// mt19937_64 stream with a Box-Muller transform. The standard library's
/// normal_distribution is implementation-defined, so it is avoided to keep
/// draws identical across toolchains.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (cached_) {
            const double v = *cached_;
            cached_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

private:
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 engine_;
    std::optional<double> cached_;
};

inline std::vector<std::string> indicator_ids_of(const SimConstruct& c) {
    if (!c.indicator_ids.empty()) return c.indicator_ids;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < c.loadings.size(); ++i) out.push_back(c.id + "_" + std::to_string(i + 1));
    return out;
}

namespace detail {

/// Kahn's algorithm, ties resolved by declaration order.
inline std::vector<std::size_t> topological_order(const SimSpec& spec, const std::map<std::string, std::size_t>& index) {
    const std::size_t m = spec.constructs.size();
    std::vector<int> indegree(m, 0);
    std::vector<std::vector<std::size_t>> succ(m);
    for (const auto& p : spec.paths) {
        succ[index.at(p.source)].push_back(index.at(p.target));
        ++indegree[index.at(p.target)];
    }
    std::vector<std::size_t> order;
    std::vector<bool> done(m, false);
    while (order.size() < m) {
        bool progressed = false;
        for (std::size_t j = 0; j < m; ++j) {
            if (done[j] || indegree[j] != 0) continue;
            done[j] = true;
            order.push_back(j);
            for (std::size_t s : succ[j]) --indegree[s];
            progressed = true;
            break;
        }
        if (!progressed) throw Error(ErrorCode::SpecError, "simulation paths contain a cycle");
    }
    return order;
}

inline std::string model_id(std::size_t r, std::size_t n) {
    const int width = static_cast<int>(std::to_string(n).size());
    char buf[32];
    std::snprintf(buf, sizeof buf, "m%0*zu", width, r + 1);
    return buf;
}

} // namespace detail

inline Simulation generate(const SimSpec& spec) {
    if (spec.n_models < 3) throw Error(ErrorCode::SpecError, "n_models must be at least 3");
    if (spec.constructs.empty()) throw Error(ErrorCode::SpecError, "simulation needs at least one construct");

    std::map<std::string, std::size_t> index;
    std::set<std::string> indicators;
    for (std::size_t j = 0; j < spec.constructs.size(); ++j) {
        const auto& c = spec.constructs[j];
        if (!index.emplace(c.id, j).second) throw Error(ErrorCode::SpecError, "duplicate construct '" + c.id + "'");
        if (!c.indicator_ids.empty() && c.indicator_ids.size() != c.loadings.size())
            throw Error(ErrorCode::SpecError, "construct '" + c.id + "' has mismatched indicator names and loadings");
        for (double l : c.loadings)
            if (!(l > 0.0 && l <= 1.0))
                throw Error(ErrorCode::SpecError, "planted loadings of '" + c.id + "' must lie in (0, 1]");
        for (const auto& id : indicator_ids_of(c))
            if (!indicators.insert(id).second) throw Error(ErrorCode::SpecError, "duplicate indicator '" + id + "'");
    }
    for (const auto& p : spec.paths) {
        if (!index.count(p.source) || !index.count(p.target))
            throw Error(ErrorCode::SpecError, "path " + p.source + " -> " + p.target + " references an unknown construct");
    }

    const auto order = detail::topological_order(spec, index);
    const std::size_t m = spec.constructs.size();
    const auto n = static_cast<Eigen::Index>(spec.n_models);

    // population covariance of the constructs, filled in topological order
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    Simulation sim;
    sim.truth.construct_scores.resize(n, static_cast<Eigen::Index>(m));
    NormalStream rng(spec.seed);

    std::vector<std::size_t> placed;
    for (std::size_t j : order) {
        const auto jj = static_cast<Eigen::Index>(j);
        std::vector<std::pair<std::size_t, double>> preds;
        for (const auto& p : spec.paths)
            if (index.at(p.target) == j) preds.emplace_back(index.at(p.source), p.beta);

        double r2 = 0.0;
        for (const auto& [a, ba] : preds)
            for (const auto& [b, bb] : preds) r2 += ba * bb * cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (!preds.empty()) {
            if (!(r2 < 1.0))
                throw Error(ErrorCode::SpecError, "planted R^2 of '" + spec.constructs[j].id + "' is not below one");
            sim.truth.planted_r_squared[spec.constructs[j].id] = r2;
        }

        for (std::size_t k : placed) {
            double c = 0.0;
            for (const auto& [a, ba] : preds) c += ba * cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k));
            cov(jj, static_cast<Eigen::Index>(k)) = c;
            cov(static_cast<Eigen::Index>(k), jj) = c;
        }
        cov(jj, jj) = 1.0;
        placed.push_back(j);

        const double resid_sd = std::sqrt(1.0 - r2);
        for (Eigen::Index r = 0; r < n; ++r) {
            double v = resid_sd * rng.next();
            for (const auto& [a, ba] : preds) v += ba * sim.truth.construct_scores(r, static_cast<Eigen::Index>(a));
            sim.truth.construct_scores(r, jj) = v;
        }
    }

    for (const auto& c : spec.constructs) sim.truth.construct_ids.push_back(c.id);

    ScoreMatrix& out = sim.scores;
    for (std::size_t r = 0; r < spec.n_models; ++r) out.model_ids.push_back(detail::model_id(r, spec.n_models));
    std::vector<Eigen::VectorXd> cols;
    for (std::size_t j = 0; j < m; ++j) {
        const auto& c = spec.constructs[j];
        const auto ids = indicator_ids_of(c);
        for (std::size_t i = 0; i < c.loadings.size(); ++i) {
            const double l = c.loadings[i];
            const double noise = std::sqrt(std::max(0.0, 1.0 - l * l));
            Eigen::VectorXd x(n);
            for (Eigen::Index r = 0; r < n; ++r)
                x(r) = l * sim.truth.construct_scores(r, static_cast<Eigen::Index>(j)) + noise * rng.next();
            out.indicator_ids.push_back(ids[i]);
            cols.push_back(std::move(x));
        }
    }
    out.values.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.values.col(static_cast<Eigen::Index>(k)) = cols[k];
    return sim;
}

/// Overwrites `indicator` with `duplicate_of` plus N(0, noise_sd^2) noise.
inline ScoreMatrix plant_collinearity(const ScoreMatrix& matrix, const std::string& indicator,
                                      const std::string& duplicate_of, double noise_sd, std::uint64_t seed) {
    const auto target = matrix.column(indicator);
    const auto source = matrix.column(duplicate_of);
    if (!target) throw Error(ErrorCode::UnknownIndicator, "unknown indicator '" + indicator + "'");
    if (!source) throw Error(ErrorCode::UnknownIndicator, "unknown indicator '" + duplicate_of + "'");
    if (!(noise_sd >= 0.0)) throw Error(ErrorCode::DomainError, "noise_sd must be nonnegative");
    ScoreMatrix out = matrix;
    NormalStream rng(seed);
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.values(r, *target) = matrix.values(r, *source) + noise_sd * rng.next();
    return out;
}

/// Noise sd that puts the population correlation between a column of
/// variance `source_variance` and its noisy copy at r.
inline double noise_sd_for_correlation(double r, double source_variance = 1.0) {
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::DomainError, "target correlation must lie in (0, 1]");
    return std::sqrt(source_variance * (1.0 / (r * r) - 1.0));
}

/// Taxonomy matching a simulation spec: first-order indicators become task
/// indicators, second-order indicators become external indicators.
inline Taxonomy taxonomy_for(const SimSpec& spec) {
    Taxonomy t;
    for (const auto& c : spec.constructs) {
        ConstructSpec cs;
        cs.id = c.id;
        cs.level = c.level;
        const auto ids = indicator_ids_of(c);
        if (c.level == Level::first) cs.indicator_ids = ids;
        else
            for (const auto& id : ids) t.external_indicators.emplace_back(id, c.id);
        t.constructs.push_back(std::move(cs));
    }
    for (const auto& p : spec.paths) t.paths.emplace_back(p.source, p.target);
    for (auto& c : t.constructs) c.single_indicator = t.block_size(c) == 1;
    return t;
}

inline SimSpec sim_spec_from_json(const nlohmann::json& doc) {
    try {
        SimSpec spec;
        spec.n_models = doc.at("n_models").get<std::size_t>();
        if (doc.contains("seed")) spec.seed = doc.at("seed").get<std::uint64_t>();
        for (const auto& jc : doc.at("constructs")) {
            SimConstruct c;
            c.id = jc.at("id").get<std::string>();
            c.loadings = jc.at("loadings").get<std::vector<double>>();
            if (jc.contains("indicators")) c.indicator_ids = jc.at("indicators").get<std::vector<std::string>>();
            if (jc.contains("level")) {
                const auto level = jc.at("level").get<std::string>();
                if (level == "second") c.level = Level::second;
                else if (level != "first") throw Error(ErrorCode::SpecError, "level must be 'first' or 'second'");
            }
            spec.constructs.push_back(std::move(c));
        }
        if (doc.contains("paths")) {
            for (const auto& jp : doc.at("paths")) {
                if (!jp.is_array() || jp.size() != 3)
                    throw Error(ErrorCode::SpecError, "paths must be [source, target, beta] triples");
                spec.paths.push_back({jp[0].get<std::string>(), jp[1].get<std::string>(), jp[2].get<double>()});
            }
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SpecError, e.what());
    }
}

inline nlohmann::json truth_to_json(const SimSpec& spec, const Simulation& sim) {
    nlohmann::json constructs = nlohmann::json::array();
    for (const auto& c : spec.constructs) {
        constructs.push_back({{"id", c.id},
                              {"level", c.level == Level::first ? "first" : "second"},
                              {"indicators", indicator_ids_of(c)},
                              {"loadings", c.loadings}});
    }
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& p : spec.paths) paths.push_back({{"source", p.source}, {"target", p.target}, {"beta", p.beta}});
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t j = 0; j < sim.truth.construct_ids.size(); ++j) {
        std::vector<double> col(static_cast<std::size_t>(sim.truth.construct_scores.rows()));
        for (Eigen::Index r = 0; r < sim.truth.construct_scores.rows(); ++r)
            col[static_cast<std::size_t>(r)] = sim.truth.construct_scores(r, static_cast<Eigen::Index>(j));
        scores[sim.truth.construct_ids[j]] = col;
    }
    return {{"seed", spec.seed},
            {"n_models", spec.n_models},
            {"constructs", constructs},
            {"paths", paths},
            {"planted_r_squared", sim.truth.planted_r_squared},
            {"model_ids", sim.scores.model_ids},
            {"construct_scores", scores}};
}

} // namespace semaudit
