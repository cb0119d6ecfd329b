#pragma once

// Reliability, validity and redundancy metrics over a fitted model, and
// their aggregation into benchmark-level scores.
//
// Indicator-level metrics (VIF, HTMT, alpha, CR, AVE) consider task
// indicators of first-order constructs only. External indicators and
// second-order blocks take part in estimation but are not benchmark tasks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semaudit/error.hpp"
#include "semaudit/estimator.hpp"
#include "semaudit/metric.hpp"
#include "semaudit/model.hpp"
#include "semaudit/numerics.hpp"
#include "semaudit/rank_analysis.hpp"

namespace semaudit {

/// Sentinel for perfectly collinear indicators.
inline constexpr double kInfiniteVif = std::numeric_limits<double>::infinity();

/// Variance inflation factors of a construct's task indicators, each
/// regressed on its block peers. R² within 1e-12 of one maps to kInfiniteVif.
inline std::vector<double> vif(const ValidatedDataset& data, std::string_view construct) {
    const auto& ids = data.taxonomy.construct(construct).indicator_ids;
    if (ids.size() < 2)
        throw Error(ErrorCode::InsufficientIndicators, "VIF needs at least two indicators in '" + std::string(construct) + "'");
    const Eigen::MatrixXd block = data.columns(ids);
    const auto p = block.cols();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::MatrixXd peers(block.rows(), p - 1);
        for (Eigen::Index k = 0, c = 0; k < p; ++k)
            if (k != i) peers.col(c++) = block.col(k);
        const double r2 = projection_r_squared(peers, block.col(i));
        out.push_back(r2 >= 1.0 - 1e-12 ? kInfiniteVif : 1.0 / (1.0 - r2));
    }
    return out;
}

namespace detail {

inline double mean_within_correlation(const Eigen::MatrixXd& r) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) {
            sum += r(i, j);
            ++count;
        }
    return sum / count;
}

} // namespace detail

/// Heterotrait-monotrait ratio: mean between-block correlation over the
/// geometric mean of the two mean within-block correlations. A negative
/// heterotrait mean enters by absolute value; a nonpositive monotrait mean
/// makes the ratio undefined.
inline double htmt(const ValidatedDataset& data, std::string_view a, std::string_view b) {
    const auto& ia = data.taxonomy.construct(a).indicator_ids;
    const auto& ib = data.taxonomy.construct(b).indicator_ids;
    if (ia.size() < 2 || ib.size() < 2)
        throw Error(ErrorCode::UndefinedHTMT, "HTMT needs two or more indicators in both '" + std::string(a) + "' and '" +
                                                  std::string(b) + "'");
    const Eigen::MatrixXd xa = data.columns(ia);
    const Eigen::MatrixXd xb = data.columns(ib);
    const double mono_a = detail::mean_within_correlation(correlation_matrix(xa));
    const double mono_b = detail::mean_within_correlation(correlation_matrix(xb));
    if (!(mono_a > 0.0) || !(mono_b > 0.0))
        throw Error(ErrorCode::UndefinedHTMT, "nonpositive mean within-construct correlation for '" + std::string(a) +
                                                  "' / '" + std::string(b) + "'");
    double hetero = 0.0;
    for (Eigen::Index i = 0; i < xa.cols(); ++i)
        for (Eigen::Index j = 0; j < xb.cols(); ++j) hetero += pearson(column_span(xa, i), column_span(xb, j));
    hetero /= static_cast<double>(xa.cols() * xb.cols());
    return std::abs(hetero) / std::sqrt(mono_a * mono_b);
}

struct HtmtMatrix {
    std::vector<std::string> constructs;
    Eigen::MatrixXd values;                        ///< NaN where undefined
    std::vector<std::vector<std::string>> reasons; ///< non-empty where undefined

    bool defined(std::size_t i, std::size_t j) const {
        return !std::isnan(values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
};

/// First-order constructs that own task indicators, in taxonomy order.
inline std::vector<std::string> task_constructs(const Taxonomy& t) {
    std::vector<std::string> out;
    for (const auto& c : t.constructs)
        if (c.level == Level::first && !c.indicator_ids.empty()) out.push_back(c.id);
    return out;
}

inline HtmtMatrix htmt_matrix(const ValidatedDataset& data) {
    HtmtMatrix m;
    m.constructs = task_constructs(data.taxonomy);
    const std::size_t k = m.constructs.size();
    m.values = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    m.reasons.assign(k, std::vector<std::string>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = std::numeric_limits<double>::quiet_NaN();
            std::string why;
            try {
                v = htmt(data, m.constructs[i], m.constructs[j]);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::UndefinedHTMT && e.code() != ErrorCode::DegenerateCorrelation) throw;
                why = e.what();
            }
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            m.values(ii, jj) = v;
            m.values(jj, ii) = v;
            m.reasons[i][j] = why;
            m.reasons[j][i] = why;
        }
    return m;
}

/// alpha = k/(k-1) (1 - sum var_i / var_total) over standardized indicators.
inline double cronbach_alpha(const ValidatedDataset& data, std::string_view construct) {
    const auto& ids = data.taxonomy.construct(construct).indicator_ids;
    if (ids.size() < 2)
        throw Error(ErrorCode::InsufficientIndicators, "alpha needs at least two indicators in '" + std::string(construct) + "'");
    const Eigen::MatrixXd x = data.columns(ids);
    double item_var = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) item_var += variance(column_span(x, i));
    const Eigen::VectorXd total = x.rowwise().sum();
    const double total_var = variance(as_span(total));
    if (!(total_var > 1e-300))
        throw Error(ErrorCode::DegenerateConstruct, "total score of '" + std::string(construct) + "' has zero variance");
    const double k = static_cast<double>(x.cols());
    return k / (k - 1.0) * (1.0 - item_var / total_var);
}

/// (sum l)^2 / ((sum l)^2 + sum (1 - l^2)).
inline double composite_reliability(std::span<const double> loadings) {
    double sum = 0.0, err = 0.0;
    for (double l : loadings) {
        sum += l;
        err += 1.0 - l * l;
    }
    const double num = sum * sum;
    if (num + err <= 0.0) return 0.0;
    return num / (num + err);
}

/// Mean squared loading.
inline double ave(std::span<const double> loadings) {
    if (loadings.empty()) throw Error(ErrorCode::DomainError, "AVE of an empty loading vector");
    double s = 0.0;
    for (double l : loadings) s += l * l;
    return s / static_cast<double>(loadings.size());
}

struct SrmrResult {
    double value = 0.0;
    bool converged = true; ///< false flags a value computed from an unconverged fit
};

/// Root mean square of empirical minus model-implied indicator correlations
/// over the lower triangle (diagonal included) of the task indicators.
inline SrmrResult srmr(const FittedModel& fitted, const ValidatedDataset& data) {
    std::vector<std::string> ids;
    std::vector<double> loading;
    std::vector<std::size_t> owner;
    for (const auto& cid : task_constructs(data.taxonomy)) {
        const std::size_t j = fitted.index_of(cid);
        for (const auto& id : data.taxonomy.construct(cid).indicator_ids) {
            ids.push_back(id);
            loading.push_back(*fitted.loading(id));
            owner.push_back(j);
        }
    }
    SrmrResult out;
    out.converged = fitted.converged;
    const auto p = static_cast<Eigen::Index>(ids.size());
    if (p < 2) return out;
    const Eigen::MatrixXd emp = correlation_matrix(data.columns(ids));
    double ss = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index k = 0; k < i; ++k) {
            const auto a = static_cast<std::size_t>(i);
            const auto b = static_cast<std::size_t>(k);
            double implied = loading[a] * loading[b];
            if (owner[a] != owner[b])
                implied *= pearson(column_span(fitted.scores, static_cast<Eigen::Index>(owner[a])),
                                   column_span(fitted.scores, static_cast<Eigen::Index>(owner[b])));
            const double d = emp(i, k) - implied;
            ss += d * d;
        }
    const double elements = static_cast<double>(p) * static_cast<double>(p + 1) / 2.0;
    out.value = std::sqrt(ss / elements);
    return out;
}

inline double dimensional_diversity(double max_htmt) {
    if (!(max_htmt > 0.0)) throw Error(ErrorCode::UndefinedMetric, "maximum HTMT must be positive");
    return 1.0 / (2.0 * max_htmt);
}

/// 1 / (2 max_{i != j} HTMT_ij) over the defined off-diagonal cells.
inline double dimensional_diversity(const HtmtMatrix& m) {
    std::optional<double> max;
    for (std::size_t i = 0; i < m.constructs.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (m.defined(i, j)) {
                const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                max = max ? std::max(*max, v) : v;
            }
    if (!max) throw Error(ErrorCode::UndefinedMetric, "no defined HTMT pair");
    return dimensional_diversity(*max);
}

/// Mean absolute loading over every task indicator.
inline double task_contribution(std::span<const double> loadings) {
    if (loadings.empty()) throw Error(ErrorCode::DomainError, "task contribution needs at least one loading");
    double s = 0.0;
    for (double l : loadings) s += std::abs(l);
    return s / static_cast<double>(loadings.size());
}

struct IndicatorValidity {
    double value = 0.0;
    bool collinear = false; ///< an infinite VIF forced the value to zero
};

/// Inverse geometric mean of the VIFs.
inline IndicatorValidity indicator_validity(std::span<const double> vifs) {
    if (vifs.empty()) throw Error(ErrorCode::DomainError, "indicator validity needs at least one VIF");
    if (std::any_of(vifs.begin(), vifs.end(), [](double v) { return std::isinf(v); })) return {0.0, true};
    return {1.0 / geometric_mean(vifs), false};
}

struct IndicatorDiagnostics {
    std::string id;
    double weight = 0.0;
    double loading = 0.0;
    double vif = std::numeric_limits<double>::quiet_NaN(); ///< NaN for single-indicator constructs
};

struct ConstructDiagnostics {
    std::string construct;
    MetricValue cronbach_alpha;
    MetricValue composite_reliability;
    MetricValue ave;
    std::vector<IndicatorDiagnostics> indicators;

    std::vector<double> indicator_loadings() const {
        std::vector<double> out;
        for (const auto& i : indicators) out.push_back(i.loading);
        return out;
    }
    std::vector<double> indicator_vifs() const {
        std::vector<double> out;
        for (const auto& i : indicators) out.push_back(i.vif);
        return out;
    }
};

struct DiagnosticsReport {
    std::vector<ConstructDiagnostics> per_construct;
    HtmtMatrix htmt;
    SrmrResult srmr;
    MetricValue d_div;
    double tc = 0.0;
    MetricValue d_valid;
    bool collinearity = false;
    MetricValue overall;
    MetricValue human_alignment_pearson = MetricValue::undefined("no human scores supplied");
    std::size_t human_matched = 0;
    bool converged = true;
    std::vector<std::string> notes;

    const ConstructDiagnostics& construct(std::string_view id) const {
        for (const auto& c : per_construct)
            if (c.construct == id) return c;
        throw Error(ErrorCode::UnknownConstruct, "no diagnostics for '" + std::string(id) + "'");
    }
};

inline ConstructDiagnostics construct_diagnostics(const FittedModel& fitted, const ValidatedDataset& data,
                                                  std::string_view construct) {
    ConstructDiagnostics cd;
    cd.construct = std::string(construct);
    const auto& ids = data.taxonomy.construct(construct).indicator_ids;
    const auto& block = fitted.block(construct);
    for (const auto& id : ids) {
        IndicatorDiagnostics d;
        d.id = id;
        for (std::size_t i = 0; i < block.indicators.size(); ++i)
            if (block.indicators[i] == id) {
                d.weight = block.weights(static_cast<Eigen::Index>(i));
                d.loading = block.loadings(static_cast<Eigen::Index>(i));
            }
        cd.indicators.push_back(std::move(d));
    }
    if (ids.size() >= 2) {
        const auto v = vif(data, construct);
        for (std::size_t i = 0; i < v.size(); ++i) cd.indicators[i].vif = v[i];
        try {
            cd.cronbach_alpha = MetricValue::of(cronbach_alpha(data, construct));
        } catch (const Error& e) {
            cd.cronbach_alpha = MetricValue::undefined(e.what());
        }
    } else {
        cd.cronbach_alpha = MetricValue::undefined("single-indicator construct");
    }
    const auto loadings = cd.indicator_loadings();
    cd.composite_reliability = MetricValue::of(composite_reliability(loadings));
    cd.ave = MetricValue::of(ave(loadings));
    return cd;
}

/// Assembles every metric. `human` is joined to the composite score on model id.
inline DiagnosticsReport benchmark_report(const FittedModel& fitted, const ValidatedDataset& data,
                                          const std::optional<ModelScores>& human = std::nullopt) {
    DiagnosticsReport rep;
    rep.converged = fitted.converged;

    std::vector<double> all_loadings;
    std::vector<double> all_vifs;
    for (const auto& cid : task_constructs(data.taxonomy)) {
        auto cd = construct_diagnostics(fitted, data, cid);
        for (const auto& i : cd.indicators) {
            all_loadings.push_back(i.loading);
            if (!std::isnan(i.vif)) all_vifs.push_back(i.vif);
        }
        rep.per_construct.push_back(std::move(cd));
    }

    rep.htmt = htmt_matrix(data);
    rep.srmr = srmr(fitted, data);
    try {
        rep.d_div = MetricValue::of(dimensional_diversity(rep.htmt));
    } catch (const Error& e) {
        rep.d_div = MetricValue::undefined(rep.htmt.constructs.size() < 2 ? "fewer than two constructs" : e.what());
    }
    if (!all_loadings.empty()) rep.tc = task_contribution(all_loadings);
    if (all_vifs.empty()) {
        rep.d_valid = MetricValue::undefined("no construct has two or more indicators");
    } else {
        const auto iv = indicator_validity(all_vifs);
        rep.d_valid = MetricValue::of(iv.value);
        rep.collinearity = iv.collinear;
    }
    if (rep.d_div.defined() && rep.d_valid.defined())
        rep.overall = MetricValue::of(*rep.d_div + rep.tc + *rep.d_valid);
    else
        rep.overall = MetricValue::undefined("a component score is undefined");

    if (human) {
        const auto composite = composite_score(fitted, data);
        std::map<std::string, double> h;
        for (std::size_t i = 0; i < human->model_ids.size(); ++i) h[human->model_ids[i]] = human->values[i];
        std::vector<double> x, y;
        for (std::size_t r = 0; r < composite.model_ids.size(); ++r) {
            const auto it = h.find(composite.model_ids[r]);
            if (it == h.end()) continue;
            x.push_back(composite.values(static_cast<Eigen::Index>(r)));
            y.push_back(it->second);
        }
        rep.human_matched = x.size();
        if (x.size() < 3) {
            rep.human_alignment_pearson = MetricValue::undefined("fewer than three models matched the human scores");
        } else {
            try {
                rep.human_alignment_pearson = MetricValue::of(pearson(x, y));
            } catch (const Error& e) {
                rep.human_alignment_pearson = MetricValue::undefined(e.what());
            }
        }
    }

    rep.notes.push_back("overall = d_div + tc + d_valid");
    if (!fitted.converged) rep.notes.push_back("estimator did not converge; metrics come from the last iterate");
    if (rep.collinearity) rep.notes.push_back("perfect collinearity: at least one VIF is infinite, d_valid forced to 0");
    return rep;
}

} // namespace semaudit
