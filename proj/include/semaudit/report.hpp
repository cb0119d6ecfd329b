#pragma once

// Canonical JSON for reports and traces, plus CSV writers for score
// matrices and plot data.
//
// Canonical form: object keys sorted, two-space indentation, numbers with
// six significant digits in locale-independent notation, negative zero
// printed as 0. Non-finite values never reach the text: they are written as
// null next to a "<key>_reason" string.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "semaudit/diagnostics.hpp"
#include "semaudit/estimator.hpp"
#include "semaudit/metric.hpp"
#include "semaudit/model.hpp"
#include "semaudit/pruner.hpp"
#include "semaudit/rank_analysis.hpp"

namespace semaudit {

inline constexpr std::string_view kSchemaVersion = "1.0";

/// Six significant digits, shortest of fixed/scientific. Non-finite input
/// is the caller's bug and prints as null.
inline std::string format_number(double v) {
    if (!std::isfinite(v)) return "null";
    if (v == 0.0) return "0";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    std::string s(buf, res.ptr);
    if (s == "-0") return "0";
    return s;
}

/// Round-trip precision, for data files rather than reports.
inline std::string format_exact(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void write_canonical(std::ostream& os, const nlohmann::json& j, int depth) {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(2 * depth), ' ');
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) { // std::map storage: sorted
            if (!first) os << ",\n";
            first = false;
            os << pad << nlohmann::json(key).dump() << ": ";
            write_canonical(os, value, depth + 1);
        }
        os << "\n" << close << "}";
        return;
    }
    case nlohmann::json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ",\n";
            os << pad;
            write_canonical(os, j[i], depth + 1);
        }
        os << "\n" << close << "]";
        return;
    }
    case nlohmann::json::value_t::number_float:
        os << format_number(j.get<double>());
        return;
    default:
        os << j.dump();
    }
}

} // namespace detail

/// Canonical text of a JSON document, newline-terminated.
inline std::string canonical_json(const nlohmann::json& j) {
    std::ostringstream os;
    detail::write_canonical(os, j, 0);
    os << "\n";
    return os.str();
}

/// Sets obj[key] to the value, or to null plus obj[key + "_reason"].
inline void put_number(nlohmann::json& obj, const std::string& key, double v, std::string_view reason = "not finite") {
    if (std::isfinite(v)) {
        obj[key] = v;
    } else {
        obj[key] = nullptr;
        obj[key + "_reason"] = std::isinf(v) ? (v > 0 ? "infinite" : "negative infinite") : std::string(reason);
    }
}

inline void put_metric(nlohmann::json& obj, const std::string& key, const MetricValue& m) {
    if (m.defined() && std::isfinite(*m)) {
        obj[key] = *m;
    } else {
        obj[key] = nullptr;
        obj[key + "_reason"] = m.defined() ? "not finite" : m.reason;
    }
}

inline nlohmann::json estimator_config_json(const EstimatorConfig& c) {
    return {{"epsilon", c.epsilon}, {"max_iter", c.max_iter}};
}

inline nlohmann::json fitted_json(const FittedModel& f) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : f.blocks) {
        nlohmann::json ind = nlohmann::json::array();
        for (std::size_t i = 0; i < b.indicators.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            ind.push_back({{"id", b.indicators[i]},
                           {"kind", std::string(to_string(b.kinds[i]))},
                           {"weight", b.weights(k)},
                           {"loading", b.loadings(k)}});
        }
        blocks.push_back({{"construct", b.construct}, {"stage", b.stage}, {"indicators", ind}});
    }
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& p : f.paths) paths.push_back({{"source", p.source}, {"target", p.target}, {"value", p.value}});
    nlohmann::json r2 = nlohmann::json::object();
    for (const auto& [c, v] : f.r_squared) put_number(r2, c, v);
    return {{"outer_model", blocks},
            {"paths", paths},
            {"r_squared", r2},
            {"iterations", f.iterations},
            {"stage_iterations", f.stage_iterations},
            {"converged", f.converged}};
}

inline nlohmann::json htmt_json(const HtmtMatrix& m) {
    nlohmann::json values = nlohmann::json::array();
    nlohmann::json undefined = nlohmann::json::array();
    for (std::size_t i = 0; i < m.constructs.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.constructs.size(); ++j) {
            if (m.defined(i, j)) {
                row.push_back(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            } else {
                row.push_back(nullptr);
                if (j < i)
                    undefined.push_back({{"a", m.constructs[j]}, {"b", m.constructs[i]}, {"reason", m.reasons[i][j]}});
            }
        }
        values.push_back(std::move(row));
    }
    return {{"constructs", m.constructs}, {"values", values}, {"undefined", undefined}};
}

inline nlohmann::json construct_diagnostics_json(const ConstructDiagnostics& c) {
    nlohmann::json j;
    j["construct"] = c.construct;
    put_metric(j, "cronbach_alpha", c.cronbach_alpha);
    put_metric(j, "composite_reliability", c.composite_reliability);
    put_metric(j, "ave", c.ave);
    nlohmann::json ind = nlohmann::json::array();
    for (const auto& i : c.indicators) {
        nlohmann::json ji{{"id", i.id}, {"weight", i.weight}, {"loading", i.loading}};
        put_number(ji, "vif", i.vif, "single-indicator construct");
        ind.push_back(std::move(ji));
    }
    j["indicators"] = ind;
    return j;
}

/// The metric part of a diagnostics report, shared by analyze and prune output.
inline nlohmann::json diagnostics_json(const DiagnosticsReport& r) {
    nlohmann::json constructs = nlohmann::json::array();
    for (const auto& c : r.per_construct) constructs.push_back(construct_diagnostics_json(c));
    nlohmann::json scores;
    put_metric(scores, "d_div", r.d_div);
    scores["tc"] = r.tc;
    put_metric(scores, "d_valid", r.d_valid);
    put_metric(scores, "overall", r.overall);
    scores["collinearity"] = r.collinearity;
    nlohmann::json human{{"matched", r.human_matched}};
    put_metric(human, "pearson", r.human_alignment_pearson);
    return {{"constructs", constructs},
            {"htmt", htmt_json(r.htmt)},
            {"srmr", r.srmr.value},
            {"srmr_converged", r.srmr.converged},
            {"benchmark", scores},
            {"human_alignment", human},
            {"converged", r.converged},
            {"notes", r.notes}};
}

inline nlohmann::json composite_json(const CompositeScores& c) {
    nlohmann::json models = nlohmann::json::object();
    for (std::size_t i = 0; i < c.model_ids.size(); ++i) models[c.model_ids[i]] = c.values(static_cast<Eigen::Index>(i));
    return {{"source", c.source}, {"scores", models}};
}

inline nlohmann::json dataset_json(const ValidatedDataset& d) {
    return {{"n_models", d.n()},
            {"n_indicators", d.scores.indicator_ids.size()},
            {"dropped_models", d.dropped_models},
            {"unused_columns", d.unused_columns}};
}

/// Complete output of `analyze`.
inline nlohmann::json analysis_report_json(const ValidatedDataset& data, const FittedModel& fitted,
                                           const DiagnosticsReport& report, const CompositeScores& composite,
                                           const EstimatorConfig& config) {
    return {{"schema_version", std::string(kSchemaVersion)},
            {"kind", "diagnostics_report"},
            {"config", estimator_config_json(config)},
            {"dataset", dataset_json(data)},
            {"model", fitted_json(fitted)},
            {"diagnostics", diagnostics_json(report)},
            {"composite", composite_json(composite)}};
}

inline nlohmann::json violation_json(const Violation& v) {
    return {{"indicator", v.indicator},
            {"construct", v.construct},
            {"reason", std::string(to_string(v.reason))},
            {"value", v.value},
            {"severity", v.severity}};
}

inline nlohmann::json prune_trace_json(const PruneTrace& t, const ValidatedDataset& data) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : t.steps)
        steps.push_back({{"iteration", s.iteration},
                         {"indicator", s.indicator},
                         {"construct", s.construct},
                         {"reason", std::string(to_string(s.reason))},
                         {"value", s.value},
                         {"severity", s.severity}});
    nlohmann::json notes = nlohmann::json::array();
    for (const auto& n : t.fallback_notes)
        notes.push_back({{"construct", n.construct},
                         {"violators", n.violators},
                         {"closest", n.closest},
                         {"closest_severity", n.closest_severity}});
    nlohmann::json remaining = nlohmann::json::array();
    for (const auto& v : t.remaining_violations) remaining.push_back(violation_json(v));

    nlohmann::json config{{"vif_threshold", t.config.vif_threshold},
                          {"loading_threshold", t.config.loading_threshold},
                          {"min_indicators_per_construct", t.config.min_indicators_per_construct},
                          {"estimator", estimator_config_json(t.config.estimator)}};
    nlohmann::json out{{"schema_version", std::string(kSchemaVersion)},
                       {"kind", "prune_trace"},
                       {"config", config},
                       {"dataset", dataset_json(data)},
                       {"steps", steps},
                       {"termination", std::string(to_string(t.termination))},
                       {"fallback_notes", notes},
                       {"remaining_violations", remaining},
                       {"final_taxonomy", taxonomy_to_json(t.final_taxonomy)}};
    if (t.termination == Termination::error)
        out["error"] = {{"iteration", t.error_iteration}, {"message", t.error_message}};
    out["final_model"] = t.final_fit ? fitted_json(*t.final_fit) : nlohmann::json(nullptr);
    out["final_diagnostics"] = t.final_report ? diagnostics_json(*t.final_report) : nlohmann::json(nullptr);
    return out;
}

inline nlohmann::json rank_cells_json(const RankCells& c) {
    nlohmann::json j{{"n", c.n}};
    put_metric(j, "origin_vs_refined", c.origin_vs_refined);
    put_metric(j, "origin_vs_human", c.origin_vs_human);
    put_metric(j, "refined_vs_human", c.refined_vs_human);
    return j;
}

inline nlohmann::json rank_report_json(const RankReport& r) {
    nlohmann::json subsets = nlohmann::json::array();
    for (const auto& [name, cells] : r.subsets) {
        auto j = rank_cells_json(cells);
        j["name"] = name;
        subsets.push_back(std::move(j));
    }
    nlohmann::json out{{"schema_version", std::string(kSchemaVersion)},
                       {"kind", "rank_report"},
                       {"n_joined", r.n_joined},
                       {"dropped_models", r.dropped_models},
                       {"spearman", rank_cells_json(r.overall)},
                       {"subsets", subsets}};
    put_metric(out, "pearson_refined_vs_human", r.pearson_refined_vs_human);
    return out;
}

/// `model_id,<indicator>...` with round-trip precision; NaN becomes an empty cell.
inline void write_scores_csv(std::ostream& os, const ScoreMatrix& m) {
    os << "model_id";
    for (const auto& id : m.indicator_ids) os << ',' << id;
    os << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << m.model_ids[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << ',' << format_exact(m.values(r, c));
        os << '\n';
    }
}

inline void write_model_scores_csv(std::ostream& os, const ModelScores& s, std::string_view column = "score") {
    os << "model_id," << column << '\n';
    for (std::size_t i = 0; i < s.model_ids.size(); ++i) os << s.model_ids[i] << ',' << format_exact(s.values[i]) << '\n';
}

/// Plot-ready CSV tables keyed by file name.
inline std::vector<std::pair<std::string, std::string>> plot_tables(const DiagnosticsReport& r) {
    auto cell = [](double v) { return std::isfinite(v) ? format_number(v) : std::string(); };
    auto metric = [&](const MetricValue& m) { return m.defined() ? cell(*m) : std::string(); };

    std::ostringstream htmt;
    htmt << "construct";
    for (const auto& c : r.htmt.constructs) htmt << ',' << c;
    htmt << '\n';
    for (std::size_t i = 0; i < r.htmt.constructs.size(); ++i) {
        htmt << r.htmt.constructs[i];
        for (std::size_t j = 0; j < r.htmt.constructs.size(); ++j)
            htmt << ',' << cell(r.htmt.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        htmt << '\n';
    }

    std::ostringstream ind;
    ind << "construct,indicator,weight,loading,vif\n";
    for (const auto& c : r.per_construct)
        for (const auto& i : c.indicators)
            ind << c.construct << ',' << i.id << ',' << cell(i.weight) << ',' << cell(i.loading) << ','
                << (std::isinf(i.vif) ? std::string("inf") : cell(i.vif)) << '\n';

    std::ostringstream rel;
    rel << "construct,cronbach_alpha,composite_reliability,ave\n";
    for (const auto& c : r.per_construct)
        rel << c.construct << ',' << metric(c.cronbach_alpha) << ',' << metric(c.composite_reliability) << ','
            << metric(c.ave) << '\n';

    std::ostringstream bench;
    bench << "metric,value\n"
          << "d_div," << metric(r.d_div) << '\n'
          << "tc," << cell(r.tc) << '\n'
          << "d_valid," << metric(r.d_valid) << '\n'
          << "overall," << metric(r.overall) << '\n'
          << "srmr," << cell(r.srmr.value) << '\n';

    return {{"htmt.csv", htmt.str()},
            {"indicators.csv", ind.str()},
            {"reliability.csv", rel.str()},
            {"benchmark.csv", bench.str()}};
}

} // namespace semaudit
