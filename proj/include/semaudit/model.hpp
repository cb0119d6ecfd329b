#pragma once

// Domain types for score matrices and construct taxonomies, their parsers,
// and the validation step that turns raw inputs into an estimable dataset.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "semaudit/error.hpp"
#include "semaudit/numerics.hpp"

namespace semaudit {

/// Models x indicators. Missing cells hold NaN.
struct ScoreMatrix {
    std::vector<std::string> model_ids;
    std::vector<std::string> indicator_ids;
    Eigen::MatrixXd values;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    bool is_missing(Eigen::Index r, Eigen::Index c) const { return std::isnan(values(r, c)); }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(values.array().isNaN().count());
    }

    std::optional<Eigen::Index> column(std::string_view id) const {
        const auto it = std::find(indicator_ids.begin(), indicator_ids.end(), id);
        if (it == indicator_ids.end()) return std::nullopt;
        return static_cast<Eigen::Index>(it - indicator_ids.begin());
    }
};

/// Per-model scalar scores keyed by model id (human ratings, aggregates).
struct ModelScores {
    std::vector<std::string> model_ids;
    std::vector<double> values;
};

enum class OuterMode { correlation, regression };
enum class Level { first, second };

struct ConstructSpec {
    std::string id;
    std::vector<std::string> indicator_ids;
    OuterMode mode = OuterMode::correlation;
    Level level = Level::first;
    bool single_indicator = false; ///< exempts the construct from the two-indicator minimum

    bool operator==(const ConstructSpec&) const = default;
};

struct Taxonomy {
    std::vector<ConstructSpec> constructs;
    std::vector<std::pair<std::string, std::string>> paths;               ///< (source, target)
    std::vector<std::pair<std::string, std::string>> external_indicators; ///< (indicator, construct)

    bool operator==(const Taxonomy&) const = default;

    std::optional<std::size_t> index_of(std::string_view construct) const {
        for (std::size_t i = 0; i < constructs.size(); ++i)
            if (constructs[i].id == construct) return i;
        return std::nullopt;
    }

    const ConstructSpec& construct(std::string_view id) const {
        const auto idx = index_of(id);
        if (!idx) throw Error(ErrorCode::UnknownConstruct, "unknown construct '" + std::string(id) + "'");
        return constructs[*idx];
    }

    std::vector<std::string> externals_of(std::string_view construct) const {
        std::vector<std::string> out;
        for (const auto& [indicator, target] : external_indicators)
            if (target == construct) out.push_back(indicator);
        return out;
    }

    bool is_external(std::string_view indicator) const {
        return std::any_of(external_indicators.begin(), external_indicators.end(),
                           [&](const auto& e) { return e.first == indicator; });
    }

    std::vector<std::string> predecessors(std::string_view construct) const {
        std::vector<std::string> out;
        for (const auto& [src, dst] : paths)
            if (dst == construct) out.push_back(src);
        return out;
    }

    /// Constructs linked to `construct` by a path in either direction.
    std::vector<std::string> neighbors(std::string_view construct) const {
        std::vector<std::string> out;
        for (const auto& [src, dst] : paths) {
            if (src == construct) out.push_back(dst);
            if (dst == construct) out.push_back(src);
        }
        return out;
    }

    /// First-order constructs whose scores form a second-order construct's block.
    std::vector<std::string> components_of(std::string_view construct) const {
        std::vector<std::string> out;
        for (const auto& n : neighbors(construct)) {
            const auto& c = this->construct(n);
            if (c.level == Level::first && std::find(out.begin(), out.end(), n) == out.end())
                out.push_back(n);
        }
        return out;
    }

    /// Every task indicator and external indicator, in declaration order.
    std::vector<std::string> all_indicators() const {
        std::vector<std::string> out;
        for (const auto& c : constructs)
            out.insert(out.end(), c.indicator_ids.begin(), c.indicator_ids.end());
        for (const auto& e : external_indicators) out.push_back(e.first);
        return out;
    }

    std::size_t block_size(const ConstructSpec& c) const {
        const std::size_t ext = externals_of(c.id).size();
        if (c.level == Level::second) return components_of(c.id).size() + ext;
        return c.indicator_ids.size() + ext;
    }

    std::size_t task_indicator_count() const {
        std::size_t n = 0;
        for (const auto& c : constructs) n += c.indicator_ids.size();
        return n;
    }
};

/// Throws on any structural violation: duplicate ids, unresolved references,
/// cycles, double assignment, or undersized blocks.
inline void check_taxonomy(const Taxonomy& t) {
    std::set<std::string> ids;
    for (const auto& c : t.constructs) {
        if (c.id.empty()) throw Error(ErrorCode::MalformedTaxonomy, "construct with empty id");
        if (!ids.insert(c.id).second)
            throw Error(ErrorCode::MalformedTaxonomy, "duplicate construct id '" + c.id + "'");
        if (c.level == Level::second && !c.indicator_ids.empty())
            throw Error(ErrorCode::MalformedTaxonomy,
                        "second-order construct '" + c.id + "' cannot own task indicators");
    }

    std::set<std::string> assigned;
    auto assign = [&](const std::string& indicator) {
        if (!assigned.insert(indicator).second)
            throw Error(ErrorCode::DoubleAssignment, "indicator '" + indicator + "' assigned more than once");
    };
    for (const auto& c : t.constructs)
        for (const auto& i : c.indicator_ids) assign(i);
    for (const auto& [indicator, target] : t.external_indicators) {
        if (!ids.count(target))
            throw Error(ErrorCode::UnknownConstruct,
                        "external indicator '" + indicator + "' targets unknown construct '" + target + "'");
        assign(indicator);
    }

    std::map<std::string, std::vector<std::string>> succ;
    std::set<std::pair<std::string, std::string>> seen_paths;
    for (const auto& [src, dst] : t.paths) {
        if (!ids.count(src))
            throw Error(ErrorCode::UnknownConstruct, "path references unknown construct '" + src + "'");
        if (!ids.count(dst))
            throw Error(ErrorCode::UnknownConstruct, "path references unknown construct '" + dst + "'");
        if (!seen_paths.insert({src, dst}).second)
            throw Error(ErrorCode::MalformedTaxonomy, "duplicate path " + src + " -> " + dst);
        succ[src].push_back(dst);
    }

    // three-colour DFS
    std::map<std::string, int> colour;
    std::function<void(const std::string&)> visit = [&](const std::string& node) {
        colour[node] = 1;
        for (const auto& next : succ[node]) {
            if (colour[next] == 1)
                throw Error(ErrorCode::CyclicStructure, "cycle through '" + node + "' -> '" + next + "'");
            if (colour[next] == 0) visit(next);
        }
        colour[node] = 2;
    };
    for (const auto& c : t.constructs)
        if (colour[c.id] == 0) visit(c.id);

    for (const auto& c : t.constructs) {
        const std::size_t n = t.block_size(c);
        if (n == 0 || (n == 1 && !c.single_indicator))
            throw Error(ErrorCode::InsufficientIndicators,
                        "construct '" + c.id + "' has " + std::to_string(n) +
                            " indicator(s); at least two are required unless single_indicator is set");
    }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::string(trim(cur)));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::string(trim(cur)));
    return fields;
}

inline std::optional<double> parse_number(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Reads `model_id,<indicator>,...` CSV. Empty cells become NaN (missing).
inline ScoreMatrix parse_scores(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        first = false;
        if (detail::trim(line).empty()) continue;
        records.push_back(detail::split_csv_line(line));
    }
    if (records.empty()) throw Error(ErrorCode::EmptyInput, "score CSV has no header row");

    const auto& header = records.front();
    if (header.size() < 2) throw Error(ErrorCode::EmptyInput, "score CSV needs at least one indicator column");

    ScoreMatrix m;
    std::set<std::string> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].empty()) throw Error(ErrorCode::EmptyInput, "empty indicator name in header");
        if (!seen.insert(header[c]).second)
            throw Error(ErrorCode::DuplicateIndicator, "indicator '" + header[c] + "' appears twice in header");
        m.indicator_ids.push_back(header[c]);
    }

    const auto n_rows = static_cast<Eigen::Index>(records.size() - 1);
    const auto n_cols = static_cast<Eigen::Index>(m.indicator_ids.size());
    m.values.resize(n_rows, n_cols);
    std::set<std::string> models;
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        const auto& rec = records[static_cast<std::size_t>(r) + 1];
        if (rec.size() != header.size())
            throw Error(ErrorCode::RaggedRow, "row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                                                  " fields, header has " + std::to_string(header.size()));
        if (rec[0].empty()) throw Error(ErrorCode::EmptyInput, "row " + std::to_string(r + 1) + " has no model id");
        if (!models.insert(rec[0]).second)
            throw Error(ErrorCode::DuplicateModel, "model '" + rec[0] + "' appears twice");
        m.model_ids.push_back(rec[0]);
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            const std::string& cell = rec[static_cast<std::size_t>(c) + 1];
            if (cell.empty()) {
                m.values(r, c) = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const auto v = detail::parse_number(cell);
            if (!v)
                throw Error(ErrorCode::NonNumericCell, "cell (" + std::to_string(r + 1) + ", " +
                                                           std::to_string(c + 1) + ") = '" + cell + "' is not numeric");
            m.values(r, c) = *v;
        }
    }
    return m;
}

inline ScoreMatrix parse_scores(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_scores(in);
}

/// Two-column `model_id,score` file as ModelScores. Missing scores are dropped.
inline ModelScores parse_model_scores(std::istream& in) {
    const ScoreMatrix m = parse_scores(in);
    if (m.cols() != 1)
        throw Error(ErrorCode::MalformedInput, "per-model score file must have exactly two columns");
    ModelScores out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (m.is_missing(r, 0)) continue;
        out.model_ids.push_back(m.model_ids[static_cast<std::size_t>(r)]);
        out.values.push_back(m.values(r, 0));
    }
    return out;
}

namespace detail {

inline std::string json_string(const nlohmann::json& j, std::string_view what) {
    if (!j.is_string()) throw Error(ErrorCode::MalformedTaxonomy, std::string(what) + " must be a string");
    return j.get<std::string>();
}

inline std::pair<std::string, std::string> json_pair(const nlohmann::json& j, std::string_view what) {
    if (!j.is_array() || j.size() != 2)
        throw Error(ErrorCode::MalformedTaxonomy, std::string(what) + " entries must be two-element arrays");
    return {json_string(j[0], what), json_string(j[1], what)};
}

} // namespace detail

inline Taxonomy taxonomy_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::MalformedTaxonomy, "taxonomy must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (key != "constructs" && key != "paths" && key != "external_indicators")
            throw Error(ErrorCode::MalformedTaxonomy, "unknown taxonomy key '" + key + "'");
    if (!doc.contains("constructs") || !doc["constructs"].is_array())
        throw Error(ErrorCode::MalformedTaxonomy, "taxonomy needs a 'constructs' array");

    Taxonomy t;
    for (const auto& jc : doc["constructs"]) {
        if (!jc.is_object()) throw Error(ErrorCode::MalformedTaxonomy, "construct entries must be objects");
        ConstructSpec c;
        for (const auto& [key, value] : jc.items()) {
            if (key == "id") {
                c.id = detail::json_string(value, "construct id");
            } else if (key == "indicators") {
                if (!value.is_array()) throw Error(ErrorCode::MalformedTaxonomy, "'indicators' must be an array");
                for (const auto& i : value) c.indicator_ids.push_back(detail::json_string(i, "indicator id"));
            } else if (key == "mode") {
                const auto s = detail::json_string(value, "mode");
                if (s == "correlation") c.mode = OuterMode::correlation;
                else if (s == "regression") c.mode = OuterMode::regression;
                else throw Error(ErrorCode::MalformedTaxonomy, "mode must be 'correlation' or 'regression'");
            } else if (key == "level") {
                const auto s = detail::json_string(value, "level");
                if (s == "first") c.level = Level::first;
                else if (s == "second") c.level = Level::second;
                else throw Error(ErrorCode::MalformedTaxonomy, "level must be 'first' or 'second'");
            } else if (key == "single_indicator") {
                if (!value.is_boolean()) throw Error(ErrorCode::MalformedTaxonomy, "'single_indicator' must be boolean");
                c.single_indicator = value.get<bool>();
            } else {
                throw Error(ErrorCode::MalformedTaxonomy, "unknown construct key '" + key + "'");
            }
        }
        t.constructs.push_back(std::move(c));
    }
    if (doc.contains("paths")) {
        if (!doc["paths"].is_array()) throw Error(ErrorCode::MalformedTaxonomy, "'paths' must be an array");
        for (const auto& p : doc["paths"]) t.paths.push_back(detail::json_pair(p, "path"));
    }
    if (doc.contains("external_indicators")) {
        if (!doc["external_indicators"].is_array())
            throw Error(ErrorCode::MalformedTaxonomy, "'external_indicators' must be an array");
        for (const auto& e : doc["external_indicators"])
            t.external_indicators.push_back(detail::json_pair(e, "external indicator"));
    }
    check_taxonomy(t);
    return t;
}

inline Taxonomy parse_taxonomy(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedTaxonomy, e.what());
    }
    return taxonomy_from_json(doc);
}

inline Taxonomy parse_taxonomy(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_taxonomy(in);
}

inline nlohmann::json taxonomy_to_json(const Taxonomy& t) {
    nlohmann::json constructs = nlohmann::json::array();
    for (const auto& c : t.constructs) {
        nlohmann::json jc;
        jc["id"] = c.id;
        jc["indicators"] = c.indicator_ids;
        jc["mode"] = c.mode == OuterMode::correlation ? "correlation" : "regression";
        jc["level"] = c.level == Level::first ? "first" : "second";
        if (c.single_indicator) jc["single_indicator"] = true;
        constructs.push_back(std::move(jc));
    }
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& [s, d] : t.paths) paths.push_back({s, d});
    nlohmann::json ext = nlohmann::json::array();
    for (const auto& [i, c] : t.external_indicators) ext.push_back({i, c});
    return {{"constructs", constructs}, {"paths", paths}, {"external_indicators", ext}};
}

enum class MissingPolicy { listwise };

struct ColumnScale {
    double mean = 0.0;
    double sd = 1.0;
};

/// Complete, column-standardized scores restricted to the taxonomy's indicators.
struct ValidatedDataset {
    ScoreMatrix scores;
    Taxonomy taxonomy;
    std::vector<ColumnScale> standardization; ///< per scores column, raw units
    std::vector<std::string> dropped_models;  ///< removed by listwise deletion
    std::vector<std::string> unused_columns;  ///< present in input, absent from taxonomy

    Eigen::Index column(std::string_view indicator) const {
        const auto c = scores.column(indicator);
        if (!c) throw Error(ErrorCode::UnknownIndicator, "indicator '" + std::string(indicator) + "' not in dataset");
        return *c;
    }

    Eigen::Index n() const { return scores.rows(); }

    Eigen::MatrixXd columns(const std::vector<std::string>& ids) const {
        Eigen::MatrixXd out(n(), static_cast<Eigen::Index>(ids.size()));
        for (std::size_t k = 0; k < ids.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = scores.values.col(column(ids[k]));
        return out;
    }
};

/// Restricts the matrix to taxonomy indicators, applies listwise deletion
/// and z-scores every column (sample standard deviation).
inline ValidatedDataset validate(const ScoreMatrix& scores, const Taxonomy& taxonomy,
                                 MissingPolicy policy = MissingPolicy::listwise) {
    (void)policy; // listwise is the only policy
    check_taxonomy(taxonomy);

    std::set<std::string> wanted;
    for (const auto& id : taxonomy.all_indicators()) {
        if (!scores.column(id))
            throw Error(ErrorCode::MissingIndicator, "taxonomy indicator '" + id + "' is absent from the score matrix");
        wanted.insert(id);
    }

    ValidatedDataset ds;
    ds.taxonomy = taxonomy;
    std::vector<Eigen::Index> keep_cols;
    for (std::size_t c = 0; c < scores.indicator_ids.size(); ++c) {
        if (wanted.count(scores.indicator_ids[c])) {
            keep_cols.push_back(static_cast<Eigen::Index>(c));
            ds.scores.indicator_ids.push_back(scores.indicator_ids[c]);
        } else {
            ds.unused_columns.push_back(scores.indicator_ids[c]);
        }
    }

    std::vector<Eigen::Index> keep_rows;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const bool complete = std::none_of(keep_cols.begin(), keep_cols.end(),
                                           [&](Eigen::Index c) { return scores.is_missing(r, c); });
        if (complete) {
            keep_rows.push_back(r);
            ds.scores.model_ids.push_back(scores.model_ids[static_cast<std::size_t>(r)]);
        } else {
            ds.dropped_models.push_back(scores.model_ids[static_cast<std::size_t>(r)]);
        }
    }
    if (keep_rows.size() < 3)
        throw Error(ErrorCode::TooFewRows, std::to_string(keep_rows.size()) +
                                               " complete rows remain; at least three are needed");

    const auto n = static_cast<Eigen::Index>(keep_rows.size());
    ds.scores.values.resize(n, static_cast<Eigen::Index>(keep_cols.size()));
    for (std::size_t k = 0; k < keep_cols.size(); ++k) {
        Eigen::VectorXd col(n);
        for (Eigen::Index r = 0; r < n; ++r) col(r) = scores.values(keep_rows[static_cast<std::size_t>(r)], keep_cols[k]);
        const double m = col.mean();
        const double sd = std::sqrt((col.array() - m).square().sum() / static_cast<double>(n - 1));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m))))
            throw Error(ErrorCode::ZeroVariance, "column '" + ds.scores.indicator_ids[k] + "' has zero variance");
        ds.scores.values.col(static_cast<Eigen::Index>(k)) = (col.array() - m) / sd;
        ds.standardization.push_back({m, sd});
    }
    return ds;
}

} // namespace semaudit
