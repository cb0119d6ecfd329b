#pragma once

// Iterative task refinement: refit, look for threshold violations, drop the
// worst removable indicator, repeat.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "semaudit/diagnostics.hpp"
#include "semaudit/error.hpp"
#include "semaudit/estimator.hpp"
#include "semaudit/model.hpp"

namespace semaudit {

struct PruneConfig {
    double vif_threshold = 5.0;
    double loading_threshold = 0.75;
    std::size_t min_indicators_per_construct = 2;
    EstimatorConfig estimator;

    void check() const {
        if (!(vif_threshold > 1.0)) throw Error(ErrorCode::DomainError, "VIF threshold must exceed 1");
        if (!(loading_threshold > 0.0 && loading_threshold < 1.0))
            throw Error(ErrorCode::DomainError, "loading threshold must lie in (0, 1)");
        estimator.check();
    }
};

enum class ViolationReason { vif, loading };

inline std::string_view to_string(ViolationReason r) { return r == ViolationReason::vif ? "vif" : "loading"; }

struct Violation {
    std::string indicator;
    std::string construct;
    ViolationReason reason = ViolationReason::vif;
    double value = 0.0;    ///< the offending VIF or loading
    double severity = 0.0; ///< VIF / threshold, or (threshold - loading) / threshold
};

/// Every VIF above the threshold and every loading below it. An indicator
/// violating both appears twice.
inline std::vector<Violation> find_violations(const DiagnosticsReport& diag, const PruneConfig& config) {
    std::vector<Violation> out;
    for (const auto& c : diag.per_construct)
        for (const auto& i : c.indicators) {
            if (i.vif > config.vif_threshold) // NaN (single indicator) compares false
                out.push_back({i.id, c.construct, ViolationReason::vif, i.vif, i.vif / config.vif_threshold});
            if (i.loading < config.loading_threshold)
                out.push_back({i.id, c.construct, ViolationReason::loading, i.loading,
                               (config.loading_threshold - i.loading) / config.loading_threshold});
        }
    return out;
}

/// A construct whose violators are all protected by the minimum-size rule.
/// `closest` is the violator nearest to meeting the thresholds; it is kept.
struct FallbackNote {
    std::string construct;
    std::vector<std::string> violators;
    std::string closest;
    double closest_severity = 0.0;
};

struct Selection {
    std::optional<Violation> removal; ///< the worst violation of the chosen indicator
    std::vector<FallbackNote> notes;
};

/// Picks the removable indicator with the largest combined severity (the max
/// over its violations), breaking ties by smaller id.
inline Selection select_removal(const std::vector<Violation>& violations, const Taxonomy& taxonomy,
                                const PruneConfig& config) {
    std::map<std::string, Violation> worst; // indicator -> most severe violation
    for (const auto& v : violations) {
        auto [it, inserted] = worst.emplace(v.indicator, v);
        if (!inserted && v.severity > it->second.severity) it->second = v;
    }

    Selection sel;
    std::map<std::string, std::vector<const Violation*>> protected_by_construct;
    for (const auto& [id, v] : worst) {
        const bool removable = taxonomy.construct(v.construct).indicator_ids.size() > config.min_indicators_per_construct;
        if (!removable) {
            protected_by_construct[v.construct].push_back(&v);
            continue;
        }
        // map iteration is ordered by id, so a strict comparison keeps the smaller id on ties
        if (!sel.removal || v.severity > sel.removal->severity) sel.removal = v;
    }

    for (const auto& c : taxonomy.constructs) {
        const auto it = protected_by_construct.find(c.id);
        if (it == protected_by_construct.end()) continue;
        FallbackNote note;
        note.construct = c.id;
        const Violation* closest = nullptr;
        for (const auto* v : it->second) {
            note.violators.push_back(v->indicator);
            if (!closest || v->severity < closest->severity) closest = v;
        }
        note.closest = closest->indicator;
        note.closest_severity = closest->severity;
        sel.notes.push_back(std::move(note));
    }
    return sel;
}

struct PruneStep {
    int iteration = 0;
    std::string indicator;
    std::string construct;
    ViolationReason reason = ViolationReason::vif;
    double value = 0.0;
    double severity = 0.0;
};

enum class Termination {
    clean,     ///< no violations remain
    protected_only, ///< violations remain, all in constructs at the minimum size
    error      ///< estimation failed mid-loop
};

inline std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::clean: return "clean";
    case Termination::protected_only: return "protected";
    case Termination::error: return "error";
    }
    return "error";
}

struct PruneTrace {
    std::vector<PruneStep> steps;
    Taxonomy final_taxonomy;
    std::optional<FittedModel> final_fit;          ///< absent only if the first fit failed
    std::optional<DiagnosticsReport> final_report; ///< diagnostics of final_fit
    std::vector<FallbackNote> fallback_notes;
    std::vector<Violation> remaining_violations;
    Termination termination = Termination::clean;
    std::string error_message;
    int error_iteration = 0;
    PruneConfig config;
};

/// The dataset with one task indicator removed from both the taxonomy and
/// the score matrix. Rows are unchanged.
inline ValidatedDataset drop_indicator(const ValidatedDataset& data, std::string_view indicator) {
    ValidatedDataset out = data;
    bool found = false;
    for (auto& c : out.taxonomy.constructs) {
        auto it = std::find(c.indicator_ids.begin(), c.indicator_ids.end(), indicator);
        if (it != c.indicator_ids.end()) {
            c.indicator_ids.erase(it);
            found = true;
        }
    }
    if (!found) throw Error(ErrorCode::UnknownIndicator, "'" + std::string(indicator) + "' is not a task indicator");

    const Eigen::Index col = data.column(indicator);
    const Eigen::Index p = data.scores.values.cols();
    Eigen::MatrixXd values(data.n(), p - 1);
    for (Eigen::Index k = 0, c = 0; k < p; ++k)
        if (k != col) values.col(c++) = data.scores.values.col(k);
    out.scores.values = std::move(values);
    out.scores.indicator_ids.erase(out.scores.indicator_ids.begin() + col);
    out.standardization.erase(out.standardization.begin() + col);
    return out;
}

/// Runs the refinement loop to its fixed point. Estimation failures stop the
/// loop and are reported in the trace rather than thrown.
inline PruneTrace prune(const ValidatedDataset& data, const PruneConfig& config = {}) {
    config.check();
    PruneTrace trace;
    trace.config = config;
    ValidatedDataset current = data;

    // Each step removes one task indicator, so this bound is never reached
    // unless the invariants are broken.
    const auto max_steps = static_cast<int>(data.taxonomy.task_indicator_count());
    for (int iteration = 1;; ++iteration) {
        try {
            FittedModel fitted = fit(current, config.estimator);
            DiagnosticsReport diag = benchmark_report(fitted, current);
            const auto violations = find_violations(diag, config);
            Selection sel = select_removal(violations, current.taxonomy, config);
            trace.final_fit = std::move(fitted);
            trace.final_report = std::move(diag);
            trace.fallback_notes = std::move(sel.notes);

            if (!sel.removal || iteration > max_steps) {
                trace.remaining_violations = violations;
                trace.termination = violations.empty() ? Termination::clean : Termination::protected_only;
                break;
            }
            const Violation& v = *sel.removal;
            trace.steps.push_back({iteration, v.indicator, v.construct, v.reason, v.value, v.severity});
            current = drop_indicator(current, v.indicator);
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::estimate) throw;
            trace.termination = Termination::error;
            trace.error_message = e.what();
            trace.error_iteration = iteration;
            break;
        }
    }
    trace.final_taxonomy = current.taxonomy;
    return trace;
}

} // namespace semaudit
