// semaudit: command-line front end.
//
// Exit codes: 0 success, 1 usage, 2 parse or I/O failure, 3 validation
// failure, 4 estimation failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semaudit/diagnostics.hpp"
#include "semaudit/error.hpp"
#include "semaudit/estimator.hpp"
#include "semaudit/model.hpp"
#include "semaudit/pruner.hpp"
#include "semaudit/rank_analysis.hpp"
#include "semaudit/report.hpp"
#include "semaudit/simulator.hpp"

namespace fs = std::filesystem;
using namespace semaudit;

namespace {

enum Exit : int { ok = 0, usage = 1, parse = 2, validation = 3, estimation = 4 };

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return in;
}

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

ScoreMatrix read_scores(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_scores(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

ModelScores read_model_scores(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_model_scores(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

Taxonomy read_taxonomy(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_taxonomy(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
    fs::path p(path);
    if (p.extension() == ".json" || p.extension() == ".csv") p.replace_extension();
    return p.string() + suffix;
}

struct Common {
    EstimatorConfig estimator;
};

void add_estimator_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--epsilon", c.estimator.epsilon, "Convergence tolerance on the largest weight change")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iter", c.estimator.max_iter, "Iteration cap per estimation stage")->check(CLI::PositiveNumber);
}

struct AnalyzeArgs {
    std::string scores, taxonomy, human, output, plot_dir, composite_out;
};

int run_analyze(const AnalyzeArgs& a, const Common& c) {
    const ScoreMatrix raw = read_scores(a.scores);
    const Taxonomy tax = read_taxonomy(a.taxonomy);
    std::optional<ModelScores> human;
    if (!a.human.empty()) human = read_model_scores(a.human);

    const ValidatedDataset data = validate(raw, tax);
    const FittedModel fitted = fit(data, c.estimator);
    const DiagnosticsReport report = benchmark_report(fitted, data, human);
    const CompositeScores composite = composite_score(fitted, data);

    write_file(a.output, canonical_json(analysis_report_json(data, fitted, report, composite, c.estimator)));
    if (!a.plot_dir.empty())
        for (const auto& [name, text] : plot_tables(report)) write_file((fs::path(a.plot_dir) / name).string(), text);
    if (!a.composite_out.empty()) {
        std::ostringstream os;
        write_model_scores_csv(os, composite.as_model_scores(), "composite");
        write_file(a.composite_out, os.str());
    }
    return ok;
}

struct PruneArgs {
    std::string scores, taxonomy, output, refined_taxonomy;
    double vif_threshold = 5.0;
    double loading_threshold = 0.75;
};

int run_prune(const PruneArgs& a, const Common& c) {
    const ScoreMatrix raw = read_scores(a.scores);
    const Taxonomy tax = read_taxonomy(a.taxonomy);
    const ValidatedDataset data = validate(raw, tax);

    PruneConfig config;
    config.vif_threshold = a.vif_threshold;
    config.loading_threshold = a.loading_threshold;
    config.estimator = c.estimator;
    try {
        config.check();
    } catch (const Error& e) {
        throw CLI::ValidationError("prune", e.what());
    }
    const PruneTrace trace = prune(data, config);

    write_file(a.output, canonical_json(prune_trace_json(trace, data)));
    const std::string refined = a.refined_taxonomy.empty() ? with_suffix(a.output, ".taxonomy.json") : a.refined_taxonomy;
    write_file(refined, canonical_json(taxonomy_to_json(trace.final_taxonomy)));
    if (trace.termination == Termination::error) {
        std::cerr << "semaudit: estimation failed at iteration " << trace.error_iteration << ": " << trace.error_message
                  << "\n";
        return estimation;
    }
    return ok;
}

struct SimulateArgs {
    std::string spec, output, truth, taxonomy_out;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
    auto in = open_input(a.spec);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SpecError, a.spec + ": " + e.what());
    }
    SimSpec spec = sim_spec_from_json(doc);
    if (a.seed) spec.seed = *a.seed;
    const Simulation sim = generate(spec);

    std::ostringstream csv;
    write_scores_csv(csv, sim.scores);
    write_file(a.output, csv.str());
    write_file(a.truth.empty() ? with_suffix(a.output, ".truth.json") : a.truth,
               canonical_json(truth_to_json(spec, sim)));
    if (!a.taxonomy_out.empty()) write_file(a.taxonomy_out, canonical_json(taxonomy_to_json(taxonomy_for(spec))));
    return ok;
}

struct RankArgs {
    std::string original, refined, human, output, key = "human";
    std::vector<std::string> subsets;
};

SubsetDef parse_subset(const std::string& text, SubsetKey key) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--subset", "expected top:K or bottom:K, got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    SubsetDef d;
    d.name = text;
    d.key = key;
    if (kind == "top") d.kind = SubsetKind::top;
    else if (kind == "bottom") d.kind = SubsetKind::bottom;
    else throw CLI::ValidationError("--subset", "subset kind must be 'top' or 'bottom'");
    try {
        std::size_t used = 0;
        const long long k = std::stoll(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1 || k <= 0) throw std::invalid_argument("k");
        d.k = static_cast<std::size_t>(k);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--subset", "subset size must be a positive integer in '" + text + "'");
    }
    return d;
}

int run_rank(const RankArgs& a) {
    const SubsetKey key = a.key == "original" ? SubsetKey::original : a.key == "refined" ? SubsetKey::refined : SubsetKey::human;
    std::vector<SubsetDef> defs;
    for (const auto& s : a.subsets) defs.push_back(parse_subset(s, key));
    const RankReport r =
        rank_report(read_model_scores(a.original), read_model_scores(a.refined), read_model_scores(a.human), defs);
    write_file(a.output, canonical_json(rank_report_json(r)));
    return ok;
}

int exit_code(const Error& e) {
    switch (e.category()) {
    case ErrorCategory::parse: return parse;
    case ErrorCategory::validate: return validation;
    case ErrorCategory::estimate: return estimation;
    }
    return estimation;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Construct-validity audit for benchmark score matrices"};
    app.set_config("--config", "", "TOML or INI file supplying defaults for any flag");
    app.require_subcommand(1);

    Common common;

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Fit the measurement model and report diagnostics");
    analyze->add_option("--scores", an.scores, "Score matrix CSV (model_id, one column per task)")->required();
    analyze->add_option("--taxonomy", an.taxonomy, "Construct taxonomy JSON")->required();
    analyze->add_option("--human", an.human, "Human reference scores CSV (model_id,score)");
    analyze->add_option("-o,--output", an.output, "Report JSON path")->required();
    analyze->add_option("--plot-data", an.plot_dir, "Directory for plot-ready CSV tables");
    analyze->add_option("--composite-out", an.composite_out, "Per-model composite score CSV");
    add_estimator_flags(analyze, common);

    PruneArgs pr;
    auto* prune_cmd = app.add_subcommand("prune", "Iteratively remove redundant or weak tasks");
    prune_cmd->add_option("--scores", pr.scores, "Score matrix CSV")->required();
    prune_cmd->add_option("--taxonomy", pr.taxonomy, "Construct taxonomy JSON")->required();
    prune_cmd->add_option("--vif-threshold", pr.vif_threshold, "Remove tasks whose VIF exceeds this")
        ->capture_default_str()
        ->check(CLI::Range(1.0, 1e300));
    prune_cmd->add_option("--loading-threshold", pr.loading_threshold, "Remove tasks whose loading falls below this")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    prune_cmd->add_option("-o,--output", pr.output, "Trace JSON path")->required();
    prune_cmd->add_option("--refined-taxonomy", pr.refined_taxonomy,
                          "Refined taxonomy JSON path (default: <output>.taxonomy.json)");
    add_estimator_flags(prune_cmd, common);

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Generate a score matrix from a planted latent structure");
    simulate->add_option("--spec", sm.spec, "Simulation spec JSON")->required();
    simulate->add_option("--seed", sm.seed, "Overrides the spec seed");
    simulate->add_option("-o,--output", sm.output, "Score matrix CSV path")->required();
    simulate->add_option("--truth", sm.truth, "Ground-truth JSON path (default: <output>.truth.json)");
    simulate->add_option("--taxonomy-out", sm.taxonomy_out, "Write the matching taxonomy JSON here");

    RankArgs rk;
    auto* rank = app.add_subcommand("rank", "Compare rankings from original, refined and human scores");
    rank->add_option("--original", rk.original, "Original aggregate CSV (model_id,score)")->required();
    rank->add_option("--refined", rk.refined, "Refined composite CSV (model_id,score)")->required();
    rank->add_option("--human", rk.human, "Human reference CSV (model_id,score)")->required();
    rank->add_option("-o,--output", rk.output, "Rank report JSON path")->required();
    rank->add_option("--subset", rk.subsets, "Subset such as top:50 or bottom:20 (repeatable)");
    rank->add_option("--subset-key", rk.key, "Score that orders subsets")
        ->capture_default_str()
        ->check(CLI::IsMember({"human", "original", "refined"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (*analyze) return run_analyze(an, common);
        if (*prune_cmd) return run_prune(pr, common);
        if (*simulate) return run_simulate(sm);
        if (*rank) return run_rank(rk);
    } catch (const CLI::ParseError& e) {
        std::cerr << "semaudit: " << e.what() << "\n";
        return usage;
    } catch (const Error& e) {
        std::cerr << "semaudit: " << e.what() << "\n";
        return exit_code(e);
    }
    return usage;
}
