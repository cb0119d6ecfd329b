#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <json.hpp>

#include "semaudit/model.hpp"
#include "semaudit/simulator.hpp"

namespace testing_support {

using semaudit::ConstructSpec;
using semaudit::Level;
using semaudit::ScoreMatrix;
using semaudit::Taxonomy;

inline ScoreMatrix matrix_of(const Eigen::MatrixXd& values, std::vector<std::string> indicator_ids) {
    ScoreMatrix m;
    m.values = values;
    m.indicator_ids = std::move(indicator_ids);
    for (Eigen::Index r = 0; r < values.rows(); ++r) m.model_ids.push_back("m" + std::to_string(1000 + r));
    return m;
}

/// First-order blocks, no paths.
inline Taxonomy flat_taxonomy(std::initializer_list<std::pair<std::string, std::vector<std::string>>> blocks) {
    Taxonomy t;
    for (const auto& [id, ind] : blocks) {
        ConstructSpec c;
        c.id = id;
        c.indicator_ids = ind;
        t.constructs.push_back(c);
    }
    return t;
}

/// First-order blocks all pointing at one second-order construct "G".
inline Taxonomy hierarchical_taxonomy(std::initializer_list<std::pair<std::string, std::vector<std::string>>> blocks) {
    Taxonomy t = flat_taxonomy(blocks);
    ConstructSpec g;
    g.id = "G";
    g.level = Level::second;
    for (const auto& c : t.constructs) t.paths.emplace_back(c.id, "G");
    t.constructs.push_back(g);
    return t;
}

/// n x p data whose sample correlation matrix equals `target` up to
/// rounding. Columns of a centred Gaussian draw are orthonormalized, then
/// mixed by the Cholesky factor of `target`.
inline Eigen::MatrixXd with_exact_correlation(Eigen::Index n, const Eigen::MatrixXd& target, std::uint64_t seed) {
    const Eigen::Index p = target.rows();
    semaudit::NormalStream rng(seed);
    Eigen::MatrixXd z(n, p);
    for (Eigen::Index c = 0; c < p; ++c)
        for (Eigen::Index r = 0; r < n; ++r) z(r, c) = rng.next();
    z.rowwise() -= z.colwise().mean();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    Eigen::LLT<Eigen::MatrixXd> llt(target);
    return q * llt.matrixL().transpose() * std::sqrt(static_cast<double>(n - 1));
}

inline Eigen::MatrixXd equicorrelation(Eigen::Index p, double r) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(p, p, r);
    m.diagonal().setOnes();
    return m;
}

/// Block-diagonal correlation: within-block r_in, between-block r_out.
inline Eigen::MatrixXd two_block_correlation(Eigen::Index p1, Eigen::Index p2, double r_in, double r_out) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(p1 + p2, p1 + p2, r_out);
    m.topLeftCorner(p1, p1).setConstant(r_in);
    m.bottomRightCorner(p2, p2).setConstant(r_in);
    m.diagonal().setOnes();
    return m;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// A fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("semaudit_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Runs the CLI with `args`, returns its exit status. stderr goes to `err_file` when given.
inline int run_cli(const std::string& args, const std::filesystem::path& err_file = {}) {
    std::string cmd = std::string("\"") + SEMAUDIT_CLI + "\" " + args;
    cmd += err_file.empty() ? " 2>/dev/null" : " 2>\"" + err_file.string() + "\"";
    cmd += " >/dev/null";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(SEMAUDIT_SOURCE_DIR) / rel; }

/// Validates `doc` against the subset of JSON Schema used by the published
/// schemas: type, required, properties, additionalProperties, items, enum,
/// minimum, maximum, anyOf and $ref to local $defs. Returns the first violation, or
/// an empty string.
class SchemaChecker {
public:
    explicit SchemaChecker(nlohmann::json schema) : root_(std::move(schema)) {}

    std::string check(const nlohmann::json& doc) const { return check(doc, root_, "$"); }

private:
    nlohmann::json root_;

    static bool has_type(const nlohmann::json& v, const std::string& t) {
        if (t == "object") return v.is_object();
        if (t == "array") return v.is_array();
        if (t == "string") return v.is_string();
        if (t == "boolean") return v.is_boolean();
        if (t == "null") return v.is_null();
        if (t == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
        if (t == "number") return v.is_number();
        return false;
    }

    std::string check(const nlohmann::json& v, const nlohmann::json& s, const std::string& at) const {
        if (s.contains("$ref")) {
            const std::string ref = s["$ref"];
            const std::string prefix = "#/$defs/";
            if (ref.rfind(prefix, 0) != 0) return at + ": unsupported $ref " + ref;
            return check(v, root_["$defs"][ref.substr(prefix.size())], at);
        }
        if (s.contains("anyOf")) {
            std::string last;
            for (const auto& alt : s["anyOf"]) {
                last = check(v, alt, at);
                if (last.empty()) return {};
            }
            return last;
        }
        if (s.contains("type")) {
            bool ok = false;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
            } else {
                ok = has_type(v, s["type"].get<std::string>());
            }
            if (!ok) return at + ": expected type " + s["type"].dump() + ", got " + v.dump().substr(0, 40);
        }
        if (s.contains("enum")) {
            bool found = false;
            for (const auto& e : s["enum"]) found = found || e == v;
            if (!found) return at + ": value not in enum";
        }
        if (v.is_number()) {
            if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) return at + ": below minimum";
            if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) return at + ": above maximum";
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& k : s["required"])
                    if (!v.contains(k.get<std::string>())) return at + ": missing key " + k.get<std::string>();
            for (const auto& [key, value] : v.items()) {
                const std::string here = at + "." + key;
                if (s.contains("properties") && s["properties"].contains(key)) {
                    if (auto e = check(value, s["properties"][key], here); !e.empty()) return e;
                } else if (s.contains("additionalProperties")) {
                    const auto& ap = s["additionalProperties"];
                    if (ap.is_boolean()) {
                        if (!ap.get<bool>()) return here + ": unexpected key";
                    } else if (auto e = check(value, ap, here); !e.empty()) {
                        return e;
                    }
                }
            }
        }
        if (v.is_array() && s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i)
                if (auto e = check(v[i], s["items"], at + "[" + std::to_string(i) + "]"); !e.empty()) return e;
        return {};
    }
};

inline SchemaChecker load_schema(const std::string& name) {
    return SchemaChecker(nlohmann::json::parse(read_file(source_path("schemas/" + name))));
}

} // namespace testing_support
