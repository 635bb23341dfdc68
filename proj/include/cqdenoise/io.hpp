#pragma once

// File formats shared by the CLI and the tests.
//
// Instance bundle (JSON):
//   { "n": 3, "lambda": 1.0, "seed": 7,
//     "priors": { "kind": "regularized", "k": 0, "s": 0, "h": 1,
//                 "mu0": 0.5, "kappa": 0.0, "mu1": 0.0 },
//     "y": [...], "y_true": [...] }
// "y_true", "seed" and "bigM" are optional; missing prior fields take their
// defaults. The graph is always the chain on n nodes.
//
// Signals are CSV with the header "index,value".

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cqdenoise/core_model.hpp"
#include "cqdenoise/exact.hpp"

namespace cqdenoise {

using json = nlohmann::json;

struct InstanceBundle {
    std::vector<double> y;
    std::optional<std::vector<double>> y_true;
    double lambda = 0.0;
    SparsityPriors priors;
    std::optional<std::uint64_t> seed;
    std::optional<double> bigM;

    ProblemInstance instance() const {
        return build_instance(Signal(y), AdjacencyGraph::chain(y.size()), lambda, priors, bigM);
    }
};

inline json priors_to_json(const SparsityPriors& p) {
    return json{{"kind", to_string(p.kind)}, {"k", p.k},       {"s", p.s},    {"h", p.h},
                {"mu0", p.mu0},              {"kappa", p.kappa}, {"mu1", p.mu1}};
}

inline SparsityPriors priors_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("priors must be a JSON object");
    SparsityPriors p;
    p.kind = prior_kind_from_string(j.value("kind", std::string("none")));
    p.k = j.value("k", p.k);
    p.s = j.value("s", p.s);
    p.h = j.value("h", p.h);
    p.mu0 = j.value("mu0", p.mu0);
    p.kappa = j.value("kappa", p.kappa);
    p.mu1 = j.value("mu1", p.mu1);
    return p;
}

inline json bundle_to_json(const InstanceBundle& b) {
    json j{{"n", b.y.size()}, {"lambda", b.lambda}, {"priors", priors_to_json(b.priors)}, {"y", b.y}};
    if (b.y_true) j["y_true"] = *b.y_true;
    if (b.seed) j["seed"] = *b.seed;
    if (b.bigM) j["bigM"] = *b.bigM;
    return j;
}

inline InstanceBundle bundle_from_json(const json& j) {
    if (!j.is_object()) throw InvalidInput("instance must be a JSON object");
    for (const char* key : {"n", "lambda", "y"})
        if (!j.contains(key)) throw InvalidInput(std::string("instance is missing '") + key + "'");
    InstanceBundle b;
    try {
        b.y = j.at("y").get<std::vector<double>>();
        b.lambda = j.at("lambda").get<double>();
        const auto n = j.at("n").get<std::size_t>();
        if (n != b.y.size()) throw InvalidInput("instance n does not match the length of y");
        if (j.contains("priors")) b.priors = priors_from_json(j.at("priors"));
        if (j.contains("y_true") && !j.at("y_true").is_null()) {
            b.y_true = j.at("y_true").get<std::vector<double>>();
            if (b.y_true->size() != n) throw InvalidInput("instance y_true has the wrong length");
        }
        if (j.contains("seed") && !j.at("seed").is_null()) b.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("bigM") && !j.at("bigM").is_null()) b.bigM = j.at("bigM").get<double>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed instance: ") + e.what());
    }
    return b;
}

inline InstanceBundle read_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open instance file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InvalidInput("instance file '" + path + "' is not valid JSON: " + e.what());
    }
    return bundle_from_json(j);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path + "'");
    out << text;
}

inline void write_instance(const std::string& path, const InstanceBundle& b) {
    write_text(path, bundle_to_json(b).dump(2) + "\n");
}

// 17 significant digits round-trip every double.
inline std::string signal_csv(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    os << "index,value\n";
    for (std::size_t i = 0; i < v.size(); ++i) os << i << ',' << v[i] << '\n';
    return os.str();
}

inline json report_to_json(const SolveReport& r) {
    std::size_t nnz = 0;
    for (double v : r.x_star) nnz += std::abs(v) > kNonzeroThreshold;
    json j{{"status", to_string(r.status)},
           {"objective", r.objective},
           {"rounded_objective", nullptr},
           {"gap_percent", nullptr},
           {"iterations", r.iterations},
           {"cuts_added", r.cuts_added},
           {"wall_time", r.wall_time},
           {"nnz", nnz},
           {"x_star", r.x_star},
           {"z_star", r.z_star}};
    if (r.rounded_objective) j["rounded_objective"] = *r.rounded_objective;
    if (r.gap_percent) j["gap_percent"] = *r.gap_percent;
    return j;
}

/// Columns i, y, x, z; one row per entry.
inline std::string results_csv(const std::vector<double>& y, const SolveReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "i,y,x,z\n";
    for (std::size_t i = 0; i < y.size(); ++i) {
        os << i << ',' << y[i] << ',' << (i < r.x_star.size() ? r.x_star[i] : 0.0) << ','
           << (i < r.z_star.size() ? r.z_star[i] : 0.0) << '\n';
    }
    return os.str();
}

}  // namespace cqdenoise
