#pragma once

// Domain types shared by every solver: signals, adjacency, the M-matrix
// objective, sparsity priors, problem instances and solve reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cqdenoise {

/// Raised when user-supplied data violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Division with the convention a/0 = +inf for a > 0 and 0/0 = 0.
inline double safe_div(double num, double den) {
    if (den > 0.0) return num / den;
    if (num <= 0.0) return 0.0;
    return std::numeric_limits<double>::infinity();
}

/// Nonnegative observations y_1..y_n.
class Signal {
public:
    Signal() = default;
    explicit Signal(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw InvalidInput("signal must have at least one entry");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
                throw InvalidInput("signal entry " + std::to_string(i) + " is negative or not finite");
        }
    }

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    double max_abs() const { return *std::max_element(values_.begin(), values_.end()); }
    double squared_norm() const {
        double acc = 0.0;
        for (double v : values_) acc += v * v;
        return acc;
    }

private:
    std::vector<double> values_;
};

/// Undirected simple graph on 0-based indices. Edges are stored with i < j.
class AdjacencyGraph {
public:
    using Edge = std::pair<std::size_t, std::size_t>;

    AdjacencyGraph() = default;
    AdjacencyGraph(std::size_t n, std::vector<Edge> edges) : n_(n) {
        if (n == 0) throw InvalidInput("graph must have at least one node");
        for (auto [a, b] : edges) {
            if (a == b) throw InvalidInput("self-loops are not allowed");
            if (a >= n || b >= n) throw InvalidInput("edge endpoint out of range");
            edges_.emplace_back(std::min(a, b), std::max(a, b));
        }
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw InvalidInput("duplicate edge");
    }

    static AdjacencyGraph chain(std::size_t n) {
        std::vector<Edge> e;
        for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
        return AdjacencyGraph(n, std::move(e));
    }

    std::size_t size() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::vector<std::size_t> degrees() const {
        std::vector<std::size_t> deg(n_, 0);
        for (auto [a, b] : edges_) {
            ++deg[a];
            ++deg[b];
        }
        return deg;
    }

    bool is_chain() const {
        if (edges_.size() + 1 != n_) return false;
        for (std::size_t k = 0; k < edges_.size(); ++k)
            if (edges_[k] != Edge{k, k + 1}) return false;
        return true;
    }

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
};

/// Symmetric M-matrix Q stored as diagonal plus an upper-triangle edge map,
/// together with the linear term of  ||y||^2 - 2 y'x + x'Qx.
struct MMatrixQuadratic {
    std::size_t n = 0;
    std::vector<double> diag;
    std::map<AdjacencyGraph::Edge, double> offdiag;  // i < j, value Q_ij < 0
    std::vector<double> linear;                       // -2 y
    double constant = 0.0;                            // ||y||_2^2

    double quad_form(const std::vector<double>& x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += diag[i] * x[i] * x[i];
        for (const auto& [e, q] : offdiag) acc += 2.0 * q * x[e.first] * x[e.second];
        return acc;
    }

    /// Q_ii minus the sum of |Q_ij| over the row.
    std::vector<double> dominance_surplus() const {
        std::vector<double> s = diag;
        for (const auto& [e, q] : offdiag) {
            s[e.first] -= std::abs(q);
            s[e.second] -= std::abs(q);
        }
        return s;
    }
};

enum class PriorKind { none, cardinality, regularized, spikes };

inline std::string to_string(PriorKind k) {
    switch (k) {
        case PriorKind::none: return "none";
        case PriorKind::cardinality: return "cardinality";
        case PriorKind::regularized: return "regularized";
        case PriorKind::spikes: return "spikes";
    }
    return "none";
}

inline PriorKind prior_kind_from_string(const std::string& s) {
    if (s == "none") return PriorKind::none;
    if (s == "cardinality") return PriorKind::cardinality;
    if (s == "regularized") return PriorKind::regularized;
    if (s == "spikes") return PriorKind::spikes;
    throw InvalidInput("unknown prior kind '" + s + "'");
}

/// Sparsity priors on the indicator vector z.
///
/// `kind` selects the structural constraints (cardinality, spike count and
/// patch length). The l0 weights `mu0` and `kappa` add (mu0 + kappa) * sum(z)
/// to the objective for every kind; `mu1` adds the shrinkage term mu1 * sum(x).
struct SparsityPriors {
    PriorKind kind = PriorKind::none;
    std::size_t k = 0;
    std::size_t s = 0;
    std::size_t h = 1;
    double mu0 = 0.0;
    double kappa = 0.0;
    double mu1 = 0.0;

    static SparsityPriors none() { return {}; }
    static SparsityPriors cardinality(std::size_t k) {
        SparsityPriors p;
        p.kind = PriorKind::cardinality;
        p.k = k;
        return p;
    }
    static SparsityPriors regularized(double mu0) {
        SparsityPriors p;
        p.kind = PriorKind::regularized;
        p.mu0 = mu0;
        return p;
    }
    static SparsityPriors spikes(std::size_t k, std::size_t s, std::size_t h) {
        SparsityPriors p;
        p.kind = PriorKind::spikes;
        p.k = k;
        p.s = s;
        p.h = h;
        return p;
    }

    double l0_weight() const { return mu0 + kappa; }
    bool has_cardinality() const { return kind == PriorKind::cardinality || kind == PriorKind::spikes; }

    void validate(std::size_t n) const {
        if (mu0 < 0.0 || kappa < 0.0 || mu1 < 0.0) throw InvalidInput("prior weights must be nonnegative");
        if (has_cardinality() && k > n) throw InvalidInput("cardinality k exceeds n");
        if (kind == PriorKind::spikes) {
            if (h == 0) throw InvalidInput("spike length h must be positive");
            if (h * s > n) throw InvalidInput("spike priors require h*s <= n");
        }
    }

    /// True when a binary indicator vector satisfies the structural priors.
    bool admits(const std::vector<int>& z) const {
        std::size_t n = z.size();
        std::size_t card = 0;
        for (int v : z) card += (v != 0);
        if (has_cardinality() && card > k) return false;
        if (kind == PriorKind::spikes) {
            std::size_t transitions = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) transitions += (z[i] != z[i + 1]);
            if (transitions > 2 * s) return false;
            for (std::size_t l = 0; l < n; ++l) {
                if (!z[l]) continue;
                std::size_t lo = l >= h ? l - h : 0;
                std::size_t hi = std::min(n - 1, l + h);
                std::size_t cnt = 0;
                for (std::size_t i = lo; i <= hi; ++i) cnt += (z[i] != 0);
                if (cnt < h) return false;
            }
        }
        return true;
    }
};

struct ProblemInstance {
    Signal signal;
    AdjacencyGraph graph;
    double lambda = 0.0;
    SparsityPriors priors;
    double bigM = 1.0;
    /// Extra linear cost on x (used by the Lagrangian block subproblems).
    std::vector<double> extra_linear;

    std::size_t size() const { return signal.size(); }
};

/// Builds an instance; bigM defaults to ||y||_inf and may be overridden.
inline ProblemInstance build_instance(const Signal& y, const AdjacencyGraph& graph, double lambda,
                                      const SparsityPriors& priors,
                                      std::optional<double> bigM = std::nullopt) {
    if (graph.size() != y.size())
        throw InvalidInput("graph has " + std::to_string(graph.size()) + " nodes but signal has " +
                           std::to_string(y.size()) + " entries");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be nonnegative");
    priors.validate(y.size());
    ProblemInstance inst;
    inst.signal = y;
    inst.graph = graph;
    inst.lambda = lambda;
    inst.priors = priors;
    inst.bigM = bigM.value_or(y.max_abs());
    if (!(inst.bigM >= 0.0)) throw InvalidInput("bigM must be nonnegative");
    // all-zero signal: keep a positive bound so that x <= M z stays well posed
    if (inst.bigM == 0.0) inst.bigM = bigM.has_value() ? 0.0 : 1.0;
    return inst;
}

inline MMatrixQuadratic to_mmatrix(const ProblemInstance& inst) {
    MMatrixQuadratic q;
    q.n = inst.size();
    q.diag.assign(q.n, 1.0);
    if (inst.lambda > 0.0) {
        for (auto [a, b] : inst.graph.edges()) {
            q.offdiag[{a, b}] = -inst.lambda;
            q.diag[a] += inst.lambda;
            q.diag[b] += inst.lambda;
        }
    }
    q.linear.resize(q.n);
    for (std::size_t i = 0; i < q.n; ++i) q.linear[i] = -2.0 * inst.signal[i];
    q.constant = inst.signal.squared_norm();
    return q;
}

/// Exact objective of the mixed-integer model at (x, z):
/// ||y - x||^2 + lambda * sum_A (x_i - x_j)^2 + (mu0 + kappa) sum z + mu1 sum x + extra'x.
inline double miqo_objective(const ProblemInstance& inst, const std::vector<double>& x,
                             const std::vector<double>& z) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inst.size(); ++i) {
        double r = inst.signal[i] - x[i];
        acc += r * r + inst.priors.l0_weight() * z[i] + inst.priors.mu1 * x[i];
        if (!inst.extra_linear.empty()) acc += inst.extra_linear[i] * x[i];
    }
    for (auto [a, b] : inst.graph.edges()) {
        double d = x[a] - x[b];
        acc += inst.lambda * d * d;
    }
    return acc;
}

enum class SolveStatus { optimal, iteration_limit, infeasible, numerical_failure };

inline std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::iteration_limit: return "iteration_limit";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "numerical_failure";
}

struct SolveReport {
    std::vector<double> x_star;
    std::vector<double> z_star;
    double objective = 0.0;  // lower bound from the relaxation
    std::optional<double> rounded_objective;
    std::optional<double> gap_percent;
    int iterations = 0;
    int cuts_added = 0;
    double wall_time = 0.0;
    SolveStatus status = SolveStatus::numerical_failure;
};

/// Reads one nonnegative value per line. Blank lines are skipped; when
/// `has_header` is set the first non-blank line is ignored. A line of the
/// form "index,value" is accepted and only the last field is used.
inline Signal read_signal_csv(std::istream& in, bool has_header) {
    std::vector<double> vals;
    std::string line;
    bool skipped = !has_header;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (!skipped) {
            skipped = true;
            continue;
        }
        std::string field = line.substr(line.rfind(',') == std::string::npos ? 0 : line.rfind(',') + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            throw InvalidInput("line " + std::to_string(lineno) + ": not a number: '" + line + "'");
        }
        if (field.find_first_not_of(" \t\r", used) != std::string::npos)
            throw InvalidInput("line " + std::to_string(lineno) + ": trailing characters: '" + line + "'");
        if (!(v >= 0.0)) throw InvalidInput("line " + std::to_string(lineno) + ": negative value");
        vals.push_back(v);
    }
    return Signal(std::move(vals));
}

inline Signal read_signal_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open signal file '" + path + "'");
    return read_signal_csv(in, has_header);
}

}  // namespace cqdenoise
