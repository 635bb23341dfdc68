#pragma once

// Conic relaxations of the sparse denoising model: the continuous big-M
// relaxation (l1), the perspective relaxation, the pairwise hull relaxation
// and the Gamma-lifted master used by the cutting-surface method.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cqdenoise/cone_solver.hpp"
#include "cqdenoise/core_model.hpp"
#include "cqdenoise/pairwise_hull.hpp"

namespace cqdenoise {

enum class RelaxationKind { l1, persp, pairwise, decomp };

inline std::string to_string(RelaxationKind k) {
    switch (k) {
        case RelaxationKind::l1: return "l1";
        case RelaxationKind::persp: return "persp";
        case RelaxationKind::pairwise: return "pairwise";
        case RelaxationKind::decomp: return "decomp";
    }
    return "l1";
}

inline RelaxationKind relaxation_kind_from_string(const std::string& s) {
    if (s == "l1") return RelaxationKind::l1;
    if (s == "persp") return RelaxationKind::persp;
    if (s == "pairwise") return RelaxationKind::pairwise;
    if (s == "decomp") return RelaxationKind::decomp;
    throw InvalidInput("unknown relaxation '" + s + "'");
}

struct MasterModel {
    ProblemInstance instance;
    MMatrixQuadratic Q;
    RelaxationKind kind = RelaxationKind::l1;
    ConeBuilder builder;
    std::vector<std::size_t> x, z;
    // decomp only
    std::vector<std::size_t> gamma_diag;
    std::map<AdjacencyGraph::Edge, std::size_t> gamma_off;
    std::map<AdjacencyGraph::Edge, std::vector<double>> delta_sets;
    std::vector<PairCut> cuts;
    // spike-count linearization
    std::vector<std::size_t> p, q;
};

struct MasterSolution {
    ConeSolution cone;
    SolveStatus status = SolveStatus::numerical_failure;
    double objective = 0.0;
    std::vector<double> x, z, gamma_diag;
    std::map<AdjacencyGraph::Edge, double> gamma_off;
};

inline SolveStatus to_solve_status(ConeStatus s) {
    switch (s) {
        case ConeStatus::optimal: return SolveStatus::optimal;
        case ConeStatus::infeasible: return SolveStatus::infeasible;
        case ConeStatus::max_iter: return SolveStatus::iteration_limit;
        default: return SolveStatus::numerical_failure;
    }
}

/// Adds Sum z <= k for cardinality priors; spike priors also get the
/// transition budget (through z_{i+1} - z_i = p_i - q_i, Sum(p + q) <= 2s)
/// and the minimum-patch rows Sum_{|i-l|<=h} z_i >= h z_l.
inline void add_prior_constraints(MasterModel& m, const SparsityPriors& priors) {
    using D = ConeBuilder::Domain;
    auto& b = m.builder;
    const std::size_t n = m.z.size();
    if (priors.has_cardinality() && priors.k < n) {
        LinExpr card;
        for (auto zi : m.z) card.add(zi, 1.0);
        b.add_le(card, static_cast<double>(priors.k));
    }
    if (priors.kind != PriorKind::spikes) return;
    if (n > 1) {
        LinExpr budget;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            auto pi = b.add_var(D::nonneg, "p" + std::to_string(i));
            auto qi = b.add_var(D::nonneg, "q" + std::to_string(i));
            m.p.push_back(pi);
            m.q.push_back(qi);
            LinExpr row = LinExpr::var(m.z[i + 1]) - LinExpr::var(m.z[i]);
            row.add(pi, -1.0).add(qi, 1.0);
            b.add_eq(row, 0.0);
            budget.add(pi, 1.0).add(qi, 1.0);
        }
        b.add_le(budget, 2.0 * static_cast<double>(priors.s));
    }
    const std::size_t h = priors.h;
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t lo = l >= h ? l - h : 0;
        std::size_t hi = std::min(n - 1, l + h);
        LinExpr row;
        for (std::size_t i = lo; i <= hi; ++i) row.add(m.z[i], i == l ? 1.0 - static_cast<double>(h) : 1.0);
        b.add_ge(row, 0.0);
    }
}

/// Appends the cut for edge (i, j) with parameter d: a fresh s with
/// d s <= d G_ii - 2 G_ij + G_jj / d and s >= f(z_i, z_j, x_i, x_j / d).
/// Returns false when d is already registered for the edge.
inline bool register_cut(MasterModel& m, std::size_t i, std::size_t j, double d) {
    using D = ConeBuilder::Domain;
    if (m.kind != RelaxationKind::decomp) throw InvalidInput("cuts apply to the decomp master only");
    if (i > j) std::swap(i, j);
    auto it = m.gamma_off.find({i, j});
    if (it == m.gamma_off.end()) throw InvalidInput("cut requested for a pair that is not an edge");
    if (!(d > 0.0) || !std::isfinite(d)) throw InvalidInput("cut parameter must be positive and finite");
    auto& delta = m.delta_sets[{i, j}];
    for (double e : delta)
        if (std::abs(e - d) <= 1e-9 * std::max(std::abs(e), std::abs(d))) return false;
    delta.push_back(d);

    auto& b = m.builder;
    PairCut cut;
    cut.i = i;
    cut.j = j;
    cut.d = d;
    cut.s = b.add_var(D::nonneg, "cut_s");
    // Keep every coefficient at most one in magnitude. For d >= 1 the row is
    // divided by d; for d < 1 it is multiplied by d and s stands for
    // f(z_i, z_j, d x_i, x_j) = d^2 f(z_i, z_j, x_i, x_j / d).
    const bool big = d >= 1.0;
    const double r = big ? 1.0 / d : d;
    LinExpr row;
    row.add(cut.s, 1.0);
    row.add(m.gamma_diag[i], big ? -1.0 : -r * r);
    row.add(it->second, 2.0 * r);
    row.add(m.gamma_diag[j], big ? -r * r : -1.0);
    b.add_le(row, 0.0);
    auto a1 = big ? LinExpr::var(m.x[i]) : d * LinExpr::var(m.x[i]);
    auto a2 = big ? (1.0 / d) * LinExpr::var(m.x[j]) : LinExpr::var(m.x[j]);
    auto blk = x2_hull_block(b, a1, a2, LinExpr::var(m.z[i]), LinExpr::var(m.z[j]), LinExpr::var(cut.s));
    cut.v = blk.v;
    cut.w = blk.w;
    m.cuts.push_back(cut);
    return true;
}

/// Builds the relaxation of the given tier, including the prior rows of the
/// instance. The objective carries the constant ||y||^2, so optimal values
/// compare directly with the mixed-integer objective.
inline MasterModel build_relaxation(const ProblemInstance& inst, RelaxationKind kind) {
    using D = ConeBuilder::Domain;
    MasterModel m;
    m.instance = inst;
    m.Q = to_mmatrix(inst);
    m.kind = kind;
    auto& b = m.builder;
    const std::size_t n = inst.size();
    const auto& pr = inst.priors;

    b.add_objective_constant(m.Q.constant);
    for (std::size_t i = 0; i < n; ++i) {
        m.x.push_back(b.add_var(D::nonneg, "x" + std::to_string(i)));
        m.z.push_back(b.add_var(D::nonneg, "z" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < n; ++i) {
        double lin = m.Q.linear[i] + pr.mu1;
        if (!inst.extra_linear.empty()) lin += inst.extra_linear[i];
        b.add_objective(m.x[i], lin);
        b.add_objective(m.z[i], pr.l0_weight());
        b.add_le(LinExpr::var(m.z[i]), 1.0);
        b.add_le(LinExpr::var(m.x[i]) - inst.bigM * LinExpr::var(m.z[i]), 0.0);
    }

    const auto surplus = m.Q.dominance_surplus();
    switch (kind) {
        case RelaxationKind::l1:
        case RelaxationKind::persp: {
            for (std::size_t i = 0; i < n; ++i) {
                if (surplus[i] <= 0.0) continue;
                auto t = b.add_var(D::nonneg, "t" + std::to_string(i));
                LinExpr zs = kind == RelaxationKind::persp ? LinExpr::var(m.z[i]) : LinExpr(1.0);
                b.add_rotated_cone(LinExpr::var(t), zs, {LinExpr::var(m.x[i])});
                b.add_objective(t, surplus[i]);
            }
            for (const auto& [e, qv] : m.Q.offdiag) {
                auto u = b.add_var(D::nonneg, "u");
                b.add_rotated_cone(LinExpr::var(u), LinExpr(1.0), {LinExpr::var(m.x[e.first]) - LinExpr::var(m.x[e.second])});
                b.add_objective(u, std::abs(qv));
            }
            break;
        }
        case RelaxationKind::pairwise: {
            for (std::size_t i = 0; i < n; ++i) {
                if (surplus[i] <= 0.0) continue;
                auto t = b.add_var(D::nonneg, "t" + std::to_string(i));
                b.add_rotated_cone(LinExpr::var(t), LinExpr::var(m.z[i]), {LinExpr::var(m.x[i])});
                b.add_objective(t, surplus[i]);
            }
            for (const auto& [e, qv] : m.Q.offdiag) {
                auto s = b.add_var(D::nonneg, "s");
                x2_hull_block(b, LinExpr::var(m.x[e.first]), LinExpr::var(m.x[e.second]), LinExpr::var(m.z[e.first]),
                              LinExpr::var(m.z[e.second]), LinExpr::var(s));
                b.add_objective(s, std::abs(qv));
            }
            break;
        }
        case RelaxationKind::decomp: {
            for (std::size_t i = 0; i < n; ++i) {
                auto g = b.add_var(D::nonneg, "G" + std::to_string(i));
                m.gamma_diag.push_back(g);
                b.add_rotated_cone(LinExpr::var(g), LinExpr::var(m.z[i]), {LinExpr::var(m.x[i])});
                b.add_objective(g, m.Q.diag[i]);
            }
            for (const auto& [e, qv] : m.Q.offdiag) {
                auto g = b.add_var(D::free, "G" + std::to_string(e.first) + "_" + std::to_string(e.second));
                m.gamma_off[e] = g;
                b.add_objective(g, 2.0 * qv);
            }
            for (const auto& [e, qv] : m.Q.offdiag) register_cut(m, e.first, e.second, 1.0);
            break;
        }
    }
    add_prior_constraints(m, pr);
    return m;
}

inline MasterSolution solve_master(const MasterModel& m, const ConeSolverOptions& opts = {}) {
    auto cp = m.builder.compile();
    MasterSolution out;
    out.cone = solve_cone_program(cp.program, opts);
    out.status = to_solve_status(out.cone.status);
    out.objective = out.cone.objective;
    if (out.cone.primal.empty() || out.status == SolveStatus::infeasible) return out;
    for (auto v : m.x) out.x.push_back(cp.value(out.cone, v));
    for (auto v : m.z) out.z.push_back(cp.value(out.cone, v));
    for (auto v : m.gamma_diag) out.gamma_diag.push_back(cp.value(out.cone, v));
    for (const auto& [e, v] : m.gamma_off) out.gamma_off[e] = cp.value(out.cone, v);
    return out;
}

}  // namespace cqdenoise
