#pragma once

// Cutting-surface loop over the Gamma-lifted master, plus a dense
// separation oracle and the simple separation-driven loop for tiny n.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cqdenoise/relaxation.hpp"

namespace cqdenoise {

struct CuttingSurfaceConfig {
    double rel_improvement_stop = 5e-5;
    double violation_tol = 1e-6;
    int max_rounds = 200;
    double d_max = 1e6;
    // a pair is only separated when x_i^2 - G_ii z_i stays below this
    double persp_tol = 1e-7;
    ConeSolverOptions solver;
    std::string trace_path;
};

struct CutRound {
    int round = 0;
    double objective = 0.0;
    int cuts_added = 0;
    int violated = 0;
    double max_violation = 0.0;
};

/// A cut to install before the first master solve: edge (i, j), parameter d.
struct CutSpec {
    std::size_t i = 0, j = 0;
    double d = 1.0;
};

struct DecompRun {
    SolveReport report;
    std::vector<CutRound> rounds;
    MasterSolution last;
    std::vector<CutSpec> pool;  // every cut of the final master
};

namespace detail {

inline double clamp_d(double d, double d_max) {
    if (!(d < d_max)) return d_max;  // also catches inf and nan
    return std::max(d, 1.0 / d_max);
}

// Violation of the cut row as it enters the master (coefficients scaled to
// at most one), i.e. cut_value / max(d, 1/d).
inline double scaled_cut_value(double d, double zi, double zj, double xi, double xj, double gii, double gij,
                               double gjj) {
    return cut_value(d, zi, zj, xi, xj, gii, gij, gjj) / std::max(d, 1.0 / d);
}

// The closed-form maximizer d* of the cut value, unless the row at d* would
// be violated by less than `tol` after scaling. That happens when d* runs
// off to 0 or infinity; the maximizer of the scaled violation is used then.
inline double choose_cut_d(double zi, double zj, double xi, double xj, double gii, double gij, double gjj,
                           double d_max, double tol) {
    const double dstar = clamp_d(optimal_d(zi, zj, xi, xj, gii, gjj), d_max);
    if (scaled_cut_value(dstar, zi, zj, xi, xj, gii, gij, gjj) > tol) return dstar;
    // on each side of 1 the scaled value is a concave quadratic in d or 1/d
    const double zc = active_z(zi, zj, xi, xj, gii, gjj);
    const double den = std::max(gii - safe_div(xi * xi, zc), 0.0);
    const double num = std::max(gjj - safe_div(xj * xj, zc), 0.0);
    const double v = gij - safe_div(xi * xj, zc);
    double best = dstar, best_val = scaled_cut_value(dstar, zi, zj, xi, xj, gii, gij, gjj);
    for (double c : {den > 0.0 ? std::min(v / den, 1.0) : 1.0, num > 0.0 ? std::max(num / v, 1.0) : d_max}) {
        if (!(c > 0.0)) continue;
        c = clamp_d(c, d_max);
        double val = scaled_cut_value(c, zi, zj, xi, xj, gii, gij, gjj);
        if (val > best_val) best = c, best_val = val;
    }
    return best;
}

inline void fill_report(SolveReport& r, const ProblemInstance& inst, const MasterSolution& s) {
    const std::size_t n = inst.size();
    r.objective = s.objective;
    r.x_star.assign(n, 0.0);
    r.z_star.assign(n, 0.0);
    if (s.x.size() != n) return;
    for (std::size_t i = 0; i < n; ++i) {
        r.z_star[i] = std::clamp(s.z[i], 0.0, 1.0);
        r.x_star[i] = std::max(s.x[i], 0.0);
    }
}

inline void write_round_trace(const std::string& path, const std::vector<CutRound>& rounds) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write trace file '" + path + "'");
    out.precision(12);
    out << "round,objective,cuts_added,violated,max_violation\n";
    for (const auto& r : rounds)
        out << r.round << ',' << r.objective << ',' << r.cuts_added << ',' << r.violated << ',' << r.max_violation
            << '\n';
}

}  // namespace detail

/// Cutting-surface method for the decomp relaxation: solve the master, add
/// one cut at the optimal d for every violated edge, and repeat until the
/// relative improvement drops below the threshold or no cut is violated.
/// Cuts in `warm` are valid for any linear term and are installed up front.
inline DecompRun run_decomp(const ProblemInstance& inst, const CuttingSurfaceConfig& cfg = {},
                            const std::vector<CutSpec>& warm = {}) {
    if (!(cfg.d_max > 1.0)) throw InvalidInput("d_max must exceed 1");
    if (cfg.max_rounds < 1) throw InvalidInput("max_rounds must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    DecompRun run;
    auto model = build_relaxation(inst, RelaxationKind::decomp);
    for (const auto& c : warm) register_cut(model, c.i, c.j, c.d);
    double prev = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
        auto sol = solve_master(model, cfg.solver);
        run.report.iterations = round;
        if (sol.status != SolveStatus::optimal) {
            run.report.status = sol.status;
            if (!sol.x.empty()) detail::fill_report(run.report, inst, sol);
            run.last = std::move(sol);
            break;
        }
        CutRound rec;
        rec.round = round;
        rec.objective = sol.objective;
        if (round > 1 && sol.objective - prev <= cfg.rel_improvement_stop * std::max(std::abs(sol.objective), 1e-12)) {
            run.rounds.push_back(rec);
            run.last = std::move(sol);
            converged = true;
            break;
        }
        for (const auto& [e, gij_var] : model.gamma_off) {
            (void)gij_var;
            const auto [i, j] = e;
            const double zi = sol.z[i], zj = sol.z[j], xi = sol.x[i], xj = sol.x[j];
            const double gii = sol.gamma_diag[i], gjj = sol.gamma_diag[j];
            if (xi * xi - gii * zi > cfg.persp_tol || xj * xj - gjj * zj > cfg.persp_tol) continue;
            const double viol = cut_violation(zi, zj, xi, xj, gii, sol.gamma_off.at(e), gjj);
            rec.max_violation = std::max(rec.max_violation, viol);
            if (!(viol > cfg.violation_tol)) continue;
            ++rec.violated;
            const double d = detail::choose_cut_d(zi, zj, xi, xj, gii, sol.gamma_off.at(e), gjj, cfg.d_max,
                                                  cfg.violation_tol);
            if (register_cut(model, i, j, d)) ++rec.cuts_added;
        }
        run.report.cuts_added += rec.cuts_added;
        run.rounds.push_back(rec);
        prev = sol.objective;
        run.last = std::move(sol);
        if (rec.cuts_added == 0) {
            converged = true;
            break;
        }
    }
    if (run.last.status == SolveStatus::optimal) {
        detail::fill_report(run.report, inst, run.last);
        run.report.status = converged ? SolveStatus::optimal : SolveStatus::iteration_limit;
    }
    for (const auto& c : model.cuts) run.pool.push_back({c.i, c.j, c.d});
    run.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!cfg.trace_path.empty()) detail::write_round_trace(cfg.trace_path, run.rounds);
    return run;
}

inline SolveReport solve_decomp(const ProblemInstance& inst, const CuttingSurfaceConfig& cfg = {}) {
    return run_decomp(inst, cfg).report;
}

/// One-shot solve for l1, persp and pairwise; the cutting-surface loop for decomp.
inline SolveReport solve_relaxation(const ProblemInstance& inst, RelaxationKind kind,
                                    const CuttingSurfaceConfig& cfg = {}) {
    if (kind == RelaxationKind::decomp) return solve_decomp(inst, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    auto m = build_relaxation(inst, kind);
    auto sol = solve_master(m, cfg.solver);
    SolveReport r;
    r.status = sol.status;
    r.iterations = 1;
    detail::fill_report(r, inst, sol);
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------------------------
// Dense separation for tiny instances

/// Decomposition parameters per edge: d_i multiplies x_i^2 and d_j
/// multiplies x_j^2 in |Q_ij| (d_i x_i^2 - 2 x_i x_j + d_j x_j^2).
struct EdgeSplit {
    std::size_t i = 0;
    std::size_t j = 0;
    double di = 1.0;
    double dj = 1.0;
};

struct SeparationResult {
    double theta = 0.0;
    std::vector<EdgeSplit> d;
};

namespace detail {

inline double separation_value(const MMatrixQuadratic& Q, const std::vector<double>& z, const std::vector<double>& x,
                               const std::vector<EdgeSplit>& d, const std::vector<std::size_t>& degree) {
    double acc = 0.0;
    for (const auto& e : d) {
        double q = std::abs(Q.offdiag.at({e.i, e.j}));
        acc += q * eval_g(z[e.i], z[e.j], x[e.i], x[e.j], {e.di, e.dj});
    }
    // isolated nodes keep their perspective term
    for (std::size_t i = 0; i < Q.n; ++i)
        if (degree[i] == 0) acc += detail::persp_term(Q.diag[i], x[i], z[i]);
    return acc;
}

}  // namespace detail

/// Maximizes Sum |Q_ij| g(z_i, z_j, x_i, x_j; d) over decompositions d that
/// reproduce the diagonal of Q and keep every pair convex. Test-scale only
/// (n <= 4): coordinate ascent where each move shifts weight between two
/// edges at a node, searched on a 401-point log grid and refined by golden
/// section. The objective is concave in d, so this converges to the maximum.
inline SeparationResult separation_oracle_small(const MMatrixQuadratic& Q, const std::vector<double>& z,
                                                const std::vector<double>& x) {
    const std::size_t n = Q.n;
    if (n > 4) throw InvalidInput("separation_oracle_small is limited to n <= 4");
    if (z.size() != n || x.size() != n) throw InvalidInput("point size does not match Q");
    std::vector<std::size_t> degree(n, 0);
    std::vector<std::vector<std::size_t>> incident(n);
    SeparationResult res;
    for (const auto& [e, q] : Q.offdiag) {
        incident[e.first].push_back(res.d.size());
        incident[e.second].push_back(res.d.size());
        ++degree[e.first];
        ++degree[e.second];
        res.d.push_back({e.first, e.second, 1.0, 1.0});
    }
    // even split of each diagonal; diagonal dominance makes every product >= 1
    for (std::size_t i = 0; i < n; ++i) {
        double w = 0.0;
        for (auto k : incident[i]) w += std::abs(Q.offdiag.at({res.d[k].i, res.d[k].j}));
        for (auto k : incident[i]) (res.d[k].i == i ? res.d[k].di : res.d[k].dj) = Q.diag[i] / w;
    }
    auto ref = [&](std::size_t k, std::size_t node) -> double& { return res.d[k].i == node ? res.d[k].di : res.d[k].dj; };
    auto other = [&](std::size_t k, std::size_t node) { return res.d[k].i == node ? res.d[k].dj : res.d[k].di; };
    auto weight = [&](std::size_t k) { return std::abs(Q.offdiag.at({res.d[k].i, res.d[k].j})); };

    double best = detail::separation_value(Q, z, x, res.d, degree);
    for (int sweep = 0; sweep < 50; ++sweep) {
        const double before = best;
        for (std::size_t node = 0; node < n; ++node) {
            const auto& inc = incident[node];
            for (std::size_t a = 0; a < inc.size(); ++a) {
                for (std::size_t b = a + 1; b < inc.size(); ++b) {
                    const std::size_t ka = inc[a], kb = inc[b];
                    const double wa = weight(ka), wb = weight(kb);
                    // mass shared by the two entries stays fixed
                    const double mass = wa * ref(ka, node) + wb * ref(kb, node);
                    const double lo = 1.0 / other(ka, node);
                    const double hi = (mass - wb / other(kb, node)) / wa;
                    if (!(hi > lo)) continue;
                    const double da0 = ref(ka, node), db0 = ref(kb, node);
                    auto value_at = [&](double da) {
                        ref(ka, node) = da;
                        ref(kb, node) = (mass - wa * da) / wb;
                        return detail::separation_value(Q, z, x, res.d, degree);
                    };
                    const int m = 401;
                    const double llo = std::log(lo), lhi = std::log(hi);
                    double arg = da0, val = value_at(da0);
                    int karg = -1;
                    for (int k = 0; k < m; ++k) {
                        double da = std::exp(llo + (lhi - llo) * k / (m - 1));
                        double v = value_at(da);
                        if (v > val) {
                            val = v;
                            arg = da;
                            karg = k;
                        }
                    }
                    if (karg >= 0) {
                        double l = llo + (lhi - llo) * std::max(karg - 1, 0) / (m - 1);
                        double r = llo + (lhi - llo) * std::min(karg + 1, m - 1) / (m - 1);
                        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
                        for (int it = 0; it < 80 && r - l > 1e-14; ++it) {
                            double c = r - gr * (r - l), d = l + gr * (r - l);
                            if (value_at(std::exp(c)) >= value_at(std::exp(d)))
                                r = d;
                            else
                                l = c;
                        }
                        double da = std::exp(0.5 * (l + r));
                        double v = value_at(da);
                        if (v > val) {
                            val = v;
                            arg = da;
                        }
                    }
                    if (val > best) {
                        value_at(arg);
                        best = val;
                    } else {
                        ref(ka, node) = da0;
                        ref(kb, node) = db0;
                    }
                }
            }
        }
        if (best - before <= 1e-13 * (1.0 + std::abs(best))) break;
    }
    res.theta = best;
    return res;
}

struct SimpleCutRun {
    double objective = 0.0;
    std::vector<double> x, z;
    std::vector<double> trajectory;
    std::vector<std::vector<EdgeSplit>> separations;
    SolveStatus status = SolveStatus::numerical_failure;
};

/// Starts from the perspective relaxation written with an epigraph t for
/// x'Qx, then repeatedly separates theta at the current point and adds
/// t >= Sum |Q_ij| g(...; d) through the hull blocks. Test-scale only.
inline SimpleCutRun run_simple_cutting_surface(const ProblemInstance& inst, int max_rounds = 30,
                                               double tol = 1e-7, const ConeSolverOptions& opts = {}) {
    using D = ConeBuilder::Domain;
    const std::size_t n = inst.size();
    const auto Q = to_mmatrix(inst);
    MasterModel m;
    m.instance = inst;
    m.Q = Q;
    auto& b = m.builder;
    b.add_objective_constant(Q.constant);
    for (std::size_t i = 0; i < n; ++i) {
        m.x.push_back(b.add_var(D::nonneg, "x" + std::to_string(i)));
        m.z.push_back(b.add_var(D::nonneg, "z" + std::to_string(i)));
    }
    auto t = b.add_var(D::nonneg, "t");
    b.add_objective(t, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double lin = Q.linear[i] + inst.priors.mu1;
        if (!inst.extra_linear.empty()) lin += inst.extra_linear[i];
        b.add_objective(m.x[i], lin);
        b.add_objective(m.z[i], inst.priors.l0_weight());
        b.add_le(LinExpr::var(m.z[i]), 1.0);
        b.add_le(LinExpr::var(m.x[i]) - inst.bigM * LinExpr::var(m.z[i]), 0.0);
    }
    add_prior_constraints(m, inst.priors);

    std::vector<std::size_t> degree(n, 0);
    for (const auto& [e, q] : Q.offdiag) ++degree[e.first], ++degree[e.second];

    // perspective relaxation
    {
        LinExpr rhs;
        const auto surplus = Q.dominance_surplus();
        for (std::size_t i = 0; i < n; ++i) {
            if (surplus[i] <= 0.0) continue;
            auto ti = b.add_var(D::nonneg);
            b.add_rotated_cone(LinExpr::var(ti), LinExpr::var(m.z[i]), {LinExpr::var(m.x[i])});
            rhs.add(ti, surplus[i]);
        }
        for (const auto& [e, q] : Q.offdiag) {
            auto u = b.add_var(D::nonneg);
            b.add_rotated_cone(LinExpr::var(u), LinExpr(1.0), {LinExpr::var(m.x[e.first]) - LinExpr::var(m.x[e.second])});
            rhs.add(u, std::abs(q));
        }
        b.add_le(rhs - LinExpr::var(t), 0.0);
    }

    SimpleCutRun run;
    for (int round = 0; round < max_rounds; ++round) {
        auto cp = b.compile();
        auto sol = solve_cone_program(cp.program, opts);
        run.status = to_solve_status(sol.status);
        if (run.status != SolveStatus::optimal) break;
        run.objective = sol.objective;
        run.trajectory.push_back(sol.objective);
        run.x.assign(n, 0.0);
        run.z.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            run.x[i] = cp.value(sol, m.x[i]);
            run.z[i] = cp.value(sol, m.z[i]);
        }
        const double tv = cp.value(sol, t);
        auto sep = separation_oracle_small(Q, run.z, run.x);
        run.separations.push_back(sep.d);
        if (sep.theta - tv <= tol * (1.0 + std::abs(tv))) break;
        LinExpr rhs;
        for (const auto& e : sep.d) {
            auto s = b.add_var(D::nonneg);
            z2_hull_block(b, LinExpr::var(m.x[e.i]), LinExpr::var(m.x[e.j]), LinExpr::var(m.z[e.i]),
                          LinExpr::var(m.z[e.j]), LinExpr::var(s), {e.di, e.dj});
            rhs.add(s, std::abs(Q.offdiag.at({e.i, e.j})));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (degree[i] != 0) continue;
            auto p = b.add_var(D::nonneg);
            b.add_rotated_cone(LinExpr::var(p), LinExpr::var(m.z[i]), {LinExpr::var(m.x[i])});
            rhs.add(p, Q.diag[i]);
        }
        b.add_le(rhs - LinExpr::var(t), 0.0);
        if (round + 1 == max_rounds) run.status = SolveStatus::iteration_limit;
    }
    return run;
}

}  // namespace cqdenoise
